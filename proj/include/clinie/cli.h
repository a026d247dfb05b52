// Command-line front end. Subcommands: ner, mod, rel (per-stage train/test),
// pipeline, cv, stats, generate, eval.
//
// Exit codes: 0 ok, 1 runtime error, 2 usage, 3 model/schema mismatch,
// 4 data validation failure.

#ifndef CLINIE_CLI_H_
#define CLINIE_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "clinie/errors.h"

namespace clinie {

enum ExitCode {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitUsage = 2,
  kExitModel = 3,
  kExitData = 4,
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Results go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clinie

#endif  // CLINIE_CLI_H_
