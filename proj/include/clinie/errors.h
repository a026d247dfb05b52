// Exception hierarchy shared by all modules. The CLI maps each family onto a
// distinct process exit code.

#ifndef CLINIE_ERRORS_H_
#define CLINIE_ERRORS_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace clinie {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown codes, malformed schema configuration, empty tag sets.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Malformed annotated text. Carries a 1-based line/column when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Schema signature violations, corpus alignment problems, bad training data.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what,
                           std::vector<std::string> details = {});
  const std::vector<std::string>& details() const { return details_; }

 private:
  std::vector<std::string> details_;
};

// Checkpoint missing/corrupt, schema fingerprint mismatch, shape mismatch.
class ModelError : public Error {
 public:
  using Error::Error;
};

class MismatchError : public ModelError {
 public:
  using ModelError::ModelError;
};

// Non-finite loss, empty training set.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace clinie

#endif  // CLINIE_ERRORS_H_
