#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "clinie/annotation_io.h"
#include "clinie/checkpoint.h"
#include "clinie/cli.h"

using namespace clinie;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string tmp(const std::string& name) {
  const auto dir = fs::path(CLINIE_TEST_TMP) / "cli";
  fs::create_directories(dir);
  return (dir / name).string();
}

const std::vector<std::string> kTiny = {"--set", "embed_dim=6", "--set", "hidden_dim=6",
                                        "--set", "epochs=3"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"ner", "--test_file", "x", "--test_out", "y"}).code == kExitUsage);
  CHECK(cli({"rel", "--do_train", "--train_file", "x"}).code == kExitUsage);
  const Run bad_config = cli({"ner", "--do_train", "--train_file", "a", "--dev_file", "b",
                              "--saved_model", tmp("m"), "--set", "colour=red"});
  CHECK(bad_config.code == kExitUsage);
}

TEST_CASE("generate, stats and eval") {
  const std::string data = tmp("data.xml"), ledger = tmp("ledger.tsv");
  const Run g = cli({"generate", "--n_documents", "12", "--patients", "3", "--out", data,
                     "--ledger", ledger});
  REQUIRE(g.code == kExitOk);
  CHECK(fs::exists(ledger));
  const Run s = cli({"stats", "--tsv", data});
  CHECK(s.code == kExitOk);
  CHECK(s.out.find("medical\tregion\t") != std::string::npos);
  const Run e = cli({"eval", "--pred", data, "--gold", data});
  CHECK(e.code == kExitOk);
  CHECK(e.out.find("100.00") != std::string::npos);

  write_text_file(tmp("other.xml"), "<doc id=\"zzz\" patient=\"p\">\nx\n</doc>\n");
  CHECK(cli({"eval", "--pred", tmp("other.xml"), "--gold", data}).code == kExitData);
  write_text_file(tmp("broken.xml"), "<D id=\"1\">x</A>");
  CHECK(cli({"stats", tmp("broken.xml")}).code == kExitData);
  CHECK(cli({"stats", tmp("does_not_exist.xml")}).code == kExitRuntime);
}

TEST_CASE("stage train/test round trip and the pipeline") {
  const std::string data = tmp("train.xml");
  REQUIRE(cli({"generate", "--n_documents", "10", "--patients", "3", "--seed", "4", "--out", data}).code ==
          kExitOk);
  const char* stages[] = {"ner", "mod", "rel"};
  for (const char* stage : stages) {
    const std::string dir = tmp(std::string("model_") + stage);
    fs::remove_all(dir);
    const Run t = cli(with({stage, "--do_train", "--train_file", data, "--dev_file", data,
                            "--saved_model", dir, "--batch_size", "4"},
                           kTiny));
    REQUIRE(t.code == kExitOk);
    CHECK(fs::exists(fs::path(dir) / "params.txt"));
    const Checkpoint ck = load_checkpoint(dir);
    CHECK(ck.train.batch_size == 4);
    CHECK(ck.train.epochs == 3);
    const std::string out = tmp(std::string("pred_") + stage + ".xml");
    const Run p = cli({stage, "--saved_model", dir, "--test_file", data, "--test_out", out});
    REQUIRE(p.code == kExitOk);
    // Testing on the dev file reproduces the logged dev score.
    CHECK(p.out == "f1\t" + [&] {
      std::ostringstream s;
      s << ck.best_dev_f1;
      return s.str();
    }() + "\n");
    CHECK(fs::exists(out));
  }

  const std::string raw = tmp("raw.txt");
  write_text_file(raw, strip_markup(read_text_file(data)));
  const std::string annotated = tmp("annotated.xml");
  const std::vector<std::string> models = {"--mer_model", tmp("model_ner"), "--mc_model",
                                           tmp("model_mod"), "--re_model", tmp("model_rel")};
  const Run p = cli(with(with({"pipeline"}, models), {"--test_out", annotated, raw}));
  REQUIRE(p.code == kExitOk);
  const Corpus result = read_corpus_file(annotated, Schema::default_schema());
  CHECK(result.size() == 1);
  const std::string first = read_text_file(annotated);
  REQUIRE(cli(with(with({"pipeline"}, models), {"--test_out", annotated, raw})).code == kExitOk);
  CHECK(read_text_file(annotated) == first);

  const std::string empty = tmp("empty.txt");
  write_text_file(empty, "");
  const std::string empty_out = tmp("empty_out.xml");
  CHECK(cli(with(with({"pipeline"}, models), {"--test_out", empty_out, empty})).code == kExitOk);
  CHECK(read_corpus_file(empty_out, Schema::default_schema()).documents.at(0).text.empty());

  // Fingerprint mismatch: exit 3 and nothing written.
  const std::string schema_file = tmp("schema.txt");
  write_text_file(schema_file, Schema::default_schema().to_config() + "entity EXTRA\n");
  const std::string mismatch_out = tmp("mismatch.xml");
  fs::remove(mismatch_out);
  const Run m = cli(with(with({"pipeline", "--schema", schema_file}, models),
                         {"--test_out", mismatch_out, raw}));
  CHECK(m.code == kExitModel);
  CHECK_FALSE(fs::exists(mismatch_out));

  CHECK(cli({"pipeline", "--mer_model", tmp("nope"), "--mc_model", tmp("model_mod"), "--re_model",
             tmp("model_rel"), "--test_out", tmp("x.xml"), raw})
            .code == kExitUsage);
  CHECK(cli(with(with({"pipeline"}, models), {"--test_out", tmp("y.xml"), tmp("missing.txt")})).code ==
        kExitRuntime);
}
