#include "clinie/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <ostream>

#include "clinie/annotation_io.h"
#include "clinie/pipeline.h"
#include "clinie/synth.h"

namespace clinie {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string schema_file;
  std::string config_file;
  std::vector<std::string> sets;
  bool lenient = false;

  void add(CLI::App* app) {
    app->add_option("--schema", schema_file, "Schema configuration file (built-in default)");
    app->add_option("--config", config_file, "key=value settings file; flags override it");
    app->add_option("--set", sets, "Extra key=value setting (repeatable)");
    app->add_flag("--lenient", lenient, "Accept signature violations with a warning");
  }

  Schema schema() const {
    return schema_file.empty() ? Schema::default_schema() : Schema::load(schema_file);
  }

  ParseOptions parse_options() const {
    ParseOptions o;
    o.mode = lenient ? ValidationMode::kLenient : ValidationMode::kStrict;
    return o;
  }

  void apply(ModelConfig& model, TrainConfig& train) const {
    auto apply_line = [&](std::string_view line, const std::string& where) {
      auto hash = line.find('#');
      if (hash != std::string_view::npos) line = line.substr(0, hash);
      while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
        line.remove_suffix(1);
      while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
      if (line.empty()) return;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw UsageError(where + ": expected key=value");
      std::string_view key = line.substr(0, eq);
      while (!key.empty() && key.back() == ' ') key.remove_suffix(1);
      try {
        if (!set_option(model, train, key, line.substr(eq + 1))) {
          throw UsageError(where + ": unknown setting '" + std::string(key) + "'");
        }
      } catch (const ValidationError& e) {
        throw UsageError(where + ": " + e.what());
      }
    };
    if (!config_file.empty()) {
      std::string text = read_text_file(config_file);
      std::size_t start = 0;
      int line_no = 0;
      while (start <= text.size()) {
        auto nl = text.find('\n', start);
        ++line_no;
        apply_line(std::string_view(text).substr(start, nl == std::string::npos ? std::string::npos : nl - start),
                   config_file + ":" + std::to_string(line_no));
        if (nl == std::string::npos) break;
        start = nl + 1;
      }
    }
    for (const auto& s : sets) apply_line(s, "--set " + s);
  }
};

void apply_pretrained(ModelConfig& model, const std::string& value) {
  if (value.empty()) return;
  if (value == "recurrent" || value == "self_attention") {
    model.encoder.kind = parse_encoder_kind(value);
  } else {
    model.encoder.kind = EncoderKind::kPrecomputed;
    model.encoder.vectors_path = value;
  }
}

void require_checkpoint_dir(const std::string& dir, const std::string& flag) {
  if (dir.empty()) throw UsageError(flag + " is required");
  if (!fs::is_directory(dir)) throw UsageError(flag + " " + dir + " does not exist");
}

// Stage train/test flags.
struct StageCommand {
  explicit StageCommand(Stage s) : stage(s) {}

  Stage stage;
  Common common;
  bool do_train = false;
  std::string train_file, dev_file, saved_model, test_file, test_out, pretrained_model, profile;
  int batch_size = 0;
  int epochs = 0;
  double learning_rate = 0.0;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  CLI::App* add(CLI::App& app, const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    common.add(sub);
    sub->add_flag("--do_train", do_train, "Train instead of test");
    sub->add_option("--train_file", train_file, "Annotated training corpus");
    sub->add_option("--dev_file", dev_file, "Annotated validation corpus");
    sub->add_option("--saved_model", saved_model, "Checkpoint directory (written when training)");
    sub->add_option("--test_file", test_file, "Input corpus for prediction");
    sub->add_option("--test_out", test_out, "Output file for predictions");
    sub->add_option("--pretrained_model", pretrained_model,
                    "Precomputed vector file, or encoder kind (recurrent, self_attention)");
    sub->add_option("--profile", profile, "Training profile: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    batch_opt = sub->add_option("--batch_size", batch_size, "Batch size");
    epochs_opt = sub->add_option("--epochs", epochs, "Training epochs");
    lr_opt = sub->add_option("--learning_rate", learning_rate, "AdamW learning rate");
    seed_opt = sub->add_option("--seed", seed, "Random seed");
    if (stage == Stage::kRe) threshold_opt = sub->add_option("--threshold", threshold, "Decoding threshold");
    return sub;
  }

  int run(std::ostream& out, std::ostream& err) {
    const Schema schema = common.schema();
    if (do_train) {
      if (train_file.empty() || dev_file.empty()) {
        throw UsageError("--do_train requires --train_file and --dev_file");
      }
      if (saved_model.empty()) throw UsageError("--do_train requires --saved_model");
      ModelConfig model;
      TrainConfig train = TrainConfig::desk(stage);
      common.apply(model, train);
      train.stage = stage;
      if (!profile.empty()) {
        const TrainConfig p = profile == "paper" ? TrainConfig::paper(stage) : TrainConfig::desk(stage);
        train.epochs = p.epochs;
        train.batch_size = p.batch_size;
        train.learning_rate = p.learning_rate;
        train.patience = p.patience;
      }
      apply_pretrained(model, pretrained_model);
      if (batch_opt->count()) train.batch_size = batch_size;
      if (epochs_opt->count()) train.epochs = epochs;
      if (lr_opt->count()) train.learning_rate = learning_rate;
      if (seed_opt->count()) train.seed = seed;
      if (threshold_opt && threshold_opt->count()) model.threshold = threshold;
      try {
        model.validate();
        train.validate();
      } catch (const ValidationError& e) {
        throw UsageError(e.what());
      }
      const Corpus train_corpus = read_corpus_file(train_file, schema, common.parse_options());
      const Corpus dev_corpus = read_corpus_file(dev_file, schema, common.parse_options());
      Checkpoint ck = train_stage(train_corpus, dev_corpus, schema, model, train, &err);
      save_checkpoint(ck, saved_model);
      out << "stage\t" << stage_name(stage) << "\nbest_epoch\t" << ck.best_epoch << "\ndev_f1\t"
          << ck.best_dev_f1 << '\n';
      return kExitOk;
    }
    require_checkpoint_dir(saved_model, "--saved_model");
    if (test_file.empty() || test_out.empty()) {
      throw UsageError("test mode requires --saved_model, --test_file and --test_out");
    }
    Checkpoint ck = load_checkpoint(saved_model);
    check_compatible(ck, schema, stage);
    if (threshold_opt && threshold_opt->count()) ck.model.threshold = threshold;
    const Corpus input = read_corpus_file(test_file, schema, common.parse_options());
    const Corpus pred = predict_from_gold(ck, input);
    write_corpus_file(test_out, pred, schema);
    bool annotated = false;
    for (const auto& d : input.documents) annotated = annotated || !d.entities.empty();
    if (annotated) out << "f1\t" << stage_f1(stage, pred, input) << '\n';
    return kExitOk;
  }
};

struct PipelineCommand {
  Common common;
  std::string mer_model, mc_model, re_model, test_out;
  std::vector<std::string> inputs;
  double threshold = 0.0;
  CLI::Option* threshold_opt = nullptr;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("pipeline", "Annotate raw reports with MER -> MC -> RE");
    common.add(sub);
    sub->add_option("--mer_model", mer_model, "Entity recognition checkpoint")->required();
    sub->add_option("--mc_model", mc_model, "Modality checkpoint")->required();
    sub->add_option("--re_model", re_model, "Relation checkpoint")->required();
    sub->add_option("--test_out", test_out,
                    "Output file (one input) or directory (several inputs)")->required();
    threshold_opt = sub->add_option("--threshold", threshold, "Relation decoding threshold");
    sub->add_option("inputs,--test_file", inputs, "Report files")->required();
  }

  int run(std::ostream& out, std::ostream&) {
    const Schema schema = common.schema();
    require_checkpoint_dir(mer_model, "--mer_model");
    require_checkpoint_dir(mc_model, "--mc_model");
    require_checkpoint_dir(re_model, "--re_model");
    Pipeline pipeline = load_pipeline(mer_model, mc_model, re_model, schema);
    if (threshold_opt->count()) pipeline.re.mutable_config().threshold = threshold;
    std::vector<std::pair<std::string, Corpus>> results;
    ParseOptions lenient;
    lenient.mode = ValidationMode::kLenient;
    for (const auto& path : inputs) {
      results.push_back({path, pipeline.annotate(read_corpus_file(path, schema, lenient))});
    }
    if (inputs.size() == 1 && !fs::is_directory(test_out)) {
      write_corpus_file(test_out, results.front().second, schema);
    } else {
      fs::create_directories(test_out);
      for (const auto& [path, corpus] : results) {
        write_corpus_file((fs::path(test_out) / fs::path(path).filename()).string(), corpus, schema);
      }
    }
    long docs = 0;
    for (const auto& [_, c] : results) docs += static_cast<long>(c.size());
    out << "documents\t" << docs << '\n';
    return kExitOk;
  }
};

struct StatsCommand {
  Common common;
  std::vector<std::string> inputs;
  bool tsv = false;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("stats", "Entity, modality and relation counts");
    common.add(sub);
    sub->add_flag("--tsv", tsv, "Tab-separated output");
    sub->add_option("inputs", inputs, "Annotated corpus files")->required();
  }

  int run(std::ostream& out, std::ostream&) {
    const Schema schema = common.schema();
    Corpus all;
    for (const auto& path : inputs) {
      Corpus c = read_corpus_file(path, schema, common.parse_options());
      for (auto& d : c.documents) all.documents.push_back(std::move(d));
    }
    const CorpusStats stats = corpus_stats(all, schema);
    out << (tsv ? format_stats_tsv(stats) : format_stats_table(stats));
    return kExitOk;
  }
};

struct GenerateCommand {
  Common common;
  GenConfig config;
  std::string out_file, ledger_file;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("generate", "Write a synthetic annotated corpus");
    common.add(sub);
    sub->add_option("--n_documents", config.n_documents, "Number of reports");
    sub->add_option("--patients", config.patients, "Number of patients");
    sub->add_option("--seed", config.seed, "Random seed");
    sub->add_option("--lexicon_size", config.lexicon_size, "Words per entity type");
    sub->add_option("--cross_sentence", config.cross_sentence_fraction,
                    "Share of relations split over two lines");
    sub->add_option("--out", out_file, "Output corpus file")->required();
    sub->add_option("--ledger", ledger_file, "Ledger output file");
  }

  int run(std::ostream& out, std::ostream&) {
    const Schema schema = common.schema();
    try {
      config.validate(schema);
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
    Generated g = generate(config, schema);
    write_corpus_file(out_file, g.corpus, schema);
    if (!ledger_file.empty()) write_text_file(ledger_file, g.ledger.serialize());
    out << "documents\t" << g.ledger.documents << "\nrelations\t" << g.ledger.relation_total()
        << '\n';
    return kExitOk;
  }
};

struct EvalCommand {
  Common common;
  std::string pred_file, gold_file;
  bool tsv = false;
  int window = 128;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("eval", "Score predictions against gold");
    common.add(sub);
    sub->add_option("--pred", pred_file, "Predicted corpus")->required();
    sub->add_option("--gold", gold_file, "Gold corpus")->required();
    sub->add_option("--window", window, "Candidate window reported with the scores");
    sub->add_flag("--tsv", tsv, "Tab-separated output");
  }

  int run(std::ostream& out, std::ostream&) {
    const Schema schema = common.schema();
    const Corpus pred = read_corpus_file(pred_file, schema, common.parse_options());
    const Corpus gold = read_corpus_file(gold_file, schema, common.parse_options());
    const EvalReport report = evaluate(pred, gold, schema, window);
    out << (tsv ? format_report_tsv(report) : format_report(report));
    return kExitOk;
  }
};

struct CvCommand {
  Common common;
  std::string data_file, report_tsv;
  int folds = 5;
  std::uint64_t seed = 7;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("cv", "Patient-level cross-validation of the full pipeline");
    common.add(sub);
    sub->add_option("--data", data_file, "Annotated corpus")->required();
    sub->add_option("--folds", folds, "Number of folds");
    sub->add_option("--seed", seed, "Fold assignment seed");
  }

  int run(std::ostream& out, std::ostream& err) {
    const Schema schema = common.schema();
    CvOptions options;
    options.folds = folds;
    options.seed = seed;
    for (auto* s : {&options.mer, &options.mc, &options.re}) {
      const Stage stage = s->train.stage;
      common.apply(s->model, s->train);
      s->train.stage = stage;
    }
    const Corpus corpus = read_corpus_file(data_file, schema, common.parse_options());
    const CvResult result = cross_validate(corpus, schema, options, &err);
    out << format_cv_report(result.report);
    return kExitOk;
  }
};

int report(const std::string& prefix, const std::exception& e, int code, std::ostream& err) {
  err << "error: " << prefix << e.what() << '\n';
  if (auto* v = dynamic_cast<const ValidationError*>(&e)) {
    for (const auto& d : v->details()) err << "  " << d << '\n';
  }
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clinical report information extraction: entities, modality, relations", "clinie"};
  app.require_subcommand(1);
  StageCommand ner(Stage::kMer), mod(Stage::kMc), rel(Stage::kRe);
  CLI::App* ner_app = ner.add(app, "ner", "Entity recognition (BIO + CRF)");
  CLI::App* mod_app = mod.add(app, "mod", "Entity modality classification");
  CLI::App* rel_app = rel.add(app, "rel", "Relation extraction by head selection");
  PipelineCommand pipeline;
  pipeline.add(app);
  StatsCommand stats;
  stats.add(app);
  GenerateCommand gen;
  gen.add(app);
  EvalCommand eval;
  eval.add(app);
  CvCommand cv;
  cv.add(app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ner_app->parsed()) return ner.run(out, err);
    if (mod_app->parsed()) return mod.run(out, err);
    if (rel_app->parsed()) return rel.run(out, err);
    if (app.got_subcommand("pipeline")) return pipeline.run(out, err);
    if (app.got_subcommand("stats")) return stats.run(out, err);
    if (app.got_subcommand("generate")) return gen.run(out, err);
    if (app.got_subcommand("eval")) return eval.run(out, err);
    if (app.got_subcommand("cv")) return cv.run(out, err);
    throw UsageError("no subcommand");
  } catch (const UsageError& e) {
    return report("", e, kExitUsage, err);
  } catch (const ModelError& e) {
    return report("", e, kExitModel, err);
  } catch (const ParseError& e) {
    std::string where;
    if (e.line() > 0) where = "line " + std::to_string(e.line()) + ", column " + std::to_string(e.column()) + ": ";
    return report(where, e, kExitData, err);
  } catch (const ValidationError& e) {
    return report("", e, kExitData, err);
  } catch (const SchemaError& e) {
    return report("schema: ", e, kExitData, err);
  } catch (const std::exception& e) {
    return report("", e, kExitRuntime, err);
  }
}

}  // namespace clinie
