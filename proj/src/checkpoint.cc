#include "clinie/checkpoint.h"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "clinie/errors.h"

namespace clinie {

namespace fs = std::filesystem;

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("invalid value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "on") return true;
  if (text == "0" || text == "false" || text == "off") return false;
  throw ValidationError("invalid value for " + std::string(key) + ": '" + std::string(text) + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    auto nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

std::string read_member(const std::string& dir, const char* name) {
  const fs::path path = fs::path(dir) / name;
  if (!fs::exists(path)) throw ModelError("checkpoint " + dir + " has no " + name);
  return read_text_file(path.string());
}

template <typename Model>
void attach_vectors(Model& model, const ModelConfig& config) {
  if (config.encoder.kind == EncoderKind::kPrecomputed) {
    model.encoder().set_vectors(PrecomputedVectors::load(config.encoder.vectors_path));
  }
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kMer: return "mer";
    case Stage::kMc: return "mc";
    case Stage::kRe: return "re";
  }
  return "mer";
}

Stage parse_stage(std::string_view name) {
  if (name == "mer" || name == "ner") return Stage::kMer;
  if (name == "mc" || name == "mod") return Stage::kMc;
  if (name == "re" || name == "rel") return Stage::kRe;
  throw ValidationError("unknown stage '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  encoder.validate();
  std::vector<std::string> problems;
  if (min_freq < 1) problems.push_back("min_freq must be >= 1");
  if (type_dim < 1) problems.push_back("type_dim must be >= 1");
  if (modality_dim < 1) problems.push_back("modality_dim must be >= 1");
  if (pair_dim < 1) problems.push_back("pair_dim must be >= 1");
  if (!(threshold >= 0.0 && threshold < 1.0)) problems.push_back("threshold must be in [0, 1)");
  if (window < 0) problems.push_back("window must be >= 0");
  if (!problems.empty()) throw ValidationError("invalid model configuration", problems);
}

TrainConfig TrainConfig::desk(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  return c;
}

TrainConfig TrainConfig::paper(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  c.epochs = 10;
  c.batch_size = 16;
  c.learning_rate = 5e-5;
  c.patience = 0;
  return c;
}

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (epochs < 0) problems.push_back("epochs must be >= 0");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) problems.push_back("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) problems.push_back("weight_decay must be >= 0");
  if (patience < 0) problems.push_back("patience must be >= 0");
  if (!(clip_norm > 0.0)) problems.push_back("clip_norm must be > 0");
  if (!problems.empty()) throw ValidationError("invalid training configuration", problems);
}

bool set_option(ModelConfig& m, TrainConfig& t, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "profile") {
    Stage stage = t.stage;
    if (value == "desk") t = TrainConfig::desk(stage);
    else if (value == "paper") t = TrainConfig::paper(stage);
    else throw ValidationError("unknown profile '" + std::string(value) + "'");
  } else if (key == "stage") t.stage = parse_stage(value);
  else if (key == "epochs") t.epochs = parse_number<int>(key, value);
  else if (key == "batch_size") t.batch_size = parse_number<int>(key, value);
  else if (key == "learning_rate") t.learning_rate = parse_number<double>(key, value);
  else if (key == "weight_decay") t.weight_decay = parse_number<double>(key, value);
  else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "patience") t.patience = parse_number<int>(key, value);
  else if (key == "clip_norm") t.clip_norm = parse_number<double>(key, value);
  else if (key == "encoder") {
    try {
      m.encoder.kind = parse_encoder_kind(value);
    } catch (const Error& e) {
      throw ValidationError(e.what());
    }
  } else if (key == "embed_dim") m.encoder.embed_dim = parse_number<int>(key, value);
  else if (key == "hidden_dim") m.encoder.hidden_dim = parse_number<int>(key, value);
  else if (key == "layers") m.encoder.layers = parse_number<int>(key, value);
  else if (key == "heads") m.encoder.heads = parse_number<int>(key, value);
  else if (key == "dropout") m.encoder.dropout = parse_number<double>(key, value);
  else if (key == "vectors") m.encoder.vectors_path = std::string(value);
  else if (key == "min_freq") m.min_freq = parse_number<int>(key, value);
  else if (key == "use_crf") m.use_crf = parse_bool(key, value);
  else if (key == "type_dim") m.type_dim = parse_number<int>(key, value);
  else if (key == "modality_dim") m.modality_dim = parse_number<int>(key, value);
  else if (key == "pair_dim") m.pair_dim = parse_number<int>(key, value);
  else if (key == "threshold") m.threshold = parse_number<double>(key, value);
  else if (key == "window") m.window = parse_number<int>(key, value);
  else if (key == "schema_filter") m.schema_filter = parse_bool(key, value);
  else return false;
  return true;
}

std::string format_options(const ModelConfig& m, const TrainConfig& t) {
  std::ostringstream out;
  out << "stage=" << stage_name(t.stage) << '\n'
      << "epochs=" << t.epochs << '\n'
      << "batch_size=" << t.batch_size << '\n'
      << "learning_rate=" << fmt_double(t.learning_rate) << '\n'
      << "weight_decay=" << fmt_double(t.weight_decay) << '\n'
      << "seed=" << t.seed << '\n'
      << "patience=" << t.patience << '\n'
      << "clip_norm=" << fmt_double(t.clip_norm) << '\n'
      << "encoder=" << encoder_kind_name(m.encoder.kind) << '\n'
      << "embed_dim=" << m.encoder.embed_dim << '\n'
      << "hidden_dim=" << m.encoder.hidden_dim << '\n'
      << "layers=" << m.encoder.layers << '\n'
      << "heads=" << m.encoder.heads << '\n'
      << "dropout=" << fmt_double(m.encoder.dropout) << '\n'
      << "vectors=" << m.encoder.vectors_path << '\n'
      << "min_freq=" << m.min_freq << '\n'
      << "use_crf=" << (m.use_crf ? "true" : "false") << '\n'
      << "type_dim=" << m.type_dim << '\n'
      << "modality_dim=" << m.modality_dim << '\n'
      << "pair_dim=" << m.pair_dim << '\n'
      << "threshold=" << fmt_double(m.threshold) << '\n'
      << "window=" << m.window << '\n'
      << "schema_filter=" << (m.schema_filter ? "true" : "false") << '\n';
  return out.str();
}

std::string format_params(const ad::ParamSet& params) {
  std::string out;
  char buf[64];
  for (const auto& p : params) {
    out += p->name() + ' ' + std::to_string(p->value.rows()) + ' ' +
           std::to_string(p->value.cols()) + '\n';
    for (int r = 0; r < p->value.rows(); ++r) {
      for (int c = 0; c < p->value.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%a", p->value(r, c));
        if (c) out += ' ';
        out += buf;
      }
      out += '\n';
    }
  }
  return out;
}

ad::ParamSet parse_params(std::string_view text) {
  ad::ParamSet params;
  auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size()) {
    std::string header(trim(lines[i++]));
    if (header.empty()) continue;
    std::istringstream hs(header);
    std::string name;
    int rows = -1, cols = -1;
    if (!(hs >> name >> rows >> cols) || rows < 0 || cols < 0) {
      throw ModelError("malformed parameter header '" + header + "'");
    }
    Matrix value(rows, cols);
    for (int r = 0; r < rows; ++r) {
      if (i >= lines.size()) throw ModelError("truncated parameter " + name);
      std::string row(lines[i++]);
      const char* p = row.c_str();
      for (int c = 0; c < cols; ++c) {
        char* end = nullptr;
        value(r, c) = std::strtod(p, &end);
        if (end == p) throw ModelError("malformed value in parameter " + name);
        p = end;
      }
      while (*p == ' ' || *p == '\r') ++p;
      if (*p) throw ModelError("extra values in parameter " + name);
    }
    if (params.contains(name)) throw ModelError("duplicate parameter " + name);
    params.add(name, std::move(value));
  }
  return params;
}

std::string format_train_log(const std::vector<EpochRecord>& log) {
  std::string out = "epoch\ttrain_loss\tdev_f1\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + '\t' + fmt_double(r.train_loss) + '\t' +
           fmt_double(r.dev_f1) + '\n';
  }
  return out;
}

std::vector<EpochRecord> parse_train_log(std::string_view text) {
  std::vector<EpochRecord> log;
  auto lines = split_lines(text);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string line(trim(lines[i]));
    if (line.empty()) continue;
    std::istringstream in(line);
    EpochRecord r;
    if (!(in >> r.epoch >> r.train_loss >> r.dev_f1)) throw ModelError("malformed training log line");
    log.push_back(r);
  }
  return log;
}

void save_checkpoint(const Checkpoint& ck, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create checkpoint directory " + dir + ": " + ec.message());
  const Schema schema = ck.schema();
  std::string config = format_options(ck.model, ck.train);
  config += "initial_dev_f1=" + fmt_double(ck.initial_dev_f1) + '\n';
  config += "best_epoch=" + std::to_string(ck.best_epoch) + '\n';
  config += "best_dev_f1=" + fmt_double(ck.best_dev_f1) + '\n';
  write_text_file((fs::path(dir) / "config.txt").string(), config);
  write_text_file((fs::path(dir) / "vocab.txt").string(), ck.vocab.serialize());
  write_text_file((fs::path(dir) / "schema.txt").string(), ck.schema_config);
  write_text_file((fs::path(dir) / "fingerprint.txt").string(), schema.fingerprint_hex() + '\n');
  write_text_file((fs::path(dir) / "params.txt").string(), format_params(ck.params));
  write_text_file((fs::path(dir) / "train_log.tsv").string(), format_train_log(ck.log));
}

Checkpoint load_checkpoint(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ModelError("checkpoint directory " + dir + " does not exist");
  Checkpoint ck;
  try {
    const std::string config = read_member(dir, "config.txt");
    for (auto line : split_lines(config)) {
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ModelError("malformed config line '" + std::string(line) + "'");
      auto key = line.substr(0, eq), value = line.substr(eq + 1);
      if (key == "initial_dev_f1") ck.initial_dev_f1 = parse_number<double>(key, value);
      else if (key == "best_epoch") ck.best_epoch = parse_number<int>(key, value);
      else if (key == "best_dev_f1") ck.best_dev_f1 = parse_number<double>(key, value);
      else if (!set_option(ck.model, ck.train, key, value)) {
        throw ModelError("unknown config key '" + std::string(key) + "'");
      }
    }
    ck.stage = ck.train.stage;
    ck.vocab = Vocab::parse(read_member(dir, "vocab.txt"));
    ck.schema_config = read_member(dir, "schema.txt");
    const Schema schema = ck.schema();
    std::string stored(trim(read_member(dir, "fingerprint.txt")));
    if (!stored.empty() && stored.back() == '\n') stored.pop_back();
    if (std::string(trim(stored)) != schema.fingerprint_hex()) {
      throw ModelError("checkpoint " + dir + " fingerprint does not match its schema");
    }
    ck.params = parse_params(read_member(dir, "params.txt"));
    ck.log = parse_train_log(read_member(dir, "train_log.tsv"));
  } catch (const ModelError&) {
    throw;
  } catch (const Error& e) {
    throw ModelError("corrupt checkpoint " + dir + ": " + e.what());
  }
  return ck;
}

void check_compatible(const Checkpoint& ck, const Schema& schema, Stage stage) {
  if (ck.stage != stage) {
    throw MismatchError("checkpoint is for stage " + std::string(stage_name(ck.stage)) +
                        ", expected " + std::string(stage_name(stage)));
  }
  if (ck.fingerprint_hex() != schema.fingerprint_hex()) {
    throw MismatchError("schema fingerprint mismatch: checkpoint " + ck.fingerprint_hex() +
                        ", schema " + schema.fingerprint_hex());
  }
}

EntityTagger make_tagger(const Checkpoint& ck) {
  EntityTagger model(ck.schema(), ck.model.tagger(), ck.vocab, ck.params);
  attach_vectors(model, ck.model);
  return model;
}

ModalityClassifier make_modality_classifier(const Checkpoint& ck) {
  ModalityClassifier model(ck.schema(), ck.model.modality(), ck.vocab, ck.params);
  attach_vectors(model, ck.model);
  return model;
}

RelationExtractor make_relation_extractor(const Checkpoint& ck) {
  RelationExtractor model(ck.schema(), ck.model.relation(), ck.vocab, ck.params);
  attach_vectors(model, ck.model);
  return model;
}

}  // namespace clinie
