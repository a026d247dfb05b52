// Stage identifiers, model/training configuration and the checkpoint
// directory bundle:
//   config.txt      key=value model and training settings
//   vocab.txt       token vocabulary
//   schema.txt      schema configuration the model was trained against
//   fingerprint.txt schema fingerprint (hex)
//   params.txt      parameters, hexadecimal floats (bit-exact)
//   train_log.tsv   per-epoch loss and dev F1

#ifndef CLINIE_CHECKPOINT_H_
#define CLINIE_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "clinie/entity_tagger.h"
#include "clinie/modality.h"
#include "clinie/relation.h"

namespace clinie {

enum class Stage { kMer, kMc, kRe };

std::string_view stage_name(Stage stage);  // "mer" / "mc" / "re"
Stage parse_stage(std::string_view name);

struct ModelConfig {
  EncoderConfig encoder;
  int min_freq = 1;
  bool use_crf = true;
  int type_dim = 16;
  int modality_dim = 8;
  int pair_dim = 32;
  double threshold = 0.5;
  int window = 128;
  bool schema_filter = true;

  TaggerConfig tagger() const { return {encoder, use_crf}; }
  ModalityConfig modality() const { return {encoder, type_dim}; }
  RelationConfig relation() const {
    return {encoder, type_dim, modality_dim, pair_dim, threshold, window, schema_filter};
  }
  void validate() const;
};

struct TrainConfig {
  Stage stage = Stage::kMer;
  int epochs = 200;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 13;
  int patience = 10;  // epochs without dev improvement before stopping; 0 disables
  double clip_norm = 5.0;

  static TrainConfig desk(Stage stage);
  static TrainConfig paper(Stage stage);
  void validate() const;
};

// Applies one key=value setting. Returns false for unknown keys; throws
// ValidationError for malformed values.
bool set_option(ModelConfig& model, TrainConfig& train, std::string_view key,
                std::string_view value);
std::string format_options(const ModelConfig& model, const TrainConfig& train);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct Checkpoint {
  Stage stage = Stage::kMer;
  ModelConfig model;
  TrainConfig train;
  Vocab vocab;
  std::string schema_config;
  ad::ParamSet params;
  std::vector<EpochRecord> log;
  double initial_dev_f1 = 0.0;  // dev F1 of the initialization (epoch 0)
  int best_epoch = 0;
  double best_dev_f1 = 0.0;

  Schema schema() const { return Schema::parse(schema_config); }
  std::string fingerprint_hex() const { return schema().fingerprint_hex(); }
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& dir);
// Throws ModelError for a missing or corrupt bundle.
Checkpoint load_checkpoint(const std::string& dir);
// Throws MismatchError if the checkpoint was trained against another schema
// or for another stage.
void check_compatible(const Checkpoint& checkpoint, const Schema& schema, Stage stage);

// Models rebuilt from a checkpoint; precomputed vectors are loaded from the
// configured path.
EntityTagger make_tagger(const Checkpoint& checkpoint);
ModalityClassifier make_modality_classifier(const Checkpoint& checkpoint);
RelationExtractor make_relation_extractor(const Checkpoint& checkpoint);

std::string format_params(const ad::ParamSet& params);
ad::ParamSet parse_params(std::string_view text);
std::string format_train_log(const std::vector<EpochRecord>& log);
std::vector<EpochRecord> parse_train_log(std::string_view text);

}  // namespace clinie

#endif  // CLINIE_CHECKPOINT_H_
