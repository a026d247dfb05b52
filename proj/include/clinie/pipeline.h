// Chained inference (MER -> MC -> RE) and the patient-level cross-validation
// driver that trains each stage on gold inputs and scores the chained
// predictions.

#ifndef CLINIE_PIPELINE_H_
#define CLINIE_PIPELINE_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clinie/training.h"

namespace clinie {

struct Pipeline {
  EntityTagger mer;
  ModalityClassifier mc;
  RelationExtractor re;

  // Runs every stage in order on the text of `doc`; existing annotations
  // are ignored.
  Document annotate(const Document& doc) const;
  Corpus annotate(const Corpus& corpus) const;
};

// Loads three checkpoints and checks each against `schema` and its stage.
Pipeline load_pipeline(const std::string& mer_dir, const std::string& mc_dir,
                       const std::string& re_dir, const Schema& schema);
Pipeline make_pipeline(const Checkpoint& mer, const Checkpoint& mc, const Checkpoint& re);

struct StageSettings {
  ModelConfig model;
  TrainConfig train;
};

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 7;
  double dev_fraction = 0.10;
  StageSettings mer{ModelConfig{}, TrainConfig::desk(Stage::kMer)};
  StageSettings mc{ModelConfig{}, TrainConfig::desk(Stage::kMc)};
  StageSettings re{ModelConfig{}, TrainConfig::desk(Stage::kRe)};
  // When set, the RE training portion of each fold is reduced with
  // subset_train(fraction).
  std::optional<double> re_subset;
};

struct FoldOutcome {
  Checkpoint mer;
  Checkpoint mc;
  Checkpoint re;
  Corpus predictions;  // chained MER -> MC -> RE output on the test fold
  EvalReport report;
};

struct CvResult {
  FoldPlan plan;
  std::vector<FoldOutcome> folds;
  CvReport report;
};

CvResult cross_validate(const Corpus& corpus, const Schema& schema, const CvOptions& options,
                        std::ostream* progress = nullptr);

// Retrains only the relation stage on each fold (optionally on a subset of
// the fold's training documents) and re-runs it over the upstream MER/MC
// predictions of `base`.
CvResult retrain_relations(const Corpus& corpus, const Schema& schema, const CvOptions& options,
                           const CvResult& base, std::ostream* progress = nullptr);

}  // namespace clinie

#endif  // CLINIE_PIPELINE_H_
