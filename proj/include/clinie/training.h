// Stage-wise training on gold upstream inputs, patient-grouped folds and
// data-budget subsetting.

#ifndef CLINIE_TRAINING_H_
#define CLINIE_TRAINING_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "clinie/checkpoint.h"
#include "clinie/evaluation.h"

namespace clinie {

struct FoldSplit {
  Corpus train;
  Corpus dev;
  Corpus test;
};

struct FoldPlan {
  int k = 5;
  double dev_fraction = 0.10;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> folds;  // document ids, corpus order

  // Test = fold i; the remaining documents are split patient-wise into
  // train and dev.
  FoldSplit split(const Corpus& corpus, int fold) const;
};

// Patient-disjoint folds balanced by document count: patient groups are
// placed largest first (seeded tie order) into the currently smallest fold.
// Throws ValidationError if k < 2 or there are fewer patients than folds.
FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed, double dev_fraction = 0.10);

// Patient-grouped split: whole patients (seeded order) move to dev until it
// holds at least fraction x documents. Returns {train, dev}.
std::pair<Corpus, Corpus> split_dev(const Corpus& corpus, double fraction, std::uint64_t seed);

// Patient-grouped random subset whose relation count lands within 5% of
// fraction x total when achievable. Document order is preserved.
Corpus subset_train(const Corpus& corpus, double fraction, std::uint64_t seed);

// Stage predictions from gold upstream inputs: MER tags raw text, MC relabels
// gold entities, RE links gold entities with gold modalities.
Corpus predict_from_gold(const Checkpoint& checkpoint, const Corpus& gold);
// Stage micro-F1 of predict_from_gold against gold.
double stage_f1(Stage stage, const Corpus& pred, const Corpus& gold);

// Trains one stage and returns the checkpoint with the best dev micro-F1.
// The initialization counts as epoch 0 and is kept unless a later epoch is
// strictly better. Training stops early after `patience` epochs without
// improvement or once dev F1 reaches 1. With an empty dev corpus the last
// epoch is returned.
// Throws TrainingError on an empty training corpus or a non-finite loss.
Checkpoint train_stage(const Corpus& train, const Corpus& dev, const Schema& schema,
                       const ModelConfig& model, const TrainConfig& config,
                       std::ostream* progress = nullptr);

}  // namespace clinie

#endif  // CLINIE_TRAINING_H_
