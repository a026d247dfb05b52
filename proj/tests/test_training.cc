#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "clinie/errors.h"
#include "clinie/instrumentation.h"
#include "clinie/optimizer.h"
#include "clinie/synth.h"
#include "clinie/training.h"
#include "fixtures.h"

using namespace clinie;

namespace {

const Schema& schema() { return Schema::default_schema(); }

Corpus synthetic(int docs, int patients, std::uint64_t seed) {
  GenConfig cfg;
  cfg.n_documents = docs;
  cfg.patients = patients;
  cfg.seed = seed;
  return generate(cfg).corpus;
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.encoder.embed_dim = 8;
  m.encoder.hidden_dim = 8;
  m.type_dim = 4;
  m.modality_dim = 4;
  m.pair_dim = 8;
  return m;
}

long relation_count(const Corpus& c) {
  long n = 0;
  for (const auto& d : c.documents) n += static_cast<long>(d.relations.size());
  return n;
}

std::string tmp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(CLINIE_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("folds keep patients together and balance documents") {
  const Corpus c = synthetic(120, 17, 3);
  std::map<std::string, std::string> patient_of;
  for (const auto& d : c.documents) patient_of[d.doc_id] = d.patient_id;
  std::map<std::string, int> docs_per_patient;
  for (const auto& d : c.documents) ++docs_per_patient[d.patient_id];
  int largest = 0;
  for (const auto& [_, n] : docs_per_patient) largest = std::max(largest, n);

  const FoldPlan plan = make_folds(c, 5, 9);
  REQUIRE(plan.folds.size() == 5);
  std::map<std::string, int> fold_of_patient;
  std::set<std::string> seen;
  std::size_t lo = c.size(), hi = 0;
  for (int f = 0; f < 5; ++f) {
    lo = std::min(lo, plan.folds[f].size());
    hi = std::max(hi, plan.folds[f].size());
    for (const auto& id : plan.folds[f]) {
      CHECK(seen.insert(id).second);
      auto [it, inserted] = fold_of_patient.emplace(patient_of[id], f);
      CHECK(it->second == f);
    }
  }
  CHECK(seen.size() == c.size());
  CHECK(hi - lo <= static_cast<std::size_t>(largest));
  CHECK(make_folds(c, 5, 9).folds == plan.folds);

  const FoldSplit s = plan.split(c, 2);
  CHECK(s.train.size() + s.dev.size() + s.test.size() == c.size());
  CHECK(s.dev.size() >= c.size() / 20);
  std::set<std::string> train_patients, dev_patients;
  for (const auto& d : s.train.documents) train_patients.insert(d.patient_id);
  for (const auto& d : s.dev.documents) CHECK_FALSE(train_patients.count(d.patient_id));
}

TEST_CASE("one patient per fold when patients equal folds") {
  const Corpus c = synthetic(20, 5, 4);
  const FoldPlan plan = make_folds(c, 5, 1);
  for (const auto& fold : plan.folds) {
    std::set<std::string> patients;
    for (const auto& id : fold) patients.insert(c.find(id)->patient_id);
    CHECK(patients.size() == 1);
  }
  CHECK_THROWS_AS(make_folds(c, 6, 1), ValidationError);
  CHECK_THROWS_AS(make_folds(c, 1, 1), ValidationError);
}

TEST_CASE("data-budget subsets") {
  const Corpus c = synthetic(300, 40, 5);
  CHECK(subset_train(c, 1.0, 3) == c);
  const Corpus s = subset_train(c, 0.39, 3);
  const double target = 0.39 * static_cast<double>(relation_count(c));
  CHECK(std::abs(relation_count(s) - target) <= 0.05 * target);
  CHECK(subset_train(c, 0.39, 3) == s);
  std::set<std::string> in_subset;
  for (const auto& d : s.documents) in_subset.insert(d.patient_id);
  for (const auto& d : c.documents) {
    if (in_subset.count(d.patient_id)) CHECK(s.find(d.doc_id) != nullptr);
  }
  CHECK_THROWS_AS(subset_train(c, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(subset_train(c, 1.5, 1), ValidationError);
}

TEST_CASE("AdamW and clipping") {
  ad::ParamSet params;
  params.add("w", Matrix(1, 2, 1.0));
  params.get("w").frozen = {0, 1};
  params.get("w").grad(0, 0) = 3.0;
  params.get("w").grad(0, 1) = 4.0;
  CHECK(clip_grad_norm(params, 5.0) == doctest::Approx(3.0));  // frozen entry excluded
  AdamW opt(params, {0.1, 0.9, 0.999, 1e-8, 0.0});
  opt.step(params);
  CHECK(params.get("w").value(0, 0) == doctest::Approx(0.9));
  CHECK(params.get("w").value(0, 1) == 1.0);
  params.get("w").grad(0, 0) = 30.0;
  CHECK(clip_grad_norm(params, 5.0) == doctest::Approx(30.0));
  CHECK(params.get("w").grad(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("zero epochs returns the initialization") {
  const Corpus c = synthetic(6, 2, 6);
  for (Stage stage : {Stage::kMer, Stage::kMc, Stage::kRe}) {
    TrainConfig tc = TrainConfig::desk(stage);
    tc.epochs = 0;
    const Checkpoint ck = train_stage(c, c, schema(), tiny_model(), tc);
    CHECK(ck.best_epoch == 0);
    CHECK(ck.log.empty());
    const Vocab vocab = build_vocab(c, 1);
    ad::ParamSet init;
    if (stage == Stage::kMer) init = EntityTagger(schema(), tiny_model().tagger(), vocab, tc.seed).params();
    if (stage == Stage::kMc) init = ModalityClassifier(schema(), tiny_model().modality(), vocab, tc.seed).params();
    if (stage == Stage::kRe) init = RelationExtractor(schema(), tiny_model().relation(), vocab, tc.seed).params();
    CHECK(ck.params.same_values(init));
  }
  CHECK_THROWS_AS(train_stage(Corpus{}, c, schema(), tiny_model(), TrainConfig::desk(Stage::kMer)),
                  TrainingError);
}

TEST_CASE("single-example overfit") {
  Corpus one;
  one.documents.push_back(fixtures::small_document(31));
  for (Stage stage : {Stage::kMer, Stage::kMc, Stage::kRe}) {
    CAPTURE(stage_name(stage));
    TrainConfig tc = TrainConfig::desk(stage);
    tc.epochs = 400;
    tc.learning_rate = 1e-2;
    tc.batch_size = 1;
    tc.patience = 0;
    ModelConfig m = tiny_model();
    m.pair_dim = 32;
    const Checkpoint ck = train_stage(one, one, schema(), m, tc);
    const Corpus pred = predict_from_gold(ck, one);
    CHECK(stage_f1(stage, pred, one) == 1.0);
    CHECK(ck.best_dev_f1 == 1.0);
  }
}

TEST_CASE("stage training reads gold upstream inputs only") {
  const Corpus c = synthetic(6, 2, 7);
  auto& counters = prediction_counters();
  TrainConfig tc = TrainConfig::desk(Stage::kMc);
  tc.epochs = 2;
  long entity_before = counters.entity_predictions;
  train_stage(c, c, schema(), tiny_model(), tc);
  CHECK(counters.entity_predictions == entity_before);
  tc.stage = Stage::kRe;
  entity_before = counters.entity_predictions;
  const long modality_before = counters.modality_predictions;
  train_stage(c, c, schema(), tiny_model(), tc);
  CHECK(counters.entity_predictions == entity_before);
  CHECK(counters.modality_predictions == modality_before);
}

TEST_CASE("checkpoints round trip bit-exactly and training is deterministic") {
  const Corpus c = synthetic(8, 3, 8);
  TrainConfig tc = TrainConfig::desk(Stage::kRe);
  tc.epochs = 3;
  tc.patience = 0;
  const Checkpoint a = train_stage(c, c, schema(), tiny_model(), tc);
  const Checkpoint b = train_stage(c, c, schema(), tiny_model(), tc);
  CHECK(a.params.same_values(b.params));
  CHECK(a.log == b.log);
  CHECK(a.log.size() == 3);

  const std::string dir = tmp_dir("ckpt_re");
  save_checkpoint(a, dir);
  const Checkpoint back = load_checkpoint(dir);
  CHECK(back.stage == Stage::kRe);
  CHECK(back.params.same_values(a.params));
  CHECK(back.vocab == a.vocab);
  CHECK(back.log == a.log);
  CHECK(back.best_epoch == a.best_epoch);
  CHECK(back.best_dev_f1 == a.best_dev_f1);
  CHECK(back.initial_dev_f1 == a.initial_dev_f1);
  CHECK(a.best_dev_f1 >= a.initial_dev_f1);
  CHECK(format_options(back.model, back.train) == format_options(a.model, a.train));
  CHECK(predict_from_gold(back, c) == predict_from_gold(a, c));
  check_compatible(back, schema(), Stage::kRe);
  CHECK_THROWS_AS(check_compatible(back, schema(), Stage::kMer), MismatchError);
  const Schema other = Schema::parse("entity D\nentity TIMEX3\nmodality positive default\n"
                                     "relation on temporal * -> TIMEX3\n");
  CHECK_THROWS_AS(check_compatible(back, other, Stage::kRe), MismatchError);
  CHECK_THROWS_AS(load_checkpoint(tmp_dir("missing")), ModelError);
}

TEST_CASE("configuration options") {
  ModelConfig m;
  TrainConfig t;
  CHECK(set_option(m, t, "hidden_dim", "16"));
  CHECK(m.encoder.hidden_dim == 16);
  CHECK(set_option(m, t, "profile", "paper"));
  CHECK(t.epochs == 10);
  CHECK(t.batch_size == 16);
  CHECK(t.learning_rate == 5e-5);
  CHECK_FALSE(set_option(m, t, "colour", "red"));
  CHECK_THROWS_AS(set_option(m, t, "epochs", "many"), ValidationError);
  CHECK(TrainConfig::desk(Stage::kMer).epochs == 200);
  CHECK(TrainConfig::desk(Stage::kMer).batch_size == 8);
  CHECK(TrainConfig::desk(Stage::kMer).learning_rate == 1e-3);
}
