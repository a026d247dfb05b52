#include "clinie/training.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "clinie/errors.h"
#include "clinie/optimizer.h"

namespace clinie {

namespace {

struct PatientGroup {
  std::string patient;
  std::vector<int> docs;  // corpus indices
};

// Groups in first-appearance order.
std::vector<PatientGroup> group_by_patient(const Corpus& corpus) {
  std::vector<PatientGroup> groups;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const auto& p = corpus.documents[i].patient_id;
    auto [it, inserted] = index.emplace(p, groups.size());
    if (inserted) groups.push_back({p, {}});
    groups[it->second].docs.push_back(static_cast<int>(i));
  }
  return groups;
}

Corpus select(const Corpus& corpus, const std::set<int>& indices) {
  Corpus out;
  for (int i : indices) out.documents.push_back(corpus.documents[i]);
  return out;
}

void shuffle_groups(std::vector<PatientGroup>& groups, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = groups.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(groups[i - 1], groups[pick(rng)]);
  }
}

ad::Var stage_loss(EntityTagger& m, ad::Tape& tape, const Document& d) { return m.loss(tape, d); }
ad::Var stage_loss(ModalityClassifier& m, ad::Tape& tape, const Document& d) {
  return m.loss(tape, d);
}
ad::Var stage_loss(RelationExtractor& m, ad::Tape& tape, const Document& d) {
  return m.loss(tape, d).loss;
}

Corpus stage_predict(const EntityTagger& m, const Corpus& gold) {
  Corpus out;
  for (const auto& d : gold.documents) out.documents.push_back(m.annotate(d.unannotated()));
  return out;
}
Corpus stage_predict(const ModalityClassifier& m, const Corpus& gold) {
  Corpus out;
  for (const auto& d : gold.documents) {
    Document in = d;
    in.relations.clear();
    out.documents.push_back(m.annotate(in));
  }
  return out;
}
Corpus stage_predict(const RelationExtractor& m, const Corpus& gold) {
  Corpus out;
  for (const auto& d : gold.documents) out.documents.push_back(m.annotate(d));
  return out;
}

// Fisher-Yates with an explicit distribution so the order does not depend
// on the standard library's shuffle implementation.
void shuffle_indices(std::vector<int>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

template <typename Model>
Checkpoint run(Model& model, Stage stage, const Corpus& train, const Corpus& dev,
               const Schema& schema, const ModelConfig& mc, const TrainConfig& tc,
               std::ostream* progress) {
  Checkpoint ck;
  ck.stage = stage;
  ck.model = mc;
  ck.train = tc;
  ck.vocab = model.vocab();
  ck.schema_config = schema.to_config();

  ad::ParamSet& params = model.params();
  AdamW optimizer(params, {tc.learning_rate, 0.9, 0.999, 1e-8, tc.weight_decay});
  std::mt19937_64 order_rng(tc.seed * 0x9E3779B97F4A7C15ULL + 1);
  std::mt19937_64 dropout_rng(tc.seed * 0x9E3779B97F4A7C15ULL + 2);

  const bool have_dev = !dev.empty();
  double best = have_dev ? stage_f1(stage, stage_predict(model, dev), dev) : 0.0;
  ck.initial_dev_f1 = best;
  ad::ParamSet best_params = params;
  int best_epoch = 0;
  if (progress) *progress << stage_name(stage) << " epoch 0 dev_f1 " << best << '\n';

  std::vector<int> order(train.documents.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    shuffle_indices(order, order_rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(tc.batch_size));
      params.zero_grad();
      for (std::size_t i = b; i < e; ++i) {
        ad::Tape tape(true, &dropout_rng);
        ad::Var loss = stage_loss(model, tape, train.documents[order[i]]);
        const double value = loss.scalar();
        if (!std::isfinite(value)) {
          throw TrainingError("non-finite loss on document " + train.documents[order[i]].doc_id);
        }
        total += value;
        if (tape.requires_grad(loss.id)) tape.backward(loss);
      }
      params.scale_grad(1.0 / static_cast<double>(e - b));
      const double norm = clip_grad_norm(params, tc.clip_norm);
      if (!std::isfinite(norm)) throw TrainingError("gradient is not finite");
      optimizer.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(order.size());
    rec.dev_f1 = have_dev ? stage_f1(stage, stage_predict(model, dev), dev) : 0.0;
    ck.log.push_back(rec);
    if (progress) {
      *progress << stage_name(stage) << " epoch " << epoch << " loss " << rec.train_loss
                << " dev_f1 " << rec.dev_f1 << '\n';
    }
    if (!have_dev || rec.dev_f1 > best) {
      best = rec.dev_f1;
      best_epoch = epoch;
      best_params.assign_values(params);
    }
    if (have_dev && tc.patience > 0 && epoch - best_epoch >= tc.patience) break;
    if (have_dev && best >= 1.0) break;
  }
  ck.params = std::move(best_params);
  ck.best_epoch = best_epoch;
  ck.best_dev_f1 = best;
  return ck;
}

}  // namespace

FoldSplit FoldPlan::split(const Corpus& corpus, int fold) const {
  if (fold < 0 || fold >= static_cast<int>(folds.size())) {
    throw ValidationError("fold index " + std::to_string(fold) + " out of range");
  }
  const std::set<std::string> test_ids(folds[fold].begin(), folds[fold].end());
  FoldSplit out;
  Corpus pool;
  for (const auto& d : corpus.documents) {
    (test_ids.count(d.doc_id) ? out.test : pool).documents.push_back(d);
  }
  auto [train, dev] = split_dev(pool, dev_fraction, seed + 1000003ULL * (fold + 1));
  out.train = std::move(train);
  out.dev = std::move(dev);
  return out;
}

FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed, double dev_fraction) {
  if (k < 2) throw ValidationError("need at least 2 folds");
  if (!(dev_fraction >= 0.0 && dev_fraction < 1.0)) {
    throw ValidationError("dev fraction must be in [0, 1)");
  }
  auto groups = group_by_patient(corpus);
  if (static_cast<int>(groups.size()) < k) {
    throw ValidationError("corpus has " + std::to_string(groups.size()) + " patients, fewer than " +
                          std::to_string(k) + " folds");
  }
  shuffle_groups(groups, seed);
  std::stable_sort(groups.begin(), groups.end(), [](const PatientGroup& a, const PatientGroup& b) {
    return a.docs.size() > b.docs.size();
  });
  std::vector<std::set<int>> members(k);
  std::vector<std::size_t> sizes(k, 0);
  for (const auto& g : groups) {
    const int f = static_cast<int>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
    sizes[f] += g.docs.size();
    members[f].insert(g.docs.begin(), g.docs.end());
  }
  FoldPlan plan;
  plan.k = k;
  plan.dev_fraction = dev_fraction;
  plan.seed = seed;
  for (const auto& m : members) {
    std::vector<std::string> ids;
    for (int i : m) ids.push_back(corpus.documents[i].doc_id);
    plan.folds.push_back(std::move(ids));
  }
  return plan;
}

std::pair<Corpus, Corpus> split_dev(const Corpus& corpus, double fraction, std::uint64_t seed) {
  auto groups = group_by_patient(corpus);
  shuffle_groups(groups, seed);
  const double target = fraction * static_cast<double>(corpus.size());
  std::set<int> dev;
  // Always leave at least one patient for training.
  for (std::size_t g = 0; g + 1 < groups.size() && static_cast<double>(dev.size()) < target; ++g) {
    dev.insert(groups[g].docs.begin(), groups[g].docs.end());
  }
  std::set<int> train;
  for (int i = 0; i < static_cast<int>(corpus.size()); ++i)
    if (!dev.count(i)) train.insert(i);
  return {select(corpus, train), select(corpus, dev)};
}

Corpus subset_train(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("subset fraction must be in (0, 1]");
  }
  if (fraction == 1.0) return corpus;
  auto groups = group_by_patient(corpus);
  shuffle_groups(groups, seed);
  long total = 0;
  for (const auto& d : corpus.documents) total += static_cast<long>(d.relations.size());
  const double target = fraction * static_cast<double>(total);
  const double upper = 1.05 * target;
  std::set<int> chosen;
  double count = 0.0;
  for (const auto& g : groups) {
    if (count >= target) break;
    long r = 0;
    for (int i : g.docs) r += static_cast<long>(corpus.documents[i].relations.size());
    if (count + static_cast<double>(r) > upper) continue;
    count += static_cast<double>(r);
    chosen.insert(g.docs.begin(), g.docs.end());
  }
  return select(corpus, chosen);
}

double stage_f1(Stage stage, const Corpus& pred, const Corpus& gold) {
  switch (stage) {
    case Stage::kMer: return eval_mer(pred, gold).f1();
    case Stage::kMc: return eval_mc(pred, gold).f1();
    case Stage::kRe: return eval_re(pred, gold).f1();
  }
  return 0.0;
}

Corpus predict_from_gold(const Checkpoint& ck, const Corpus& gold) {
  switch (ck.stage) {
    case Stage::kMer: return stage_predict(make_tagger(ck), gold);
    case Stage::kMc: return stage_predict(make_modality_classifier(ck), gold);
    case Stage::kRe: return stage_predict(make_relation_extractor(ck), gold);
  }
  return {};
}

Checkpoint train_stage(const Corpus& train, const Corpus& dev, const Schema& schema,
                       const ModelConfig& model, const TrainConfig& config, std::ostream* progress) {
  model.validate();
  config.validate();
  if (train.empty()) throw TrainingError("training corpus is empty");
  Vocab vocab = build_vocab(train, model.min_freq);
  std::shared_ptr<const PrecomputedVectors> vectors;
  if (model.encoder.kind == EncoderKind::kPrecomputed) {
    vectors = PrecomputedVectors::load(model.encoder.vectors_path);
  }
  switch (config.stage) {
    case Stage::kMer: {
      EntityTagger m(schema, model.tagger(), std::move(vocab), config.seed);
      if (vectors) m.encoder().set_vectors(vectors);
      return run(m, config.stage, train, dev, schema, model, config, progress);
    }
    case Stage::kMc: {
      ModalityClassifier m(schema, model.modality(), std::move(vocab), config.seed);
      if (vectors) m.encoder().set_vectors(vectors);
      return run(m, config.stage, train, dev, schema, model, config, progress);
    }
    case Stage::kRe: {
      RelationExtractor m(schema, model.relation(), std::move(vocab), config.seed);
      if (vectors) m.encoder().set_vectors(vectors);
      long unreachable = 0;
      for (const auto& d : train.documents) {
        for (const auto& r : d.relations) {
          const Entity* s = d.find_entity(r.source_id);
          const Entity* t = d.find_entity(r.target_id);
          if (s && t && std::abs(s->span.start - t->span.start) > model.window) ++unreachable;
        }
      }
      if (progress && unreachable) {
        *progress << "re: " << unreachable << " gold relations outside the candidate window\n";
      }
      return run(m, config.stage, train, dev, schema, model, config, progress);
    }
  }
  throw TrainingError("unknown stage");
}

}  // namespace clinie
