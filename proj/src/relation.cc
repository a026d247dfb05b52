#include "clinie/relation.h"

#include <cmath>
#include <cstdlib>
#include <map>

#include "clinie/errors.h"
#include "clinie/instrumentation.h"
#include "clinie/modality.h"

namespace clinie {

namespace {

const char* kTypeEmb = "re.type_emb";
const char* kModEmb = "re.mod_emb";
const char* kU = "re.u";
const char* kV = "re.v";
const char* kBh = "re.bh";
const char* kOut = "re.out";
const char* kBout = "re.bout";

Matrix uniform(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

std::vector<CandidatePair> candidate_pairs(const std::vector<Entity>& entities, int window) {
  std::vector<CandidatePair> out;
  const int m = static_cast<int>(entities.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      if (std::abs(entities[i].span.start - entities[j].span.start) > window) continue;
      out.push_back({i, j});
    }
  return out;
}

RelationExtractor::RelationExtractor(Schema schema, RelationConfig config, Vocab vocab,
                                     std::uint64_t seed)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      vocab_(std::move(vocab)),
      encoder_(config_.encoder, "re.enc.") {
  std::mt19937_64 rng(seed);
  encoder_.init_params(params_, vocab_.size(), rng);
  const int types = static_cast<int>(schema_.entity_types().size());
  const int mods = static_cast<int>(schema_.modalities().size());
  params_.add(kTypeEmb, uniform(types, config_.type_dim, 0.1, rng));
  params_.add(kModEmb, uniform(mods, config_.modality_dim, 0.1, rng));
  const int rep = rep_dim(), d = config_.pair_dim, k = num_scores();
  params_.add(kU, uniform(rep, d, std::sqrt(6.0 / (2 * rep + d)), rng));
  params_.add(kV, uniform(rep, d, std::sqrt(6.0 / (2 * rep + d)), rng));
  params_.add(kBh, Matrix(1, d));
  params_.add(kOut, uniform(d, k, std::sqrt(6.0 / (d + k)), rng));
  params_.add(kBout, Matrix(1, k));
}

RelationExtractor::RelationExtractor(Schema schema, RelationConfig config, Vocab vocab,
                                     ad::ParamSet params)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      vocab_(std::move(vocab)),
      encoder_(config_.encoder, "re.enc."),
      params_(std::move(params)) {
  if (params_.get(kBout).value.cols() != num_scores() ||
      params_.get(kModEmb).value.rows() != static_cast<int>(schema_.modalities().size()) ||
      params_.get(kTypeEmb).value.rows() != static_cast<int>(schema_.entity_types().size())) {
    throw ModelError("relation parameters do not match the schema");
  }
}

int RelationExtractor::rep_dim() const {
  return config_.encoder.hidden_dim + config_.type_dim + config_.modality_dim;
}

int RelationExtractor::num_scores() const {
  return static_cast<int>(schema_.relations().size()) + 1;
}

Matrix RelationExtractor::hidden(const Document& doc) const {
  return encoder_.encode(params_, make_encode_input(doc, vocab_));
}

std::vector<double> RelationExtractor::entity_rep(const Matrix& h, const Entity& entity) const {
  std::vector<double> rep = entity_embedding(h, entity.span);
  const Matrix& types = params_.get(kTypeEmb).value;
  const Matrix& mods = params_.get(kModEmb).value;
  auto t = types.row(schema_.entity_index(entity.type));
  auto m = mods.row(schema_.modality_index(entity.modality));
  rep.insert(rep.end(), t.begin(), t.end());
  rep.insert(rep.end(), m.begin(), m.end());
  return rep;
}

ad::Var RelationExtractor::entity_reps(ad::Tape& tape, ad::Var hidden,
                                       const std::vector<Entity>& entities) {
  std::vector<ad::Var> sums;
  std::vector<int> types, mods;
  for (const auto& e : entities) {
    sums.push_back(entity_embedding(hidden, e.span));
    types.push_back(schema_.entity_index(e.type));
    mods.push_back(schema_.modality_index(e.modality));
  }
  ad::Var parts[] = {ad::concat_rows(sums), ad::embedding(tape, params_.get(kTypeEmb), types),
                     ad::embedding(tape, params_.get(kModEmb), mods)};
  return ad::concat_cols(parts);
}

std::vector<double> RelationExtractor::pair_probabilities(std::span<const double> rep_i,
                                                          std::span<const double> rep_j) const {
  const Matrix& u = params_.get(kU).value;
  const Matrix& v = params_.get(kV).value;
  const Matrix& bh = params_.get(kBh).value;
  const Matrix& out = params_.get(kOut).value;
  const Matrix& bout = params_.get(kBout).value;
  if (static_cast<int>(rep_i.size()) != u.rows() || static_cast<int>(rep_j.size()) != v.rows()) {
    throw ModelError("entity representation has the wrong dimension");
  }
  std::vector<double> hidden(u.cols());
  for (int c = 0; c < u.cols(); ++c) {
    double s = bh(0, c);
    for (int r = 0; r < u.rows(); ++r) s += rep_i[r] * u(r, c) + rep_j[r] * v(r, c);
    hidden[c] = std::tanh(s);
  }
  std::vector<double> probs(num_scores() - 1);
  for (int k = 0; k < num_scores() - 1; ++k) {
    double s = bout(0, k);
    for (int c = 0; c < out.rows(); ++c) s += hidden[c] * out(c, k);
    probs[k] = sigmoid(s);
  }
  return probs;
}

ad::Var RelationExtractor::pair_logits(ad::Tape& tape, ad::Var reps,
                                       const std::vector<CandidatePair>& pairs) {
  std::vector<int> src, tgt;
  for (const auto& p : pairs) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  ad::Var from_src = ad::gather_rows(ad::matmul(reps, ad::param(tape, params_.get(kU))), src);
  ad::Var from_tgt = ad::gather_rows(ad::matmul(reps, ad::param(tape, params_.get(kV))), tgt);
  ad::Var hidden = ad::tanh(ad::add_row(ad::add(from_src, from_tgt), ad::param(tape, params_.get(kBh))));
  return ad::add_row(ad::matmul(hidden, ad::param(tape, params_.get(kOut))),
                     ad::param(tape, params_.get(kBout)));
}

RelationLoss RelationExtractor::loss(ad::Tape& tape, const Document& gold) {
  RelationLoss result;
  auto pairs = candidate_pairs(gold.entities, config_.window);
  std::map<std::pair<int, int>, int> pair_index;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    pair_index[{gold.entities[pairs[p].source].id, gold.entities[pairs[p].target].id}] =
        static_cast<int>(p);
  }
  const int k = num_scores();
  Matrix targets(static_cast<int>(pairs.size()), k);
  for (const auto& r : gold.relations) {
    auto it = pair_index.find({r.source_id, r.target_id});
    if (it == pair_index.end()) {
      ++result.unreachable;
      continue;
    }
    targets(it->second, schema_.relation_index(r.type)) = 1.0;
  }
  for (int p = 0; p < targets.rows(); ++p) {
    bool any = false;
    for (int c = 0; c + 1 < k; ++c) any = any || targets(p, c) > 0.0;
    if (!any) targets(p, k - 1) = 1.0;
  }
  result.pairs = static_cast<int>(pairs.size());
  if (pairs.empty()) {
    result.loss = ad::constant(tape, Matrix(1, 1));
    return result;
  }
  ad::Var h = encoder_.encode(tape, params_, make_encode_input(gold, vocab_));
  ad::Var reps = entity_reps(tape, h, gold.entities);
  result.loss = ad::bce_with_logits(pair_logits(tape, reps, pairs), targets);
  return result;
}

std::vector<Relation> RelationExtractor::decode_relations(const std::vector<Entity>& entities,
                                                          const Matrix& hidden, double threshold,
                                                          bool schema_filter) const {
  std::vector<std::vector<double>> reps;
  for (const auto& e : entities) reps.push_back(entity_rep(hidden, e));
  std::vector<Relation> out;
  for (const auto& p : candidate_pairs(entities, config_.window)) {
    const Entity& src = entities[p.source];
    const Entity& tgt = entities[p.target];
    auto probs = pair_probabilities(reps[p.source], reps[p.target]);
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (!(probs[k] > threshold)) continue;
      const auto& info = schema_.relations()[k];
      if (schema_filter && !schema_.validate_relation(info.code, src.type, tgt.type,
                                                      ValidationMode::kStrict).ok()) {
        continue;
      }
      out.push_back({src.id, tgt.id, info.code, info.category});
    }
  }
  return out;
}

Document RelationExtractor::annotate(const Document& doc) const {
  ++prediction_counters().relation_predictions;
  Document out = doc;
  out.relations.clear();
  if (doc.entities.size() >= 2) {
    out.relations = decode_relations(doc.entities, hidden(doc), config_.threshold,
                                     config_.schema_filter);
  }
  canonicalize(out, schema_);
  return out;
}

}  // namespace clinie
