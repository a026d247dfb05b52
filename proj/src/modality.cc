#include "clinie/modality.h"

#include <algorithm>
#include <cmath>

#include "clinie/errors.h"
#include "clinie/instrumentation.h"

namespace clinie {

namespace {

const char* kTypeEmb = "mc.type_emb";
const char* kW = "mc.w";
const char* kB = "mc.b";

}  // namespace

std::vector<double> entity_embedding(const Matrix& hidden, TokenSpan span) {
  if (span.start < 0 || span.end > hidden.rows() || span.start >= span.end) {
    throw ModelError("entity span is empty or outside the hidden matrix");
  }
  std::vector<double> out(hidden.cols(), 0.0);
  for (int r = span.start; r < span.end; ++r)
    for (int c = 0; c < hidden.cols(); ++c) out[c] += hidden(r, c);
  return out;
}

ad::Var entity_embedding(ad::Var hidden, TokenSpan span) {
  if (span.start < 0 || span.end > hidden.rows() || span.start >= span.end) {
    throw ModelError("entity span is empty or outside the hidden matrix");
  }
  return ad::sum_rows(hidden, span.start, span.end);
}

double modality_nll(std::span<const double> probs, int gold) {
  if (gold < 0 || gold >= static_cast<int>(probs.size())) throw ModelError("gold modality out of range");
  return -std::log(probs[gold]);
}

ModalityClassifier::ModalityClassifier(Schema schema, ModalityConfig config, Vocab vocab,
                                       std::uint64_t seed)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      vocab_(std::move(vocab)),
      encoder_(config_.encoder, "mc.enc.") {
  std::mt19937_64 rng(seed);
  encoder_.init_params(params_, vocab_.size(), rng);
  const int types = static_cast<int>(schema_.entity_types().size());
  const int m = static_cast<int>(schema_.modalities().size());
  const int in = config_.encoder.hidden_dim + config_.type_dim;
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  Matrix emb(types, config_.type_dim);
  for (double& v : emb.data()) v = small(rng);
  params_.add(kTypeEmb, std::move(emb));
  std::uniform_real_distribution<double> glorot(-std::sqrt(6.0 / (in + m)), std::sqrt(6.0 / (in + m)));
  Matrix w(in, m);
  for (double& v : w.data()) v = glorot(rng);
  params_.add(kW, std::move(w));
  params_.add(kB, Matrix(1, m));
}

ModalityClassifier::ModalityClassifier(Schema schema, ModalityConfig config, Vocab vocab,
                                       ad::ParamSet params)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      vocab_(std::move(vocab)),
      encoder_(config_.encoder, "mc.enc."),
      params_(std::move(params)) {
  if (params_.get(kB).value.cols() != static_cast<int>(schema_.modalities().size()) ||
      params_.get(kTypeEmb).value.rows() != static_cast<int>(schema_.entity_types().size())) {
    throw ModelError("modality parameters do not match the schema");
  }
}

Matrix ModalityClassifier::hidden(const Document& doc) const {
  return encoder_.encode(params_, make_encode_input(doc, vocab_));
}

std::vector<double> ModalityClassifier::classify(std::span<const double> embedding,
                                                 std::string_view entity_type) const {
  const Matrix& w = params_.get(kW).value;
  const Matrix& b = params_.get(kB).value;
  const Matrix& types = params_.get(kTypeEmb).value;
  const int type = schema_.entity_index(entity_type);
  if (static_cast<int>(embedding.size()) + types.cols() != w.rows()) {
    throw ModelError("entity embedding has the wrong dimension");
  }
  std::vector<double> features(embedding.begin(), embedding.end());
  for (int c = 0; c < types.cols(); ++c) features.push_back(types(type, c));
  std::vector<double> logits(w.cols());
  for (int k = 0; k < w.cols(); ++k) {
    double s = b(0, k);
    for (int i = 0; i < w.rows(); ++i) s += features[i] * w(i, k);
    logits[k] = s;
  }
  double lse = log_sum_exp(logits);
  for (double& v : logits) v = std::exp(v - lse);
  return logits;
}

ad::Var ModalityClassifier::logits(ad::Tape& tape, ad::Var entity_embeddings,
                                   std::span<const int> type_ids) {
  ad::Var types = ad::embedding(tape, params_.get(kTypeEmb), type_ids);
  ad::Var parts[] = {entity_embeddings, types};
  return ad::add_row(ad::matmul(ad::concat_cols(parts), ad::param(tape, params_.get(kW))),
                     ad::param(tape, params_.get(kB)));
}

ad::Var ModalityClassifier::loss(ad::Tape& tape, const Document& gold) {
  if (gold.entities.empty()) return ad::constant(tape, Matrix(1, 1));
  ad::Var h = encoder_.encode(tape, params_, make_encode_input(gold, vocab_));
  std::vector<ad::Var> rows;
  std::vector<int> types, labels;
  for (const auto& e : gold.entities) {
    rows.push_back(entity_embedding(h, e.span));
    types.push_back(schema_.entity_index(e.type));
    labels.push_back(schema_.modality_index(e.modality));
  }
  return ad::softmax_cross_entropy(logits(tape, ad::concat_rows(rows), types), labels);
}

Document ModalityClassifier::annotate(const Document& doc) const {
  ++prediction_counters().modality_predictions;
  Document out = doc;
  if (out.entities.empty()) return out;
  Matrix h = hidden(doc);
  for (auto& e : out.entities) {
    auto probs = classify(entity_embedding(h, e.span), e.type);
    auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    e.modality = schema_.modalities()[best];
  }
  return out;
}

}  // namespace clinie
