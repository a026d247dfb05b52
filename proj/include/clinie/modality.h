// Modality classification: softmax(W [sum of span rows; type embedding] + b).

#ifndef CLINIE_MODALITY_H_
#define CLINIE_MODALITY_H_

#include <cstdint>
#include <span>
#include <vector>

#include "clinie/encoder.h"

namespace clinie {

struct ModalityConfig {
  EncoderConfig encoder;
  int type_dim = 16;
};

// Element-wise sum of the hidden rows in [span.start, span.end).
std::vector<double> entity_embedding(const Matrix& hidden, TokenSpan span);
ad::Var entity_embedding(ad::Var hidden, TokenSpan span);

// -log probs[gold].
double modality_nll(std::span<const double> probs, int gold);

class ModalityClassifier {
 public:
  ModalityClassifier(Schema schema, ModalityConfig config, Vocab vocab, std::uint64_t seed);
  ModalityClassifier(Schema schema, ModalityConfig config, Vocab vocab, ad::ParamSet params);

  const Schema& schema() const { return schema_; }
  const ModalityConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  Encoder& encoder() { return encoder_; }

  Matrix hidden(const Document& doc) const;

  // Probability over the schema's modalities, in schema order.
  std::vector<double> classify(std::span<const double> entity_embedding,
                               std::string_view entity_type) const;
  ad::Var logits(ad::Tape& tape, ad::Var entity_embeddings, std::span<const int> type_ids);

  // Summed cross-entropy over the gold entities of one document.
  ad::Var loss(ad::Tape& tape, const Document& gold);

  // Copy of `doc` with every entity's modality replaced by the prediction.
  Document annotate(const Document& doc) const;

 private:
  Schema schema_;
  ModalityConfig config_;
  Vocab vocab_;
  Encoder encoder_;
  ad::ParamSet params_;
};

}  // namespace clinie

#endif  // CLINIE_MODALITY_H_
