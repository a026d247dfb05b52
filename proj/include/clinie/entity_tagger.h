// Entity recognition: encoder -> affine emissions -> CRF over BIO tags,
// applied line by line. The CRF can be switched off for a per-token softmax.

#ifndef CLINIE_ENTITY_TAGGER_H_
#define CLINIE_ENTITY_TAGGER_H_

#include <cstdint>

#include "clinie/crf.h"
#include "clinie/encoder.h"

namespace clinie {

struct TaggerConfig {
  EncoderConfig encoder;
  bool use_crf = true;
};

class EntityTagger {
 public:
  EntityTagger(Schema schema, TaggerConfig config, Vocab vocab, std::uint64_t seed);
  EntityTagger(Schema schema, TaggerConfig config, Vocab vocab, ad::ParamSet params);

  const Schema& schema() const { return schema_; }
  const TaggerConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const BioTagset& tagset() const { return tagset_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  Encoder& encoder() { return encoder_; }

  // n x T scores for the whole document.
  ad::Var emission_scores(ad::Tape& tape, const Document& doc);
  Matrix emission_scores(const Document& doc) const;

  // Summed CRF negative log-likelihood (or token cross-entropy) of the gold
  // entities over every line. Zero for documents without tokens.
  ad::Var loss(ad::Tape& tape, const Document& gold);

  // Predicted tag per document token.
  std::vector<int> decode(const Document& doc) const;
  // Copy of `doc` whose entities are the predictions: ids 1.. in reading
  // order, default modality, no relations.
  Document annotate(const Document& doc) const;

 private:
  void init_mask();

  Schema schema_;
  TaggerConfig config_;
  Vocab vocab_;
  BioTagset tagset_;
  Encoder encoder_;
  ad::ParamSet params_;
};

}  // namespace clinie

#endif  // CLINIE_ENTITY_TAGGER_H_
