// Relation extraction by multi-head selection: every entity E_i scores every
// candidate head E_j for every relation type r_k independently,
//   P(E_j, r_k | E_i) = sigmoid(s_k(rep_i, rep_j)),
// where rep = [span sum; type embedding; modality embedding] and
//   s(rep_i, rep_j) = tanh(rep_i U + rep_j V + b_h) R + b_r.
// The score vector has one extra slot for the no-relation outcome N, which
// is trained but never decoded.

#ifndef CLINIE_RELATION_H_
#define CLINIE_RELATION_H_

#include <cstdint>
#include <span>
#include <vector>

#include "clinie/encoder.h"

namespace clinie {

struct RelationConfig {
  EncoderConfig encoder;
  int type_dim = 16;
  int modality_dim = 8;
  int pair_dim = 32;
  double threshold = 0.5;  // emit iff P > threshold
  int window = 128;        // max |start_i - start_j| in tokens
  bool schema_filter = true;
};

struct CandidatePair {
  int source = 0;  // indices into the entity list
  int target = 0;
  bool operator==(const CandidatePair&) const = default;
};

// Ordered pairs (i, j), i != j, whose span starts are at most `window`
// tokens apart, in (i, j) lexicographic order.
std::vector<CandidatePair> candidate_pairs(const std::vector<Entity>& entities, int window);

struct RelationLoss {
  ad::Var loss;
  int pairs = 0;
  int unreachable = 0;  // gold relations outside the candidate window
};

class RelationExtractor {
 public:
  RelationExtractor(Schema schema, RelationConfig config, Vocab vocab, std::uint64_t seed);
  RelationExtractor(Schema schema, RelationConfig config, Vocab vocab, ad::ParamSet params);

  const Schema& schema() const { return schema_; }
  const RelationConfig& config() const { return config_; }
  RelationConfig& mutable_config() { return config_; }
  const Vocab& vocab() const { return vocab_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  Encoder& encoder() { return encoder_; }

  int rep_dim() const;
  int num_scores() const;  // relation types + 1

  Matrix hidden(const Document& doc) const;

  std::vector<double> entity_rep(const Matrix& hidden, const Entity& entity) const;
  ad::Var entity_reps(ad::Tape& tape, ad::Var hidden, const std::vector<Entity>& entities);

  // One probability per schema relation type (the N slot is dropped).
  std::vector<double> pair_probabilities(std::span<const double> rep_i,
                                         std::span<const double> rep_j) const;
  // pairs x (|R| + 1) raw scores.
  ad::Var pair_logits(ad::Tape& tape, ad::Var reps, const std::vector<CandidatePair>& pairs);

  // Mean binary cross-entropy over every (pair, slot) target.
  RelationLoss loss(ad::Tape& tape, const Document& gold);

  std::vector<Relation> decode_relations(const std::vector<Entity>& entities, const Matrix& hidden,
                                         double threshold, bool schema_filter) const;
  // Copy of `doc` with relations replaced by predictions, using the
  // configured threshold, window and filter.
  Document annotate(const Document& doc) const;

 private:
  Schema schema_;
  RelationConfig config_;
  Vocab vocab_;
  Encoder encoder_;
  ad::ParamSet params_;
};

}  // namespace clinie

#endif  // CLINIE_RELATION_H_
