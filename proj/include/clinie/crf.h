// Linear-chain CRF over BIO tags.
//
// Transition matrices are (T+2) x (T+2): rows/columns 0..T-1 are tags, T is
// the virtual START state and T+1 the virtual STOP state; trans(i, j) scores
// moving from i to j. A sequence y scores
//   trans(START, y0) + sum_t em(t, y_t) + sum_t trans(y_{t-1}, y_t) + trans(y_n, STOP).

#ifndef CLINIE_CRF_H_
#define CLINIE_CRF_H_

#include <span>
#include <string>
#include <vector>

#include "clinie/autodiff.h"
#include "clinie/document.h"
#include "clinie/matrix.h"
#include "clinie/schema.h"

namespace clinie {

// Score pinned on structurally illegal transitions.
inline constexpr double kIllegalTransition = -1e4;

class BioTagset {
 public:
  explicit BioTagset(const Schema& schema);
  explicit BioTagset(std::vector<std::string> tags);

  int size() const { return static_cast<int>(tags_.size()); }
  int start_state() const { return size(); }
  int stop_state() const { return size() + 1; }
  const std::vector<std::string>& tags() const { return tags_; }
  const std::string& tag(int i) const { return tags_.at(i); }
  int index(std::string_view tag) const;

  bool is_outside(int tag) const { return tag == 0; }
  bool is_begin(int tag) const { return tag > 0 && tags_[tag][0] == 'B'; }
  bool is_inside(int tag) const { return tag > 0 && tags_[tag][0] == 'I'; }
  // Entity type carried by a B-/I- tag; empty for O.
  std::string type_of(int tag) const;
  int begin_tag(std::string_view type) const;
  int inside_tag(std::string_view type) const;

  // O->I-x, B-x->I-y, I-x->I-y (x != y), START->I-x, anything into START,
  // anything out of STOP.
  bool allowed(int from, int to) const;
  bool is_legal(std::span<const int> y) const;
  // Zero on legal transitions, kIllegalTransition elsewhere.
  Matrix transition_mask() const;

 private:
  std::vector<std::string> tags_;
};

double sequence_score(const Matrix& em, const Matrix& trans, std::span<const int> y);
// Forward algorithm in log space.
double log_partition(const Matrix& em, const Matrix& trans);
// log_partition - sequence_score(gold). Throws ValidationError when gold
// uses a pinned (illegal) transition.
double crf_nll(const Matrix& em, const Matrix& trans, std::span<const int> gold);
// Highest scoring path; ties go to the lower tag index.
std::vector<int> viterbi_decode(const Matrix& em, const Matrix& trans);

// Differentiable NLL; gradients come from forward-backward marginals.
ad::Var crf_nll(ad::Var em, ad::Var trans, std::span<const int> gold);

// Affine projection of hidden rows onto tag scores.
Matrix emissions(const Matrix& hidden, const Matrix& weight, const Matrix& bias);

struct TypedSpan {
  std::string type;
  TokenSpan span;
  bool operator==(const TypedSpan&) const = default;
};

// I-x with no open x-run becomes B-x.
std::vector<int> repair_tags(std::span<const int> y, const BioTagset& tagset);
// Maximal B-x (I-x)* runs after repair.
std::vector<TypedSpan> tags_to_entities(std::span<const int> y, const BioTagset& tagset);
// Throws ValidationError on overlapping or out-of-range spans.
std::vector<int> entities_to_tags(const std::vector<TypedSpan>& entities, int n,
                                  const BioTagset& tagset);

}  // namespace clinie

#endif  // CLINIE_CRF_H_
