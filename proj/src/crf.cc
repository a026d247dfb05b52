#include "clinie/crf.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clinie/errors.h"

namespace clinie {

BioTagset::BioTagset(const Schema& schema) : tags_(schema.bio_tagset()) {}

BioTagset::BioTagset(std::vector<std::string> tags) : tags_(std::move(tags)) {
  if (tags_.empty() || tags_[0] != "O") throw SchemaError("BIO tag set must start with O");
}

int BioTagset::index(std::string_view tag) const {
  for (int i = 0; i < size(); ++i) {
    if (tags_[i] == tag) return i;
  }
  throw SchemaError("unknown tag '" + std::string(tag) + "'");
}

std::string BioTagset::type_of(int tag) const {
  return tag <= 0 ? std::string() : tags_.at(tag).substr(2);
}

int BioTagset::begin_tag(std::string_view type) const { return index("B-" + std::string(type)); }

int BioTagset::inside_tag(std::string_view type) const { return index("I-" + std::string(type)); }

bool BioTagset::allowed(int from, int to) const {
  const int start = start_state(), stop = stop_state();
  if (to == start || from == stop) return false;
  if (from == start && to == stop) return false;
  if (to == stop) return true;
  if (!is_inside(to)) return true;
  if (from == start || is_outside(from)) return false;
  return type_of(from) == type_of(to);
}

bool BioTagset::is_legal(std::span<const int> y) const {
  int prev = start_state();
  for (int tag : y) {
    if (tag < 0 || tag >= size() || !allowed(prev, tag)) return false;
    prev = tag;
  }
  return allowed(prev, stop_state());
}

Matrix BioTagset::transition_mask() const {
  const int n = size() + 2;
  Matrix mask(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mask(i, j) = allowed(i, j) ? 0.0 : kIllegalTransition;
  return mask;
}

namespace {

void check_shapes(const Matrix& em, const Matrix& trans) {
  const int t = em.cols();
  if (trans.rows() != t + 2 || trans.cols() != t + 2) {
    throw ModelError("transition matrix must be (T+2) x (T+2)");
  }
  if (em.rows() < 1) throw ModelError("CRF needs at least one position");
}

// alpha(t, j): log-sum of prefix scores ending in tag j at position t.
Matrix forward_table(const Matrix& em, const Matrix& trans) {
  const int n = em.rows(), T = em.cols(), start = T;
  Matrix alpha(n, T);
  for (int j = 0; j < T; ++j) alpha(0, j) = trans(start, j) + em(0, j);
  std::vector<double> terms(T);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < T; ++j) {
      for (int i = 0; i < T; ++i) terms[i] = alpha(t - 1, i) + trans(i, j);
      alpha(t, j) = log_sum_exp(terms) + em(t, j);
    }
  }
  return alpha;
}

// beta(t, i): log-sum of suffix scores after being in tag i at position t.
Matrix backward_table(const Matrix& em, const Matrix& trans) {
  const int n = em.rows(), T = em.cols(), stop = T + 1;
  Matrix beta(n, T);
  for (int i = 0; i < T; ++i) beta(n - 1, i) = trans(i, stop);
  std::vector<double> terms(T);
  for (int t = n - 2; t >= 0; --t) {
    for (int i = 0; i < T; ++i) {
      for (int j = 0; j < T; ++j) terms[j] = trans(i, j) + em(t + 1, j) + beta(t + 1, j);
      beta(t, i) = log_sum_exp(terms);
    }
  }
  return beta;
}

double partition_from_alpha(const Matrix& alpha, const Matrix& trans) {
  const int n = alpha.rows(), T = alpha.cols(), stop = T + 1;
  std::vector<double> terms(T);
  for (int j = 0; j < T; ++j) terms[j] = alpha(n - 1, j) + trans(j, stop);
  return log_sum_exp(terms);
}

void check_gold(const Matrix& em, const Matrix& trans, std::span<const int> gold) {
  const int T = em.cols();
  if (static_cast<int>(gold.size()) != em.rows()) {
    throw ValidationError("gold tag sequence length differs from sentence length");
  }
  int prev = T;
  for (std::size_t t = 0; t <= gold.size(); ++t) {
    int tag = t < gold.size() ? gold[t] : T + 1;
    if (t < gold.size() && (tag < 0 || tag >= T)) throw ValidationError("gold tag index out of range");
    if (trans(prev, tag) <= kIllegalTransition) {
      throw ValidationError("gold tag sequence uses a structurally illegal transition at position " +
                            std::to_string(t));
    }
    prev = tag;
  }
}

}  // namespace

double sequence_score(const Matrix& em, const Matrix& trans, std::span<const int> y) {
  check_shapes(em, trans);
  const int T = em.cols();
  if (static_cast<int>(y.size()) != em.rows()) throw ModelError("tag sequence length mismatch");
  double s = 0.0;
  int prev = T;
  for (int t = 0; t < em.rows(); ++t) {
    if (y[t] < 0 || y[t] >= T) throw ModelError("tag index out of range");
    s += trans(prev, y[t]) + em(t, y[t]);
    prev = y[t];
  }
  return s + trans(prev, T + 1);
}

double log_partition(const Matrix& em, const Matrix& trans) {
  check_shapes(em, trans);
  return partition_from_alpha(forward_table(em, trans), trans);
}

double crf_nll(const Matrix& em, const Matrix& trans, std::span<const int> gold) {
  check_shapes(em, trans);
  check_gold(em, trans, gold);
  return log_partition(em, trans) - sequence_score(em, trans, gold);
}

std::vector<int> viterbi_decode(const Matrix& em, const Matrix& trans) {
  check_shapes(em, trans);
  const int n = em.rows(), T = em.cols(), start = T, stop = T + 1;
  Matrix score(n, T);
  std::vector<int> back(static_cast<std::size_t>(n) * T, 0);
  for (int j = 0; j < T; ++j) score(0, j) = trans(start, j) + em(0, j);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < T; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int i = 0; i < T; ++i) {
        double s = score(t - 1, i) + trans(i, j);
        if (s > best) {
          best = s;
          arg = i;
        }
      }
      score(t, j) = best + em(t, j);
      back[static_cast<std::size_t>(t) * T + j] = arg;
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  int last = 0;
  for (int j = 0; j < T; ++j) {
    double s = score(n - 1, j) + trans(j, stop);
    if (s > best) {
      best = s;
      last = j;
    }
  }
  std::vector<int> path(n);
  path[n - 1] = last;
  for (int t = n - 1; t > 0; --t) path[t - 1] = back[static_cast<std::size_t>(t) * T + path[t]];
  return path;
}

ad::Var crf_nll(ad::Var em, ad::Var trans, std::span<const int> gold) {
  const Matrix& e = em.value();
  const Matrix& tr = trans.value();
  check_shapes(e, tr);
  check_gold(e, tr, gold);
  Matrix alpha = forward_table(e, tr);
  const double log_z = partition_from_alpha(alpha, tr);
  const double nll = log_z - sequence_score(e, tr, gold);
  std::vector<int> y(gold.begin(), gold.end());
  return em.tape->push(
      Matrix(1, 1, nll), {em, trans},
      [em, trans, y = std::move(y), alpha = std::move(alpha), log_z](ad::Tape& tape, int self) {
        const double g = tape.grad(self)(0, 0);
        const Matrix& e = tape.value(em.id);
        const Matrix& tr = tape.value(trans.id);
        const int n = e.rows(), T = e.cols(), start = T, stop = T + 1;
        Matrix beta = backward_table(e, tr);
        const bool want_em = tape.requires_grad(em.id);
        const bool want_tr = tape.requires_grad(trans.id);
        for (int t = 0; t < n; ++t) {
          for (int j = 0; j < T; ++j) {
            double p = std::exp(alpha(t, j) + beta(t, j) - log_z);
            if (want_em) tape.grad(em.id)(t, j) += g * p;
            if (want_tr && t == 0) tape.grad(trans.id)(start, j) += g * p;
            if (want_tr && t == n - 1) tape.grad(trans.id)(j, stop) += g * p;
          }
        }
        if (want_tr) {
          Matrix& gt = tape.grad(trans.id);
          for (int t = 1; t < n; ++t)
            for (int i = 0; i < T; ++i)
              for (int j = 0; j < T; ++j) {
                double p = std::exp(alpha(t - 1, i) + tr(i, j) + e(t, j) + beta(t, j) - log_z);
                gt(i, j) += g * p;
              }
        }
        // Subtract the gold path's indicator features.
        int prev = start;
        for (int t = 0; t < n; ++t) {
          if (want_em) tape.grad(em.id)(t, y[t]) -= g;
          if (want_tr) tape.grad(trans.id)(prev, y[t]) -= g;
          prev = y[t];
        }
        if (want_tr) tape.grad(trans.id)(prev, stop) -= g;
      });
}

Matrix emissions(const Matrix& hidden, const Matrix& weight, const Matrix& bias) {
  if (hidden.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw ModelError("emission projection shape mismatch");
  }
  Matrix out = matmul(hidden, weight);
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) += bias(0, c);
  return out;
}

std::vector<int> repair_tags(std::span<const int> y, const BioTagset& tagset) {
  std::vector<int> out(y.begin(), y.end());
  std::string open;
  for (int& tag : out) {
    if (tagset.is_inside(tag)) {
      std::string type = tagset.type_of(tag);
      if (type != open) tag = tagset.begin_tag(type);
      open = type;
    } else if (tagset.is_begin(tag)) {
      open = tagset.type_of(tag);
    } else {
      open.clear();
    }
  }
  return out;
}

std::vector<TypedSpan> tags_to_entities(std::span<const int> y, const BioTagset& tagset) {
  std::vector<int> tags = repair_tags(y, tagset);
  std::vector<TypedSpan> out;
  const int n = static_cast<int>(tags.size());
  for (int t = 0; t < n; ++t) {
    if (!tagset.is_begin(tags[t])) continue;
    std::string type = tagset.type_of(tags[t]);
    int end = t + 1;
    while (end < n && tagset.is_inside(tags[end]) && tagset.type_of(tags[end]) == type) ++end;
    out.push_back({type, {t, end}});
    t = end - 1;
  }
  return out;
}

std::vector<int> entities_to_tags(const std::vector<TypedSpan>& entities, int n,
                                  const BioTagset& tagset) {
  std::vector<int> tags(n, 0);
  std::vector<char> used(n, 0);
  for (const auto& e : entities) {
    if (e.span.start < 0 || e.span.end > n || e.span.start >= e.span.end) {
      throw ValidationError("entity span out of range");
    }
    for (int t = e.span.start; t < e.span.end; ++t) {
      if (used[t]) throw ValidationError("overlapping entities cannot be BIO-encoded");
      used[t] = 1;
      tags[t] = t == e.span.start ? tagset.begin_tag(e.type) : tagset.inside_tag(e.type);
    }
  }
  return tags;
}

}  // namespace clinie
