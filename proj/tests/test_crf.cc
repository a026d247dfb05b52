#include <doctest.h>

#include <cmath>
#include <random>

#include "clinie/crf.h"
#include "clinie/errors.h"
#include "oracles.h"

using namespace clinie;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

}  // namespace

TEST_CASE("log partition and Viterbi match enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 5), tags(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = len(rng), t = tags(rng);
    const Matrix em = random_matrix(n, t, rng);
    const Matrix trans = random_matrix(t + 2, t + 2, rng);
    CHECK(std::abs(log_partition(em, trans) - oracle::brute_log_partition(em, trans)) < 1e-9);
    CHECK(viterbi_decode(em, trans) == oracle::brute_argmax(em, trans));
    std::vector<int> y(n);
    for (int& v : y) v = std::uniform_int_distribution<int>(0, t - 1)(rng);
    CHECK(std::abs(sequence_score(em, trans, y) - oracle::brute_score(em, trans, y)) < 1e-12);
    CHECK(crf_nll(em, trans, y) >= -1e-12);
  }
}

TEST_CASE("a single admissible sequence has zero loss") {
  Matrix em(3, 1, 0.7);
  Matrix trans(3, 3, 0.2);
  CHECK(std::abs(crf_nll(em, trans, std::vector<int>{0, 0, 0})) < 1e-12);
}

TEST_CASE("Viterbi breaks ties toward the lower tag") {
  Matrix em(2, 3, 0.0);
  Matrix trans(5, 5, 0.0);
  CHECK(viterbi_decode(em, trans) == std::vector<int>{0, 0});
}

TEST_CASE("BIO transition structure") {
  const BioTagset tags(std::vector<std::string>{"O", "B-A", "I-A", "B-D", "I-D"});
  CHECK(tags.allowed(0, 1));
  CHECK_FALSE(tags.allowed(0, 2));                        // O -> I-A
  CHECK(tags.allowed(1, 2));                              // B-A -> I-A
  CHECK_FALSE(tags.allowed(1, 4));                        // B-A -> I-D
  CHECK_FALSE(tags.allowed(2, 4));                        // I-A -> I-D
  CHECK_FALSE(tags.allowed(tags.start_state(), 2));       // START -> I-A
  CHECK(tags.allowed(tags.start_state(), 1));
  CHECK(tags.allowed(2, tags.stop_state()));
  const Matrix mask = tags.transition_mask();
  CHECK(mask(0, 2) == kIllegalTransition);
  CHECK(mask(1, 2) == 0.0);
  CHECK(tags.type_of(4) == "D");
  CHECK(tags.is_legal(std::vector<int>{1, 2, 0, 3, 4}));
  CHECK_FALSE(tags.is_legal(std::vector<int>{0, 4}));
}

TEST_CASE("illegal gold paths are rejected; decoding never uses them") {
  const BioTagset tags(std::vector<std::string>{"O", "B-A", "I-A"});
  std::mt19937_64 rng(3);
  Matrix trans = random_matrix(5, 5, rng);
  const Matrix mask = tags.transition_mask();
  for (std::size_t i = 0; i < trans.size(); ++i)
    if (mask.data()[i] != 0.0) trans.data()[i] = kIllegalTransition;
  const Matrix em = random_matrix(4, 3, rng, -2, 2);
  CHECK_THROWS_AS(crf_nll(em, trans, std::vector<int>{0, 2, 2, 0}), ValidationError);
  Matrix strong(4, 3, 0.0);
  for (int t = 0; t < 4; ++t) strong(t, 2) = 50.0;  // I-A everywhere
  const auto path = viterbi_decode(strong, trans);
  CHECK(tags.is_legal(path));
}

TEST_CASE("differentiable NLL agrees with the matrix version") {
  std::mt19937_64 rng(9);
  const Matrix em = random_matrix(4, 3, rng);
  const Matrix trans = random_matrix(5, 5, rng);
  const std::vector<int> gold{1, 2, 0, 1};
  ad::Tape tape;
  ad::Var v = crf_nll(ad::constant(tape, em), ad::constant(tape, trans), gold);
  CHECK(std::abs(v.scalar() - crf_nll(em, trans, gold)) < 1e-10);
  CHECK(std::abs(crf_nll(em, trans, gold) -
                 (oracle::brute_log_partition(em, trans) - oracle::brute_score(em, trans, gold))) <
        1e-9);
}

TEST_CASE("CRF NLL gradient matches finite differences") {
  std::mt19937_64 rng(21);
  ad::ParamSet params;
  params.add("em", random_matrix(4, 3, rng));
  params.add("trans", random_matrix(5, 5, rng));
  const std::vector<int> gold{1, 2, 0, 1};
  auto loss = [&](ad::Tape& tape) {
    return crf_nll(ad::param(tape, params.get("em")), ad::param(tape, params.get("trans")), gold);
  };
  const auto r = oracle::check_gradients(params, loss, rng, 30);
  CHECK(r.worst_error < 1e-6);
}

TEST_CASE("tag and span conversions") {
  const BioTagset tags(std::vector<std::string>{"O", "B-A", "I-A", "B-D", "I-D"});
  const std::vector<TypedSpan> spans{{"A", {0, 2}}, {"D", {2, 3}}, {"A", {4, 5}}};
  const auto y = entities_to_tags(spans, 6, tags);
  CHECK(y == std::vector<int>{1, 2, 3, 0, 1, 0});
  CHECK(tags_to_entities(y, tags) == spans);
  // A dangling I- opens a new entity.
  CHECK(repair_tags(std::vector<int>{0, 2, 4, 0}, tags) == std::vector<int>{0, 1, 3, 0});
  CHECK(tags_to_entities(std::vector<int>{2, 2, 4}, tags) ==
        std::vector<TypedSpan>{{"A", {0, 2}}, {"D", {2, 3}}});
  CHECK_THROWS_AS(entities_to_tags({{"A", {0, 2}}, {"D", {1, 3}}}, 4, tags), ValidationError);
  CHECK_THROWS_AS(entities_to_tags({{"A", {3, 5}}}, 4, tags), ValidationError);
}
