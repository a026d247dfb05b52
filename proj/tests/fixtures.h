// Small random models and documents shared by the unit and acceptance tests.

#ifndef CLINIE_TESTS_FIXTURES_H_
#define CLINIE_TESTS_FIXTURES_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "clinie/document.h"
#include "oracles.h"

namespace fixtures {

// A short synthetic report with at least one relation.
clinie::Document small_document(std::uint64_t seed);

struct GradCase {
  std::string module;  // encoder, ner_crf, modality_clf, relation_extractor
  std::string detail;  // configuration summary
  oracle::GradResult result;
};

// One random configuration (encoder kind, sizes, CRF on/off) checked for all
// four modules.
std::vector<GradCase> gradient_configuration(std::uint64_t seed);

// Random corpus pair for metric checks: gold plus a perturbed prediction
// over the same texts.
struct MetricFixture {
  clinie::Corpus pred;
  clinie::Corpus gold;
};
MetricFixture random_metric_fixture(std::mt19937_64& rng);

}  // namespace fixtures

#endif  // CLINIE_TESTS_FIXTURES_H_
