#include <doctest.h>

#include <algorithm>
#include <random>

#include "clinie/errors.h"
#include "clinie/evaluation.h"
#include "fixtures.h"

using namespace clinie;

namespace {

const Schema& schema() { return Schema::default_schema(); }

// Gold: three D entities with two region relations to one A.
Corpus gold_fixture() {
  Document d = make_document("r", "p", "d1 d2 d3 a x y");
  d.entities = {{1, "D", {0, 1}, "positive"}, {2, "D", {1, 2}, "negative"},
                {3, "D", {2, 3}, "positive"}, {4, "A", {3, 4}, "positive"}};
  d.relations = {{1, 4, "region", RelationCategory::kMedical},
                 {2, 4, "region", RelationCategory::kMedical}};
  Corpus c;
  c.documents.push_back(d);
  return c;
}

}  // namespace

TEST_CASE("identical prediction scores one") {
  const Corpus g = gold_fixture();
  const EvalReport r = evaluate(g, g, schema());
  CHECK(r.mer.f1() == 1.0);
  CHECK(r.mc.f1() == 1.0);
  CHECK(r.re.f1() == 1.0);
}

TEST_CASE("two hits, one spurious, one missed") {
  Corpus gold, pred;
  Document g = make_document("r", "p", "a b c d");
  Document p = g;
  g.entities = {{1, "D", {0, 1}, "positive"}, {2, "D", {1, 2}, "positive"}, {3, "A", {2, 3}, "positive"}};
  p.entities = {{1, "D", {0, 1}, "positive"}, {2, "D", {1, 2}, "positive"}, {3, "A", {3, 4}, "positive"}};
  gold.documents.push_back(g);
  pred.documents.push_back(p);
  const Prf prf = eval_mer(pred, gold);
  CHECK(prf.tp == 2);
  CHECK(prf.fp == 1);
  CHECK(prf.fn == 1);
  CHECK(prf.precision() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(prf.recall() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(prf.f1() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("one wrong modality out of four") {
  Corpus gold = gold_fixture();
  Corpus pred = gold;
  pred.documents[0].entities[0].modality = "suspicious";
  CHECK(eval_mc(pred, gold).f1() == doctest::Approx(0.75));
  CHECK(eval_mer(pred, gold).f1() == 1.0);
}

TEST_CASE("relation table: one correct region of two gold") {
  Corpus gold = gold_fixture();
  Corpus pred = gold;
  pred.documents[0].relations.pop_back();
  const EvalReport r = evaluate(pred, gold, schema());
  const Prf& region = r.re_by_type[schema().relation_index("region")].prf;
  CHECK(region.f1() == doctest::Approx(2.0 / 3.0));
  const std::string table = format_report(r);
  CHECK(table.find("feature") != std::string::npos);
  // Zero-support rows print "-".
  const auto pos = table.find("\nfeature");
  CHECK(table.substr(pos, 40).find('-') != std::string::npos);
  // Per-type counts pool back to the micro score.
  Prf pooled;
  for (const auto& ts : r.re_by_type) pooled += ts.prf;
  CHECK(pooled == r.re);
}

TEST_CASE("empty prediction and gold give a vacuous report") {
  Corpus c;
  c.documents.push_back(make_document("r", "p", "nothing here"));
  const EvalReport r = evaluate(c, c, schema());
  CHECK(r.re.support() == 0);
  CHECK(r.re.f1() == 0.0);
  const std::string table = format_report(r);
  const auto pos = table.find("\nRE ");
  REQUIRE(pos != std::string::npos);
  const std::string line = table.substr(pos + 1, table.find('\n', pos + 1) - pos - 1);
  CHECK(std::count(line.begin(), line.end(), '-') == 3);
}

TEST_CASE("upstream errors never raise downstream scores") {
  Corpus gold = gold_fixture();
  Corpus pred = gold;  // gold-upstream RE prediction
  Corpus injected = pred;
  injected.documents[0].entities[0].span = {0, 2};  // breaks the first entity
  injected.documents[0].entities.erase(injected.documents[0].entities.begin() + 1);
  injected.documents[0].relations = {{1, 4, "region", RelationCategory::kMedical}};
  CHECK(eval_re(injected, gold).f1() < eval_re(pred, gold).f1());
  CHECK(eval_mc(injected, gold).f1() < eval_mc(pred, gold).f1());
}

TEST_CASE("scores match a naive counter on random fixtures") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 200; ++i) {
    const auto f = fixtures::random_metric_fixture(rng);
    const auto mer = oracle::naive_mer(f.pred, f.gold);
    const auto mc = oracle::naive_mc(f.pred, f.gold);
    const auto re = oracle::naive_re(f.pred, f.gold);
    CHECK(eval_mer(f.pred, f.gold) == Prf{mer.tp, mer.fp, mer.fn});
    CHECK(eval_mc(f.pred, f.gold) == Prf{mc.tp, mc.fp, mc.fn});
    CHECK(eval_re(f.pred, f.gold) == Prf{re.tp, re.fp, re.fn});
  }
}

TEST_CASE("misaligned corpora are rejected") {
  Corpus gold = gold_fixture();
  Corpus other;
  other.documents.push_back(make_document("q", "p", "x"));
  CHECK_THROWS_AS(eval_mer(other, gold), ValidationError);
  Corpus changed = gold;
  changed.documents[0] = make_document("r", "p", "different text");
  CHECK_THROWS_AS(evaluate(changed, gold, schema()), ValidationError);
}

TEST_CASE("fold aggregation macro-averages") {
  EvalReport a, b;
  a.mer = {1, 0, 0};
  b.mer = {1, 1, 1};
  const CvReport cv = aggregate_folds({a, b});
  CHECK(cv.mer.f1 == doctest::Approx((1.0 + 0.5) / 2));
  CHECK(cv.pooled.mer == Prf{2, 1, 1});
  CHECK(format_cv_report(cv).find("macro") != std::string::npos);
}
