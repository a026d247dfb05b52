// Acceptance suite. Each criterion prints one PASS/FAIL line; the process
// exits non-zero when any selected criterion fails.
//
//   clinie_acceptance [criterion...]   (default: all)
//
// end_to_end always trains the full cross-validation run and caches it under
// CLINIE_TEST_TMP/e2e; data_budget_ablation reuses that cache when present so
// both compare the same folds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "clinie/annotation_io.h"
#include "clinie/crf.h"
#include "clinie/errors.h"
#include "clinie/pipeline.h"
#include "clinie/relation.h"
#include "clinie/synth.h"
#include "fixtures.h"
#include "oracles.h"

using namespace clinie;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const Schema& schema() { return Schema::default_schema(); }

Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

// Second-best path score via enumeration; used to confirm a unique maximum.
double runner_up_gap(const Matrix& em, const Matrix& trans) {
  const int n = em.rows(), t = em.cols();
  std::vector<int> y(n, 0);
  double best = -1e300, second = -1e300;
  while (true) {
    const double s = oracle::brute_score(em, trans, y);
    if (s > best) {
      second = best;
      best = s;
    } else if (s > second) {
      second = s;
    }
    int i = n - 1;
    while (i >= 0 && ++y[i] == t) y[i--] = 0;
    if (i < 0) break;
  }
  return best - second;
}

Outcome crf_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 5), tags(1, 5);
  std::uniform_real_distribution<double> jitter(-1e-3, 1e-3);
  double worst = 0.0;
  int path_mismatch = 0, instances = 0;
  for (; instances < 200; ++instances) {
    const int n = len(rng), t = tags(rng);
    Matrix em = random_matrix(n, t, rng);
    const Matrix trans = random_matrix(t + 2, t + 2, rng);
    worst = std::max(worst, std::abs(log_partition(em, trans) - oracle::brute_log_partition(em, trans)));
    // Jitter until the maximum is unique by a clear margin.
    while (runner_up_gap(em, trans) < 1e-6)
      for (double& v : em.data()) v += jitter(rng);
    if (viterbi_decode(em, trans) != oracle::brute_argmax(em, trans)) ++path_mismatch;
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && path_mismatch == 0 && secs < 10.0,
          std::to_string(instances) + " instances, max |logZ error| " + fmt("%.2e", worst) +
              " (< 1e-6), viterbi mismatches " + std::to_string(path_mismatch) + ", " +
              fmt("%.2f", secs) + " s (< 10 s)"};
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::map<std::string, int> configs;
  double worst = 0.0;
  std::string worst_where;
  for (int seed = 1; seed <= 20; ++seed) {
    for (const auto& c : fixtures::gradient_configuration(seed)) {
      ++configs[c.module];
      if (c.result.worst_error >= worst) {
        worst = c.result.worst_error;
        worst_where = c.module + " " + c.result.worst_param + " [" + c.detail + "]";
      }
    }
  }
  const double secs = seconds_since(t0);
  bool all20 = configs.size() == 4;
  std::string counts;
  for (const auto& [m, n] : configs) {
    all20 = all20 && n == 20;
    counts += m + "=" + std::to_string(n) + " ";
  }
  return {all20 && worst < 1e-3 && secs < 60.0,
          counts + "configs, worst relative error " + fmt("%.2e", worst) + " (< 1e-3) at " +
              worst_where + ", " + fmt("%.2f", secs) + " s (< 60 s)"};
}

Outcome format_round_trip() {
  const auto t0 = Clock::now();
  GenConfig cfg;
  cfg.n_documents = 500;
  cfg.patients = 40;
  cfg.seed = 3;
  const Corpus corpus = generate(cfg).corpus;
  int structural = 0, idempotent = 0, violations = 0;
  for (const auto& d : corpus.documents) {
    try {
      validate_document(d, schema(), ValidationMode::kStrict);
    } catch (const ValidationError&) {
      ++violations;
    }
    const std::string xml = serialize_report(d, schema());
    Document back;
    try {
      back = parse_report(xml, schema(), {}, d.doc_id, d.patient_id);
    } catch (const Error&) {
      ++violations;
      continue;
    }
    if (!(back == d) || oracle::canonical_form(back) != oracle::canonical_form(d) ||
        oracle::xml_text(xml) != d.text)
      ++structural;
    if (serialize_report(back, schema()) != xml) ++idempotent;
  }
  // The corpus-level wrapper must round-trip too.
  const bool corpus_ok = parse_corpus(serialize_corpus(corpus, schema()), schema()) == corpus;
  const double secs = seconds_since(t0);
  return {structural == 0 && idempotent == 0 && violations == 0 && corpus_ok && secs < 10.0,
          std::to_string(corpus.size()) + " documents, structural mismatches " +
              std::to_string(structural) + ", non-idempotent " + std::to_string(idempotent) +
              ", strict violations " + std::to_string(violations) + ", corpus wrapper " +
              (corpus_ok ? "ok" : "mismatch") + ", " + fmt("%.2f", secs) + " s (< 10 s)"};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(99);
  int disagreements = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto f = fixtures::random_metric_fixture(rng);
    const auto mer = oracle::naive_mer(f.pred, f.gold);
    const auto mc = oracle::naive_mc(f.pred, f.gold);
    const auto re = oracle::naive_re(f.pred, f.gold);
    if (!(eval_mer(f.pred, f.gold) == Prf{mer.tp, mer.fp, mer.fn})) ++disagreements;
    if (!(eval_mc(f.pred, f.gold) == Prf{mc.tp, mc.fp, mc.fn})) ++disagreements;
    if (!(eval_re(f.pred, f.gold) == Prf{re.tp, re.fp, re.fn})) ++disagreements;
  }
  // Hand fixtures: 2 TP, 1 FP, 1 FN at each level.
  Document g = make_document("r", "p", "a b c d e");
  g.entities = {{1, "D", {0, 1}, "positive"}, {2, "A", {1, 2}, "negative"}, {3, "A", {2, 3}, "positive"}};
  Document p = g;
  p.entities[2] = {3, "A", {3, 4}, "positive"};
  Corpus gold, pred;
  gold.documents.push_back(g);
  pred.documents.push_back(p);
  g.relations = {{1, 2, "region", RelationCategory::kMedical}, {1, 3, "region", RelationCategory::kMedical},
                 {2, 3, "change", RelationCategory::kMedical}};
  Document pr = g;
  pr.relations[2] = {3, 2, "change", RelationCategory::kMedical};
  Corpus gold_re, pred_re;
  gold_re.documents.push_back(g);
  pred_re.documents.push_back(pr);
  const Prf mer = eval_mer(pred, gold), mc = eval_mc(pred, gold), re = eval_re(pred_re, gold_re);
  const double third = 2.0 / 3.0;
  auto is_two_thirds = [&](const Prf& x) {
    return x.tp == 2 && x.fp == 1 && x.fn == 1 && std::abs(x.precision() - third) < 1e-12 &&
           std::abs(x.recall() - third) < 1e-12 && std::abs(x.f1() - third) < 1e-12;
  };
  const bool hand = is_two_thirds(mer) && is_two_thirds(mc) && is_two_thirds(re);
  return {disagreements == 0 && hand,
          "1000 fixtures, disagreements " + std::to_string(disagreements) +
              ", hand case MER/MC/RE P=R=F1=2/3: " + (hand ? "yes" : "no") + " (RE F1 " +
              fmt("%.6f", re.f1()) + ")"};
}

Outcome decode_monotonicity() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.5);
  int added = 0, nonempty = 0, strictly_fewer = 0;
  for (int i = 0; i < 100; ++i) {
    const Document doc = fixtures::small_document(1000 + i);
    Corpus c;
    c.documents.push_back(doc);
    RelationConfig rc;
    rc.encoder.embed_dim = 4;
    rc.encoder.hidden_dim = 4;
    RelationExtractor re(schema(), rc, build_vocab(c, 1), i);
    for (const char* name : {"re.out", "re.bout"})
      for (double& v : re.params().get(name).value.data()) v = g(rng);
    const Matrix h = re.hidden(doc);
    const auto lo = re.decode_relations(doc.entities, h, 0.3, true);
    const auto hi = re.decode_relations(doc.entities, h, 0.7, true);
    for (const auto& r : hi)
      if (std::find(lo.begin(), lo.end(), r) == lo.end()) ++added;
    if (!lo.empty()) ++nonempty;
    if (hi.size() < lo.size()) ++strictly_fewer;
  }
  return {added == 0 && nonempty > 0,
          "100 instances, relations added by raising theta 0.3 -> 0.7: " + std::to_string(added) +
              " (instances with decodes at 0.3: " + std::to_string(nonempty) +
              ", with fewer at 0.7: " + std::to_string(strictly_fewer) + ")"};
}

// End-to-end configuration: desk profile for every stage; the relation
// stage runs at a higher learning rate and patience (see README).
CvOptions e2e_options() {
  CvOptions o;
  o.folds = 5;
  o.seed = 7;
  o.re.train.learning_rate = 3e-3;
  o.re.train.patience = 60;
  return o;
}

Corpus e2e_corpus() {
  GenConfig cfg;
  cfg.n_documents = 500;
  cfg.patients = 40;
  cfg.seed = 1;
  return generate(cfg).corpus;
}

fs::path cache_dir() { return fs::path(CLINIE_TEST_TMP) / "e2e"; }

void save_run(const CvResult& run, double seconds) {
  fs::remove_all(cache_dir());
  for (std::size_t f = 0; f < run.folds.size(); ++f) {
    const fs::path dir = cache_dir() / ("fold" + std::to_string(f));
    save_checkpoint(run.folds[f].mer, (dir / "mer").string());
    save_checkpoint(run.folds[f].mc, (dir / "mc").string());
    save_checkpoint(run.folds[f].re, (dir / "re").string());
    write_corpus_file((dir / "predictions.xml").string(), run.folds[f].predictions, schema());
  }
  write_text_file((cache_dir() / "report.txt").string(), format_cv_report(run.report));
  // Written last: marks the cache complete.
  write_text_file((cache_dir() / "seconds.txt").string(), fmt("%.17g", seconds) + "\n");
}

bool load_run(const Corpus& corpus, const CvOptions& o, CvResult& run, double& seconds) {
  if (!fs::exists(cache_dir() / "seconds.txt")) return false;
  seconds = std::stod(read_text_file((cache_dir() / "seconds.txt").string()));
  run = {};
  run.plan = make_folds(corpus, o.folds, o.seed, o.dev_fraction);
  std::vector<EvalReport> reports;
  for (int f = 0; f < o.folds; ++f) {
    const fs::path dir = cache_dir() / ("fold" + std::to_string(f));
    FoldOutcome fold{load_checkpoint((dir / "mer").string()), load_checkpoint((dir / "mc").string()),
                     load_checkpoint((dir / "re").string()),
                     read_corpus_file((dir / "predictions.xml").string(), schema()), {}};
    fold.report = evaluate(fold.predictions, run.plan.split(corpus, f).test, schema(), o.re.model.window);
    reports.push_back(fold.report);
    run.folds.push_back(std::move(fold));
  }
  run.report = aggregate_folds(std::move(reports));
  return true;
}

// Full-data run, computed once per process. `fresh` ignores an existing
// cache; otherwise a cached run is reused.
const CvResult& base_run(const Corpus& corpus, double& seconds, bool fresh) {
  static CvResult run;
  static double secs = -1.0;
  if (secs < 0.0) {
    const CvOptions o = e2e_options();
    if (fresh || !load_run(corpus, o, run, secs)) {
      const auto t0 = Clock::now();
      run = cross_validate(corpus, schema(), o, &std::cerr);
      secs = seconds_since(t0);
      save_run(run, secs);
    }
  }
  seconds = secs;
  return run;
}

Outcome end_to_end() {
  const Corpus corpus = e2e_corpus();
  double secs = 0.0;
  const CvResult& run = base_run(corpus, secs, true);
  const CvReport& r = run.report;
  std::cerr << format_cv_report(r);
  const bool ok = r.mer.f1 >= 0.95 && r.mc.f1 >= 0.95 && r.re.f1 >= 0.85 && secs < 900.0;
  return {ok, "500 docs / 40 patients, 5-fold macro F1: MER " + fmt("%.4f", r.mer.f1) +
                  " (>= 0.95), MC " + fmt("%.4f", r.mc.f1) + " (>= 0.95), RE " +
                  fmt("%.4f", r.re.f1) + " (>= 0.85), " + fmt("%.1f", secs) + " s (< 900 s)"};
}

long relation_total(const Corpus& c) {
  long n = 0;
  for (const auto& d : c.documents) n += static_cast<long>(d.relations.size());
  return n;
}

Outcome data_budget_ablation() {
  const Corpus corpus = e2e_corpus();
  double secs = 0.0;
  const CvResult& base = base_run(corpus, secs, false);
  CvOptions o = e2e_options();
  o.re_subset = 0.39;
  // Relation budget per fold.
  double worst_dev = 0.0;
  for (int f = 0; f < o.folds; ++f) {
    const Corpus train = base.plan.split(corpus, f).train;
    const double target = 0.39 * static_cast<double>(relation_total(train));
    const double got = static_cast<double>(relation_total(subset_train(train, 0.39, o.seed + f)));
    worst_dev = std::max(worst_dev, std::abs(got / target - 1.0));
  }
  const CvResult reduced = retrain_relations(corpus, schema(), o, base, &std::cerr);
  const double full_f1 = base.report.re.f1, sub_f1 = reduced.report.re.f1;
  return {worst_dev <= 0.05 && sub_f1 <= full_f1,
          "fraction 0.39: worst relation-count deviation " + fmt("%.2f", 100.0 * worst_dev) +
              "% (<= 5%), RE F1 " + fmt("%.4f", sub_f1) + " vs full " + fmt("%.4f", full_f1) +
              " (<=)"};
}

// Everything a run produces, serialized, for byte comparison.
std::string run_fingerprint(const CvResult& run) {
  std::string s;
  for (const auto& f : run.folds) {
    for (const Checkpoint* ck : {&f.mer, &f.mc, &f.re})
      s += format_params(ck->params) + format_train_log(ck->log);
    s += serialize_corpus(f.predictions, schema());
    s += format_report_tsv(f.report);
  }
  return s + format_cv_report(run.report);
}

Outcome determinism() {
  // Reduced size: same code path as the full run at a fraction of the cost.
  GenConfig cfg;
  cfg.n_documents = 60;
  cfg.patients = 8;
  cfg.seed = 11;
  const Corpus corpus = generate(cfg).corpus;
  CvOptions o;
  o.folds = 3;
  o.seed = 5;
  for (StageSettings* s : {&o.mer, &o.mc, &o.re}) {
    s->train.epochs = 6;
    s->model.encoder.embed_dim = 12;
    s->model.encoder.hidden_dim = 12;
  }
  const std::string a = run_fingerprint(cross_validate(corpus, schema(), o));
  const std::string b = run_fingerprint(cross_validate(corpus, schema(), o));
  return {a == b && !a.empty(), "60 docs / 8 patients, 3 folds, two runs: checkpoints, predictions and "
                                "reports " + std::string(a == b ? "identical" : "differ") + " (" +
                                    std::to_string(a.size()) + " bytes)"};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"crf_oracle", crf_oracle},
      {"gradient_checks", gradient_checks},
      {"format_round_trip", format_round_trip},
      {"metric_oracle", metric_oracle},
      {"end_to_end", end_to_end},
      {"data_budget_ablation", data_budget_ablation},
      {"decode_monotonicity", decode_monotonicity},
      {"determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    bool known = false;
    for (const auto& [name, fn] : criteria()) known = known || name == w;
    if (!known) {
      std::cerr << "unknown criterion: " << w << "\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& [name, fn] : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    Outcome v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
