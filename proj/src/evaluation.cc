#include "clinie/evaluation.h"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <tuple>

#include "clinie/errors.h"

namespace clinie {

namespace {

using MerKey = std::tuple<int, int, std::string>;
using McKey = std::tuple<int, int, std::string, std::string>;
using ReKey = std::tuple<int, int, std::string, std::string, int, int, std::string>;

template <typename Key>
Prf match(const std::map<Key, long>& pred, const std::map<Key, long>& gold) {
  Prf prf;
  for (const auto& [key, n] : pred) {
    auto it = gold.find(key);
    const long g = it == gold.end() ? 0 : it->second;
    const long tp = std::min(n, g);
    prf.tp += tp;
    prf.fp += n - tp;
  }
  for (const auto& [key, g] : gold) {
    auto it = pred.find(key);
    const long n = it == pred.end() ? 0 : it->second;
    prf.fn += g - std::min(n, g);
  }
  return prf;
}

std::map<MerKey, long> mer_keys(const Document& d, const std::string* type = nullptr) {
  std::map<MerKey, long> keys;
  for (const auto& e : d.entities) {
    if (type && e.type != *type) continue;
    ++keys[{e.span.start, e.span.end, e.type}];
  }
  return keys;
}

std::map<McKey, long> mc_keys(const Document& d) {
  std::map<McKey, long> keys;
  for (const auto& e : d.entities) ++keys[{e.span.start, e.span.end, e.type, e.modality}];
  return keys;
}

std::map<ReKey, long> re_keys(const Document& d, const std::string* type = nullptr) {
  std::map<ReKey, long> keys;
  for (const auto& r : d.relations) {
    if (type && r.type != *type) continue;
    const Entity* s = d.find_entity(r.source_id);
    const Entity* t = d.find_entity(r.target_id);
    if (!s || !t) {
      throw ValidationError("document " + d.doc_id + " has a relation with a dangling entity id");
    }
    ++keys[{s->span.start, s->span.end, s->type, r.type, t->span.start, t->span.end, t->type}];
  }
  return keys;
}

// Pairs of (pred, gold) documents in gold order.
std::vector<std::pair<const Document*, const Document*>> aligned(const Corpus& pred,
                                                                  const Corpus& gold) {
  check_alignment(pred, gold);
  std::vector<std::pair<const Document*, const Document*>> out;
  for (const auto& g : gold.documents) out.emplace_back(pred.find(g.doc_id), &g);
  return out;
}

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string row(const std::string& name, const Prf& prf) {
  char buf[160];
  if (prf.support() == 0) {
    std::snprintf(buf, sizeof buf, "%-10s %8s %8s %8s %8ld %8ld\n", name.c_str(), "-", "-", "-", 0L,
                  prf.predicted());
  } else {
    std::snprintf(buf, sizeof buf, "%-10s %8s %8s %8s %8ld %8ld\n", name.c_str(),
                  cell(prf.precision()).c_str(), cell(prf.recall()).c_str(), cell(prf.f1()).c_str(),
                  prf.support(), prf.predicted());
  }
  return buf;
}

std::string header(const std::string& title) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %8s %8s %8s %8s %8s\n", title.c_str(), "P", "R", "F1",
                "gold", "pred");
  return buf;
}

std::string tsv_row(const std::string& section, const std::string& name, const Prf& prf) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s\t%s\t%ld\t%ld\t%ld\t%.6f\t%.6f\t%.6f\n", section.c_str(),
                name.c_str(), prf.tp, prf.fp, prf.fn, prf.precision(), prf.recall(), prf.f1());
  return buf;
}

}  // namespace

double Prf::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

void check_alignment(const Corpus& pred, const Corpus& gold) {
  std::vector<std::string> problems;
  std::set<std::string> gold_ids;
  for (const auto& g : gold.documents) {
    if (!gold_ids.insert(g.doc_id).second) problems.push_back("duplicate gold document " + g.doc_id);
    const Document* p = pred.find(g.doc_id);
    if (!p) problems.push_back("document " + g.doc_id + " missing from predictions");
    else if (p->text != g.text) problems.push_back("document " + g.doc_id + " text differs");
  }
  std::set<std::string> pred_ids;
  for (const auto& p : pred.documents) {
    if (!pred_ids.insert(p.doc_id).second) problems.push_back("duplicate predicted document " + p.doc_id);
    if (!gold_ids.count(p.doc_id)) problems.push_back("document " + p.doc_id + " missing from gold");
  }
  if (!problems.empty()) throw ValidationError("prediction and gold corpora are misaligned", problems);
}

Prf eval_mer(const Corpus& pred, const Corpus& gold) {
  Prf prf;
  for (auto [p, g] : aligned(pred, gold)) prf += match(mer_keys(*p), mer_keys(*g));
  return prf;
}

Prf eval_mc(const Corpus& pred, const Corpus& gold) {
  Prf prf;
  for (auto [p, g] : aligned(pred, gold)) prf += match(mc_keys(*p), mc_keys(*g));
  return prf;
}

Prf eval_re(const Corpus& pred, const Corpus& gold) {
  Prf prf;
  for (auto [p, g] : aligned(pred, gold)) prf += match(re_keys(*p), re_keys(*g));
  return prf;
}

EvalReport evaluate(const Corpus& pred, const Corpus& gold, const Schema& schema, int window) {
  EvalReport report;
  report.window = window;
  for (const auto& t : schema.entity_types()) report.mer_by_type.push_back({t, {}});
  for (const auto& r : schema.relations()) report.re_by_type.push_back({r.code, {}});
  for (auto [p, g] : aligned(pred, gold)) {
    report.mer += match(mer_keys(*p), mer_keys(*g));
    report.mc += match(mc_keys(*p), mc_keys(*g));
    report.re += match(re_keys(*p), re_keys(*g));
    for (auto& ts : report.mer_by_type) ts.prf += match(mer_keys(*p, &ts.type), mer_keys(*g, &ts.type));
    for (auto& ts : report.re_by_type) ts.prf += match(re_keys(*p, &ts.type), re_keys(*g, &ts.type));
    for (const auto& r : g->relations) {
      const Entity* s = g->find_entity(r.source_id);
      const Entity* t = g->find_entity(r.target_id);
      if (std::abs(s->span.start - t->span.start) > window) ++report.unreachable_gold;
    }
  }
  return report;
}

CvReport aggregate_folds(std::vector<EvalReport> folds) {
  CvReport cv;
  cv.folds = std::move(folds);
  if (cv.folds.empty()) return cv;
  auto add = [](MacroScore& m, const Prf& prf) {
    m.precision += prf.precision();
    m.recall += prf.recall();
    m.f1 += prf.f1();
  };
  cv.pooled.window = cv.folds.front().window;
  cv.pooled.mer_by_type = cv.folds.front().mer_by_type;
  cv.pooled.re_by_type = cv.folds.front().re_by_type;
  for (auto& ts : cv.pooled.mer_by_type) ts.prf = {};
  for (auto& ts : cv.pooled.re_by_type) ts.prf = {};
  for (const auto& f : cv.folds) {
    add(cv.mer, f.mer);
    add(cv.mc, f.mc);
    add(cv.re, f.re);
    cv.pooled.mer += f.mer;
    cv.pooled.mc += f.mc;
    cv.pooled.re += f.re;
    cv.pooled.unreachable_gold += f.unreachable_gold;
    for (std::size_t i = 0; i < f.mer_by_type.size() && i < cv.pooled.mer_by_type.size(); ++i)
      cv.pooled.mer_by_type[i].prf += f.mer_by_type[i].prf;
    for (std::size_t i = 0; i < f.re_by_type.size() && i < cv.pooled.re_by_type.size(); ++i)
      cv.pooled.re_by_type[i].prf += f.re_by_type[i].prf;
  }
  const double k = static_cast<double>(cv.folds.size());
  for (MacroScore* m : {&cv.mer, &cv.mc, &cv.re}) {
    m->precision /= k;
    m->recall /= k;
    m->f1 /= k;
  }
  return cv;
}

std::string format_report(const EvalReport& r) {
  std::string out = header("stage");
  out += row("MER", r.mer);
  out += row("MC", r.mc);
  out += row("RE", r.re);
  out += '\n' + header("entity");
  for (const auto& ts : r.mer_by_type) out += row(ts.type, ts.prf);
  out += '\n' + header("relation");
  for (const auto& ts : r.re_by_type) out += row(ts.type, ts.prf);
  out += "\ncandidate window " + std::to_string(r.window) + " tokens, unreachable gold relations " +
         std::to_string(r.unreachable_gold) + '\n';
  return out;
}

std::string format_report_tsv(const EvalReport& r) {
  std::string out = "section\tname\ttp\tfp\tfn\tprecision\trecall\tf1\n";
  out += tsv_row("stage", "MER", r.mer);
  out += tsv_row("stage", "MC", r.mc);
  out += tsv_row("stage", "RE", r.re);
  for (const auto& ts : r.mer_by_type) out += tsv_row("entity", ts.type, ts.prf);
  for (const auto& ts : r.re_by_type) out += tsv_row("relation", ts.type, ts.prf);
  out += "window\t" + std::to_string(r.window) + "\t\t\t\t\t\t\n";
  out += "unreachable\t" + std::to_string(r.unreachable_gold) + "\t\t\t\t\t\t\n";
  return out;
}

std::string format_cv_report(const CvReport& cv) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %8s %8s %8s\n", "fold", "MER", "MC", "RE");
  out += buf;
  for (std::size_t i = 0; i < cv.folds.size(); ++i) {
    const auto& f = cv.folds[i];
    std::snprintf(buf, sizeof buf, "%-6zu %8s %8s %8s\n", i + 1, cell(f.mer.f1()).c_str(),
                  cell(f.mc.f1()).c_str(), cell(f.re.f1()).c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-6s %8s %8s %8s\n", "macro", cell(cv.mer.f1).c_str(),
                cell(cv.mc.f1).c_str(), cell(cv.re.f1).c_str());
  out += buf;
  out += "\npooled counts\n" + format_report(cv.pooled);
  return out;
}

}  // namespace clinie
