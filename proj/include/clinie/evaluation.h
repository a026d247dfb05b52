// Exact-match micro precision/recall/F1 for each pipeline stage.
//
//   MER  key (span, type)
//   MC   key (span, type, modality)
//   RE   key (source span, source type, relation, target span, target type)
//
// Matching is one-to-one per document (multiset intersection of keys).

#ifndef CLINIE_EVALUATION_H_
#define CLINIE_EVALUATION_H_

#include <string>
#include <vector>

#include "clinie/document.h"

namespace clinie {

struct Prf {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  long support() const { return tp + fn; }
  long predicted() const { return tp + fp; }
  double precision() const { return predicted() ? static_cast<double>(tp) / predicted() : 0.0; }
  double recall() const { return support() ? static_cast<double>(tp) / support() : 0.0; }
  // 2PR / (P + R), 0 when P + R = 0.
  double f1() const;

  Prf& operator+=(const Prf& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Prf&) const = default;
};

struct TypeScore {
  std::string type;
  Prf prf;
};

struct EvalReport {
  Prf mer;
  Prf mc;
  Prf re;
  std::vector<TypeScore> mer_by_type;  // schema entity order
  std::vector<TypeScore> re_by_type;   // schema relation order
  int window = 0;
  long unreachable_gold = 0;  // gold relations farther apart than the window
};

// Throws ValidationError unless both corpora hold the same documents (by
// id, over identical text).
void check_alignment(const Corpus& pred, const Corpus& gold);

Prf eval_mer(const Corpus& pred, const Corpus& gold);
Prf eval_mc(const Corpus& pred, const Corpus& gold);
Prf eval_re(const Corpus& pred, const Corpus& gold);

EvalReport evaluate(const Corpus& pred, const Corpus& gold, const Schema& schema,
                    int window = 128);

struct MacroScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Folds are macro-averaged for the headline numbers; `pooled` sums the
// per-fold counts.
struct CvReport {
  std::vector<EvalReport> folds;
  MacroScore mer;
  MacroScore mc;
  MacroScore re;
  EvalReport pooled;
};

CvReport aggregate_folds(std::vector<EvalReport> folds);

// Plain-text tables ("-" for zero-support rows) and tab-separated output.
std::string format_report(const EvalReport& report);
std::string format_report_tsv(const EvalReport& report);
std::string format_cv_report(const CvReport& report);

}  // namespace clinie

#endif  // CLINIE_EVALUATION_H_
