#include "clinie/pipeline.h"

#include <ostream>

#include "clinie/errors.h"

namespace clinie {

namespace {

Checkpoint load_for(const std::string& dir, const Schema& schema, Stage stage) {
  Checkpoint ck = load_checkpoint(dir);
  check_compatible(ck, schema, stage);
  return ck;
}

Corpus without_relations(const Corpus& corpus) {
  Corpus out = corpus;
  for (auto& d : out.documents) d.relations.clear();
  return out;
}

}  // namespace

Document Pipeline::annotate(const Document& doc) const {
  Document out = mer.annotate(doc.unannotated());
  out = mc.annotate(out);
  return re.annotate(out);
}

Corpus Pipeline::annotate(const Corpus& corpus) const {
  Corpus out;
  out.documents.reserve(corpus.size());
  for (const auto& d : corpus.documents) out.documents.push_back(annotate(d));
  return out;
}

Pipeline make_pipeline(const Checkpoint& mer, const Checkpoint& mc, const Checkpoint& re) {
  if (mer.fingerprint_hex() != mc.fingerprint_hex() || mer.fingerprint_hex() != re.fingerprint_hex()) {
    throw MismatchError("pipeline checkpoints were trained against different schemas");
  }
  return {make_tagger(mer), make_modality_classifier(mc), make_relation_extractor(re)};
}

Pipeline load_pipeline(const std::string& mer_dir, const std::string& mc_dir,
                       const std::string& re_dir, const Schema& schema) {
  return make_pipeline(load_for(mer_dir, schema, Stage::kMer), load_for(mc_dir, schema, Stage::kMc),
                       load_for(re_dir, schema, Stage::kRe));
}

CvResult cross_validate(const Corpus& corpus, const Schema& schema, const CvOptions& options,
                        std::ostream* progress) {
  CvResult result;
  result.plan = make_folds(corpus, options.folds, options.seed, options.dev_fraction);
  std::vector<EvalReport> reports;
  for (int f = 0; f < options.folds; ++f) {
    const FoldSplit split = result.plan.split(corpus, f);
    if (progress) {
      *progress << "fold " << f + 1 << ": train " << split.train.size() << " dev "
                << split.dev.size() << " test " << split.test.size() << '\n';
    }
    FoldOutcome fold{
        train_stage(split.train, split.dev, schema, options.mer.model, options.mer.train, progress),
        train_stage(split.train, split.dev, schema, options.mc.model, options.mc.train, progress),
        {},
        {},
        {}};
    const Corpus re_train =
        options.re_subset ? subset_train(split.train, *options.re_subset, options.seed + f) : split.train;
    fold.re = train_stage(re_train, split.dev, schema, options.re.model, options.re.train, progress);
    fold.predictions = make_pipeline(fold.mer, fold.mc, fold.re).annotate(split.test);
    fold.report = evaluate(fold.predictions, split.test, schema, options.re.model.window);
    if (progress) {
      *progress << "fold " << f + 1 << " MER " << fold.report.mer.f1() << " MC "
                << fold.report.mc.f1() << " RE " << fold.report.re.f1() << '\n';
    }
    reports.push_back(fold.report);
    result.folds.push_back(std::move(fold));
  }
  result.report = aggregate_folds(std::move(reports));
  return result;
}

CvResult retrain_relations(const Corpus& corpus, const Schema& schema, const CvOptions& options,
                           const CvResult& base, std::ostream* progress) {
  CvResult result;
  result.plan = base.plan;
  std::vector<EvalReport> reports;
  for (int f = 0; f < static_cast<int>(base.folds.size()); ++f) {
    const FoldSplit split = result.plan.split(corpus, f);
    const FoldOutcome& prior = base.folds[f];
    const Corpus re_train =
        options.re_subset ? subset_train(split.train, *options.re_subset, options.seed + f) : split.train;
    if (progress) {
      *progress << "fold " << f + 1 << ": relation training on " << re_train.size() << " documents\n";
    }
    FoldOutcome fold{prior.mer, prior.mc,
                     train_stage(re_train, split.dev, schema, options.re.model, options.re.train, progress),
                     {}, {}};
    const RelationExtractor re = make_relation_extractor(fold.re);
    for (const auto& d : without_relations(prior.predictions).documents) {
      fold.predictions.documents.push_back(re.annotate(d));
    }
    fold.report = evaluate(fold.predictions, split.test, schema, options.re.model.window);
    reports.push_back(fold.report);
    result.folds.push_back(std::move(fold));
  }
  result.report = aggregate_folds(std::move(reports));
  return result;
}

}  // namespace clinie
