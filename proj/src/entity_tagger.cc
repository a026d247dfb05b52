#include "clinie/entity_tagger.h"

#include <algorithm>

#include "clinie/errors.h"
#include "clinie/instrumentation.h"

namespace clinie {

PredictionCounters& prediction_counters() {
  static PredictionCounters counters;
  return counters;
}

namespace {

const char* kEmitW = "ner.emit.w";
const char* kEmitB = "ner.emit.b";
const char* kTrans = "ner.trans";

}  // namespace

EntityTagger::EntityTagger(Schema schema, TaggerConfig config, Vocab vocab, std::uint64_t seed)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      vocab_(std::move(vocab)),
      tagset_(schema_),
      encoder_(config_.encoder, "ner.enc.") {
  std::mt19937_64 rng(seed);
  encoder_.init_params(params_, vocab_.size(), rng);
  const int h = config_.encoder.hidden_dim, T = tagset_.size();
  Matrix w(h, T);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (double& v : w.data()) v = dist(rng);
  params_.add(kEmitW, std::move(w));
  params_.add(kEmitB, Matrix(1, T));
  params_.add(kTrans, Matrix(T + 2, T + 2));
  init_mask();
}

EntityTagger::EntityTagger(Schema schema, TaggerConfig config, Vocab vocab, ad::ParamSet params)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      vocab_(std::move(vocab)),
      tagset_(schema_),
      encoder_(config_.encoder, "ner.enc."),
      params_(std::move(params)) {
  const int T = tagset_.size();
  const Matrix& tr = params_.get(kTrans).value;
  if (tr.rows() != T + 2 || tr.cols() != T + 2 ||
      params_.get(kEmitW).value.cols() != T) {
    throw ModelError("entity tagger parameters do not match the schema tag set");
  }
  init_mask();
}

void EntityTagger::init_mask() {
  ad::Param& trans = params_.get(kTrans);
  Matrix mask = tagset_.transition_mask();
  trans.frozen.assign(mask.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data()[i] != 0.0) {
      trans.value.data()[i] = kIllegalTransition;
      trans.frozen[i] = 1;
    }
  }
}

ad::Var EntityTagger::emission_scores(ad::Tape& tape, const Document& doc) {
  ad::Var h = encoder_.encode(tape, params_, make_encode_input(doc, vocab_));
  return ad::add_row(ad::matmul(h, ad::param(tape, params_.get(kEmitW))),
                     ad::param(tape, params_.get(kEmitB)));
}

Matrix EntityTagger::emission_scores(const Document& doc) const {
  Matrix h = encoder_.encode(params_, make_encode_input(doc, vocab_));
  return emissions(h, params_.get(kEmitW).value, params_.get(kEmitB).value);
}

ad::Var EntityTagger::loss(ad::Tape& tape, const Document& gold) {
  if (gold.tokens.empty()) return ad::constant(tape, Matrix(1, 1));
  std::vector<TypedSpan> spans;
  for (const auto& e : gold.entities) spans.push_back({e.type, e.span});
  std::vector<int> tags = entities_to_tags(spans, static_cast<int>(gold.tokens.size()), tagset_);
  ad::Var em = emission_scores(tape, gold);
  ad::Var trans = ad::param(tape, params_.get(kTrans));
  std::vector<ad::Var> parts;
  for (const TokenSpan& line : gold.line_segments()) {
    ad::Var seg = ad::slice_rows(em, line.start, line.end);
    std::span<const int> y(tags.data() + line.start, line.size());
    parts.push_back(config_.use_crf ? crf_nll(seg, trans, y) : ad::softmax_cross_entropy(seg, y));
  }
  return ad::sum(ad::concat_rows(parts));
}

std::vector<int> EntityTagger::decode(const Document& doc) const {
  if (doc.tokens.empty()) return {};
  Matrix em = emission_scores(doc);
  const Matrix& trans = params_.get(kTrans).value;
  std::vector<int> tags(doc.tokens.size(), 0);
  for (const TokenSpan& line : doc.line_segments()) {
    Matrix seg(line.size(), em.cols());
    std::copy_n(em.row(line.start).data(), seg.size(), seg.data().begin());
    std::vector<int> y;
    if (config_.use_crf) {
      y = viterbi_decode(seg, trans);
    } else {
      for (int t = 0; t < seg.rows(); ++t) {
        auto row = seg.row(t);
        y.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
      }
      y = repair_tags(y, tagset_);
    }
    std::copy(y.begin(), y.end(), tags.begin() + line.start);
  }
  return tags;
}

Document EntityTagger::annotate(const Document& doc) const {
  ++prediction_counters().entity_predictions;
  Document out = doc.unannotated();
  int next_id = 1;
  for (const auto& span : tags_to_entities(decode(doc), tagset_)) {
    out.entities.push_back({next_id++, span.type, span.span, schema_.default_modality()});
  }
  return out;
}

}  // namespace clinie
