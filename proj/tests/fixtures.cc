#include "fixtures.h"

#include "clinie/entity_tagger.h"
#include "clinie/modality.h"
#include "clinie/relation.h"
#include "clinie/synth.h"

namespace fixtures {

using namespace clinie;

Document small_document(std::uint64_t seed) {
  GenConfig cfg;
  cfg.n_documents = 1;
  cfg.patients = 1;
  cfg.seed = seed;
  cfg.lexicon_size = 3;
  cfg.min_relations = 1;
  cfg.max_relations = 2;
  cfg.max_distractors = 1;
  cfg.cross_sentence_fraction = 0.3;
  return generate(cfg).corpus.documents.front();
}

std::vector<GradCase> gradient_configuration(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const Document doc = small_document(seed);
  Corpus corpus;
  corpus.documents.push_back(doc);
  const Vocab vocab = build_vocab(corpus, 1);
  const Schema& schema = Schema::default_schema();

  EncoderConfig enc;
  enc.kind = pick(0, 1) ? EncoderKind::kSelfAttention : EncoderKind::kRecurrent;
  enc.embed_dim = pick(3, 6);
  enc.hidden_dim = 2 * pick(2, 3);
  enc.heads = enc.kind == EncoderKind::kSelfAttention ? (pick(0, 1) ? 2 : 1) : 1;
  enc.layers = pick(1, 2);
  const bool crf = pick(0, 3) != 0;
  const std::string detail = std::string(encoder_kind_name(enc.kind)) + " embed=" +
                             std::to_string(enc.embed_dim) + " hidden=" +
                             std::to_string(enc.hidden_dim) + " layers=" +
                             std::to_string(enc.layers) + (crf ? " crf" : " softmax");
  std::vector<GradCase> out;

  {
    Encoder encoder(enc);
    ad::ParamSet params;
    encoder.init_params(params, vocab.size(), rng);
    const EncodeInput in = make_encode_input(doc, vocab);
    Matrix weights(static_cast<int>(in.token_ids.size()), enc.hidden_dim);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& w : weights.data()) w = g(rng);
    auto loss = [&](ad::Tape& tape) {
      return ad::sum(ad::mul(encoder.encode(tape, params, in), ad::constant(tape, weights)));
    };
    out.push_back({"encoder", detail, oracle::check_gradients(params, loss, rng)});
  }
  {
    EntityTagger tagger(schema, {enc, crf}, vocab, seed + 1);
    auto loss = [&](ad::Tape& tape) { return tagger.loss(tape, doc); };
    out.push_back({"ner_crf", detail, oracle::check_gradients(tagger.params(), loss, rng)});
  }
  {
    ModalityClassifier mc(schema, {enc, pick(2, 5)}, vocab, seed + 2);
    auto loss = [&](ad::Tape& tape) { return mc.loss(tape, doc); };
    out.push_back({"modality_clf", detail, oracle::check_gradients(mc.params(), loss, rng)});
  }
  {
    RelationConfig rc;
    rc.encoder = enc;
    rc.type_dim = pick(2, 4);
    rc.modality_dim = pick(2, 4);
    rc.pair_dim = pick(3, 6);
    RelationExtractor re(schema, rc, vocab, seed + 3);
    auto loss = [&](ad::Tape& tape) { return re.loss(tape, doc).loss; };
    out.push_back({"relation_extractor", detail, oracle::check_gradients(re.params(), loss, rng)});
  }
  return out;
}

MetricFixture random_metric_fixture(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const std::vector<std::string> types{"D", "A", "TIMEX3"};
  const std::vector<std::string> mods{"positive", "negative"};
  const std::vector<std::string> rels{"region", "feature", "on"};
  MetricFixture f;
  const int docs = pick(1, 4);
  for (int d = 0; d < docs; ++d) {
    std::string text;
    const int n = pick(4, 12);
    for (int i = 0; i < n; ++i) text += (i ? " w" : "w") + std::to_string(i);
    Document base = make_document("d" + std::to_string(d), "p", text);
    auto random_doc = [&](const Document* like) {
      Document doc = base;
      int pos = 0, id = 1;
      while (pos < n) {
        const int len = pick(1, 2);
        if (pos + len <= n && pick(0, 2) > 0) {
          doc.entities.push_back({id++, types[pick(0, 2)], {pos, pos + len}, mods[pick(0, 1)]});
        }
        pos += len;
      }
      // Predictions copy part of the gold entities to create true positives.
      if (like) {
        for (const auto& e : like->entities) {
          if (pick(0, 2) == 0) continue;
          bool clash = false;
          for (const auto& o : doc.entities)
            clash = clash || (o.span.start < e.span.end && e.span.start < o.span.end);
          if (!clash) doc.entities.push_back({id++, e.type, e.span, pick(0, 3) ? e.modality : mods[pick(0, 1)]});
        }
      }
      const int m = static_cast<int>(doc.entities.size());
      for (int k = 0; m >= 2 && k < pick(0, 5); ++k) {
        const int a = pick(0, m - 1), b = pick(0, m - 1);
        if (a == b) continue;
        doc.relations.push_back({doc.entities[a].id, doc.entities[b].id, rels[pick(0, 2)],
                                 RelationCategory::kMedical});
      }
      if (like) {
        for (const auto& r : like->relations) {
          if (pick(0, 1) == 0) continue;
          const Entity* s = like->find_entity(r.source_id);
          const Entity* t = like->find_entity(r.target_id);
          int sid = 0, tid = 0;
          for (const auto& e : doc.entities) {
            if (e.span == s->span && e.type == s->type) sid = e.id;
            if (e.span == t->span && e.type == t->type) tid = e.id;
          }
          if (sid && tid) doc.relations.push_back({sid, tid, r.type, r.category});
        }
      }
      return doc;
    };
    Document gold = random_doc(nullptr);
    Document pred = random_doc(&gold);
    f.gold.documents.push_back(std::move(gold));
    f.pred.documents.push_back(std::move(pred));
  }
  return f;
}

}  // namespace fixtures
