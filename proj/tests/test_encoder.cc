#include <doctest.h>

#include <random>

#include "clinie/encoder.h"
#include "clinie/errors.h"

using namespace clinie;

namespace {

EncodeInput input(std::vector<int> ids, std::string doc = "d") { return {std::move(doc), std::move(ids)}; }

Corpus corpus_of(std::initializer_list<const char*> texts) {
  Corpus c;
  int i = 0;
  for (const char* t : texts) c.documents.push_back(make_document("d" + std::to_string(i++), "p", t));
  return c;
}

}  // namespace

TEST_CASE("vocabulary building") {
  const Vocab v2 = build_vocab(corpus_of({"a a b"}), 2);
  CHECK(v2.contains("a"));
  CHECK_FALSE(v2.contains("b"));
  CHECK(v2.index("b") == Vocab::kUnk);
  const Vocab v1 = build_vocab(corpus_of({"a a b", "c"}), 1);
  CHECK(v1.size() == 5);
  CHECK(v1.index("a") == 2);
  CHECK(v1.index("c") == 4);
  CHECK(Vocab::parse(v1.serialize()) == v1);
  CHECK(Vocab::parse(v2.serialize()).min_freq() == 2);
}

TEST_CASE("encoder shapes, determinism and contextuality") {
  for (EncoderKind kind : {EncoderKind::kRecurrent, EncoderKind::kSelfAttention}) {
    CAPTURE(encoder_kind_name(kind));
    EncoderConfig cfg;
    cfg.kind = kind;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 8;
    cfg.heads = 2;
    Encoder enc(cfg);
    ad::ParamSet params;
    std::mt19937_64 rng(4);
    enc.init_params(params, 20, rng);
    for (int n : {1, 2, 7, 64}) {
      std::vector<int> ids(n);
      for (int i = 0; i < n; ++i) ids[i] = 2 + i % 18;
      const Matrix h = enc.encode(params, input(ids));
      CHECK(h.rows() == n);
      CHECK(h.cols() == 8);
      CHECK(h.all_finite());
      CHECK(enc.encode(params, input(ids)).data() == h.data());
    }
    std::vector<int> a{2, 3, 4, 5, 6, 7, 8, 9}, b = a;
    b[7] = 15;
    const Matrix ha = enc.encode(params, input(a)), hb = enc.encode(params, input(b));
    bool changed = false;
    for (int c = 0; c < 8; ++c) changed = changed || ha(0, c) != hb(0, c);
    CHECK(changed);
    CHECK_THROWS(enc.encode(params, input({2, 25})));
  }
}

TEST_CASE("precomputed vectors pass through") {
  auto vectors = PrecomputedVectors::parse("d\t0\t0.5 1.5\nd\t1\t-1 2\n");
  EncoderConfig cfg;
  cfg.kind = EncoderKind::kPrecomputed;
  cfg.hidden_dim = 2;
  Encoder enc(cfg);
  enc.set_vectors(vectors);
  ad::ParamSet params;
  std::mt19937_64 rng(1);
  enc.init_params(params, 4, rng);
  const Matrix h = enc.encode(params, input({2, 3}));
  CHECK(h(0, 1) == 1.5);
  CHECK(h(1, 0) == -1.0);
  try {
    enc.encode(params, input({2, 3, 2}));
    FAIL("missing vector accepted");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("gradient plumbing") {
  EncoderConfig cfg;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 4;
  Encoder enc(cfg);
  ad::ParamSet params;
  std::mt19937_64 rng(2);
  enc.init_params(params, 10, rng);

  // Constant loss: nothing to propagate.
  {
    params.zero_grad();
    ad::Tape tape(true);
    ad::Var c = ad::constant(tape, Matrix(1, 1, 3.0));
    CHECK(parameter_gradients(tape, c, params) == 0.0);
  }
  // Embedding rows of tokens not in the input get no gradient.
  params.zero_grad();
  ad::Tape tape(true);
  ad::Var loss = ad::sum(enc.encode(tape, params, input({2, 3, 2})));
  CHECK(parameter_gradients(tape, loss, params) > 0.0);
  const ad::Param& emb = params.get("enc.emb");
  for (int r = 0; r < emb.grad.rows(); ++r) {
    double norm = 0.0;
    for (int c = 0; c < emb.grad.cols(); ++c) norm += std::abs(emb.grad(r, c));
    if (r == 2 || r == 3) CHECK(norm > 0.0);
    else CHECK(norm == 0.0);
  }
  ad::Tape bad(true);
  ad::Var inf = ad::constant(bad, Matrix(1, 1, std::numeric_limits<double>::infinity()));
  CHECK_THROWS_AS(parameter_gradients(bad, inf, params), TrainingError);
}
