#include "clinie/encoder.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "clinie/errors.h"

namespace clinie {

std::string_view encoder_kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kRecurrent: return "recurrent";
    case EncoderKind::kSelfAttention: return "self_attention";
    case EncoderKind::kPrecomputed: return "precomputed";
  }
  return "recurrent";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "recurrent") return EncoderKind::kRecurrent;
  if (name == "self_attention") return EncoderKind::kSelfAttention;
  if (name == "precomputed") return EncoderKind::kPrecomputed;
  throw ModelError("unknown encoder kind '" + std::string(name) + "'");
}

void EncoderConfig::validate() const {
  if (embed_dim <= 0 || hidden_dim <= 0 || layers <= 0 || heads <= 0) {
    throw ModelError("encoder dimensions must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ModelError("encoder dropout must lie in [0, 1)");
  if (kind == EncoderKind::kRecurrent && hidden_dim % 2 != 0) {
    throw ModelError("recurrent encoder needs an even hidden_dim");
  }
  if (kind == EncoderKind::kSelfAttention && hidden_dim % heads != 0) {
    throw ModelError("self-attention hidden_dim must be divisible by heads");
  }
}

std::shared_ptr<const PrecomputedVectors> PrecomputedVectors::parse(std::string_view text) {
  auto out = std::make_shared<PrecomputedVectors>();
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab1 = line.find('\t');
    auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw ParseError("vector record needs doc_id<TAB>token_index<TAB>values", line_no, 1);
    }
    std::string doc_id = line.substr(0, tab1);
    int index = 0;
    try {
      index = std::stoi(line.substr(tab1 + 1, tab2 - tab1 - 1));
    } catch (const std::exception&) {
      throw ParseError("bad token index in vector record", line_no, static_cast<int>(tab1) + 2);
    }
    std::istringstream values(line.substr(tab2 + 1));
    std::vector<double> v;
    double x;
    while (values >> x) v.push_back(x);
    if (!values.eof()) throw ParseError("non-numeric vector component", line_no, 1);
    out->add(doc_id, index, std::move(v));
  }
  return out;
}

std::shared_ptr<const PrecomputedVectors> PrecomputedVectors::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot read vector file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void PrecomputedVectors::add(const std::string& doc_id, int token_index, std::vector<double> values) {
  if (values.empty()) throw ParseError("empty vector for " + doc_id + ":" + std::to_string(token_index));
  if (dim_ == 0) dim_ = static_cast<int>(values.size());
  if (static_cast<int>(values.size()) != dim_) {
    throw ParseError("vector for " + doc_id + ":" + std::to_string(token_index) + " has " +
                     std::to_string(values.size()) + " components, expected " + std::to_string(dim_));
  }
  vectors_[{doc_id, token_index}] = std::move(values);
}

const std::vector<double>* PrecomputedVectors::find(const std::string& doc_id, int token_index) const {
  auto it = vectors_.find({doc_id, token_index});
  return it == vectors_.end() ? nullptr : &it->second;
}

Matrix random_orthogonal(int rows, int cols, std::mt19937_64& rng) {
  // Gram-Schmidt on the longer dimension.
  const bool tall = rows >= cols;
  const int n = tall ? cols : rows, len = tall ? rows : cols;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  while (static_cast<int>(basis.size()) < n) {
    std::vector<double> v(len);
    for (double& x : v) x = normal(rng);
    for (const auto& b : basis) {
      double dot = 0.0;
      for (int i = 0; i < len; ++i) dot += v[i] * b[i];
      for (int i = 0; i < len; ++i) v[i] -= dot * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  Matrix m(rows, cols);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < len; ++i) (tall ? m(i, k) : m(k, i)) = basis[k][i];
  return m;
}

namespace {

Matrix uniform(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

Matrix scaled_normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(rows)));
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  return uniform(rows, cols, std::sqrt(6.0 / (rows + cols)), rng);
}

Matrix sinusoidal_positions(int n, int d) {
  Matrix pe(n, d);
  for (int pos = 0; pos < n; ++pos) {
    for (int i = 0; i < d; ++i) {
      double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d);
      pe(pos, i) = i % 2 == 0 ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

}  // namespace

Encoder::Encoder(EncoderConfig config, std::string prefix)
    : config_(std::move(config)), prefix_(std::move(prefix)) {
  config_.validate();
}

int Encoder::output_dim() const {
  if (config_.kind == EncoderKind::kPrecomputed && vectors_) return vectors_->dim();
  return config_.hidden_dim;
}

void Encoder::set_vectors(std::shared_ptr<const PrecomputedVectors> vectors) {
  if (vectors && vectors->dim() != 0 && vectors->dim() != config_.hidden_dim) {
    throw ModelError("vector file has dimension " + std::to_string(vectors->dim()) +
                     " but the encoder expects " + std::to_string(config_.hidden_dim));
  }
  vectors_ = std::move(vectors);
}

void Encoder::init_params(ad::ParamSet& params, int vocab_size, std::mt19937_64& rng) const {
  const auto& c = config_;
  if (c.kind == EncoderKind::kPrecomputed) return;
  params.add(prefix_ + "emb", uniform(vocab_size, c.embed_dim, 0.1, rng));
  if (c.kind == EncoderKind::kRecurrent) {
    const int h = c.hidden_dim / 2;
    for (int l = 0; l < c.layers; ++l) {
      const int in = l == 0 ? c.embed_dim : c.hidden_dim;
      for (const char* dir : {"fwd", "bwd"}) {
        std::string base = prefix_ + "l" + std::to_string(l) + "." + dir + ".";
        params.add(base + "wx", glorot(in, 4 * h, rng));
        Matrix wh(h, 4 * h);
        for (int g = 0; g < 4; ++g) {
          Matrix block = random_orthogonal(h, h, rng);
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < h; ++j) wh(i, g * h + j) = block(i, j);
        }
        params.add(base + "wh", std::move(wh));
        Matrix b(1, 4 * h);
        for (int j = h; j < 2 * h; ++j) b(0, j) = 1.0;  // forget gate
        params.add(base + "b", std::move(b));
      }
    }
  } else {
    const int d = c.hidden_dim;
    if (c.embed_dim != d) params.add(prefix_ + "in_proj", scaled_normal(c.embed_dim, d, rng));
    for (int l = 0; l < c.layers; ++l) {
      std::string base = prefix_ + "l" + std::to_string(l) + ".";
      for (const char* w : {"wq", "wk", "wv", "wo"}) params.add(base + w, scaled_normal(d, d, rng));
      params.add(base + "bo", Matrix(1, d));
      params.add(base + "ln1.g", Matrix(1, d, 1.0));
      params.add(base + "ln1.b", Matrix(1, d));
      params.add(base + "ff1", scaled_normal(d, 2 * d, rng));
      params.add(base + "ff1.b", Matrix(1, 2 * d));
      params.add(base + "ff2", scaled_normal(2 * d, d, rng));
      params.add(base + "ff2.b", Matrix(1, d));
      params.add(base + "ln2.g", Matrix(1, d, 1.0));
      params.add(base + "ln2.b", Matrix(1, d));
    }
  }
}

ad::Var Encoder::encode(ad::Tape& tape, ad::ParamSet& params, const EncodeInput& input) const {
  if (input.token_ids.empty()) throw ModelError("cannot encode an empty token sequence");
  switch (config_.kind) {
    case EncoderKind::kRecurrent: return encode_recurrent(tape, params, input);
    case EncoderKind::kSelfAttention: return encode_attention(tape, params, input);
    case EncoderKind::kPrecomputed: return encode_precomputed(tape, input);
  }
  throw ModelError("unknown encoder kind");
}

Matrix Encoder::encode(const ad::ParamSet& params, const EncodeInput& input) const {
  ad::Tape tape(false);
  // The inference tape never runs backward, so parameters are only read.
  auto& mutable_params = const_cast<ad::ParamSet&>(params);
  return encode(tape, mutable_params, input).value();
}

namespace {

void check_ids(const ad::Param& emb, const EncodeInput& input) {
  for (std::size_t i = 0; i < input.token_ids.size(); ++i) {
    int id = input.token_ids[i];
    if (id < 0 || id >= emb.value.rows()) {
      throw ModelError("token index " + std::to_string(id) + " at position " + std::to_string(i) +
                       " is outside the vocabulary of size " + std::to_string(emb.value.rows()));
    }
  }
}

ad::Var run_direction(ad::Tape& tape, ad::Var x, ad::ParamSet& params, const std::string& base,
                      bool reverse) {
  ad::Var wh = ad::param(tape, params.get(base + "wh"));
  const int h = wh.rows();
  ad::Var xp = ad::add_row(ad::matmul(x, ad::param(tape, params.get(base + "wx"))),
                           ad::param(tape, params.get(base + "b")));
  const int n = x.rows();
  ad::Var hidden = ad::constant(tape, Matrix(1, h));
  ad::Var cell = ad::constant(tape, Matrix(1, h));
  std::vector<ad::Var> outputs(n);
  for (int step = 0; step < n; ++step) {
    const int t = reverse ? n - 1 - step : step;
    ad::Var gates = ad::add(ad::slice_rows(xp, t, t + 1), ad::matmul(hidden, wh));
    ad::Var hc = ad::lstm_cell(gates, cell);
    hidden = ad::slice_cols(hc, 0, h);
    cell = ad::slice_cols(hc, h, 2 * h);
    outputs[t] = hidden;
  }
  return ad::concat_rows(outputs);
}

}  // namespace

ad::Var Encoder::encode_recurrent(ad::Tape& tape, ad::ParamSet& params, const EncodeInput& input) const {
  ad::Param& emb = params.get(prefix_ + "emb");
  check_ids(emb, input);
  ad::Var x = ad::dropout(ad::embedding(tape, emb, input.token_ids), config_.dropout);
  for (int l = 0; l < config_.layers; ++l) {
    std::string base = prefix_ + "l" + std::to_string(l) + ".";
    ad::Var parts[] = {run_direction(tape, x, params, base + "fwd.", false),
                       run_direction(tape, x, params, base + "bwd.", true)};
    x = ad::dropout(ad::concat_cols(parts), config_.dropout);
  }
  return x;
}

ad::Var Encoder::encode_attention(ad::Tape& tape, ad::ParamSet& params, const EncodeInput& input) const {
  ad::Param& emb = params.get(prefix_ + "emb");
  check_ids(emb, input);
  const int n = static_cast<int>(input.token_ids.size());
  const int d = config_.hidden_dim;
  const int heads = config_.heads;
  const int dh = d / heads;
  ad::Var x = ad::embedding(tape, emb, input.token_ids);
  if (config_.embed_dim != d) x = ad::matmul(x, ad::param(tape, params.get(prefix_ + "in_proj")));
  x = ad::dropout(ad::add(x, ad::constant(tape, sinusoidal_positions(n, d))), config_.dropout);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = 0; l < config_.layers; ++l) {
    std::string base = prefix_ + "l" + std::to_string(l) + ".";
    auto p = [&](const char* name) { return ad::param(tape, params.get(base + name)); };
    ad::Var q = ad::matmul(x, p("wq"));
    ad::Var k = ad::matmul(x, p("wk"));
    ad::Var v = ad::matmul(x, p("wv"));
    std::vector<ad::Var> head_out;
    for (int h = 0; h < heads; ++h) {
      ad::Var qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
      ad::Var kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
      ad::Var vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
      ad::Var attn = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt));
      head_out.push_back(ad::matmul(attn, vh));
    }
    ad::Var mixed = ad::add_row(ad::matmul(ad::concat_cols(head_out), p("wo")), p("bo"));
    x = ad::layer_norm(ad::add(x, ad::dropout(mixed, config_.dropout)), p("ln1.g"), p("ln1.b"));
    ad::Var ff = ad::tanh(ad::add_row(ad::matmul(x, p("ff1")), p("ff1.b")));
    ff = ad::add_row(ad::matmul(ff, p("ff2")), p("ff2.b"));
    x = ad::layer_norm(ad::add(x, ad::dropout(ff, config_.dropout)), p("ln2.g"), p("ln2.b"));
  }
  return x;
}

ad::Var Encoder::encode_precomputed(ad::Tape& tape, const EncodeInput& input) const {
  if (!vectors_) throw ModelError("precomputed encoder has no vector file loaded");
  const int n = static_cast<int>(input.token_ids.size());
  Matrix h(n, vectors_->dim());
  for (int t = 0; t < n; ++t) {
    const auto* v = vectors_->find(input.doc_id, t);
    if (!v) {
      throw ModelError("no precomputed vector for token " + std::to_string(t) + " of document '" +
                       input.doc_id + "'");
    }
    std::copy(v->begin(), v->end(), h.row(t).begin());
  }
  return ad::constant(tape, std::move(h));
}

double parameter_gradients(ad::Tape& tape, ad::Var loss, ad::ParamSet& params) {
  if (!std::isfinite(loss.scalar())) throw TrainingError("loss is not finite");
  tape.backward(loss);
  double norm = params.grad_norm();
  if (!std::isfinite(norm)) throw TrainingError("gradient is not finite");
  return norm;
}

}  // namespace clinie
