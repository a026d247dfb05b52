// Token vocabulary and the contextual sentence encoders that turn a token
// sequence into one hidden row per token.

#ifndef CLINIE_ENCODER_H_
#define CLINIE_ENCODER_H_

#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinie/autodiff.h"
#include "clinie/document.h"

namespace clinie {

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();

  int add(std::string_view token);
  // kUnk for unknown tokens.
  int index(std::string_view token) const;
  bool contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }
  const std::string& token(int index) const { return tokens_.at(index); }
  int size() const { return static_cast<int>(tokens_.size()); }
  int min_freq() const { return min_freq_; }
  void set_min_freq(int f) { min_freq_ = f; }

  std::vector<int> encode(const Document& doc) const;

  // One token per line after a "min_freq <n>" header.
  std::string serialize() const;
  static Vocab parse(std::string_view text);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int min_freq_ = 1;
};

// Tokens with frequency >= min_freq, in byte order after the reserved
// entries.
Vocab build_vocab(const Corpus& corpus, int min_freq);

enum class EncoderKind { kRecurrent, kSelfAttention, kPrecomputed };

std::string_view encoder_kind_name(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kRecurrent;
  int embed_dim = 32;
  int hidden_dim = 32;
  int layers = 1;
  int heads = 2;           // self-attention only
  double dropout = 0.0;    // [0, 1)
  std::string vectors_path;  // precomputed only

  void validate() const;
};

// Per-token vectors keyed by (doc_id, token index). File records:
//   doc_id<TAB>token_index<TAB>v1 v2 ... vh
class PrecomputedVectors {
 public:
  static std::shared_ptr<const PrecomputedVectors> load(const std::string& path);
  static std::shared_ptr<const PrecomputedVectors> parse(std::string_view text);

  void add(const std::string& doc_id, int token_index, std::vector<double> values);
  const std::vector<double>* find(const std::string& doc_id, int token_index) const;
  int dim() const { return dim_; }

 private:
  std::map<std::pair<std::string, int>, std::vector<double>> vectors_;
  int dim_ = 0;
};

struct EncodeInput {
  std::string doc_id;
  std::vector<int> token_ids;
};

EncodeInput make_encode_input(const Document& doc, const Vocab& vocab);

// Stateless apart from configuration; parameters live in the caller's
// ParamSet under `prefix`.
class Encoder {
 public:
  Encoder() = default;
  Encoder(EncoderConfig config, std::string prefix = "enc.");

  const EncoderConfig& config() const { return config_; }
  int output_dim() const;

  void set_vectors(std::shared_ptr<const PrecomputedVectors> vectors);

  // Uniform(-0.1, 0.1) embeddings, orthogonal recurrent blocks, scaled
  // normal attention projections.
  void init_params(ad::ParamSet& params, int vocab_size, std::mt19937_64& rng) const;

  // n x output_dim. Dropout applies only when the tape is in training mode.
  ad::Var encode(ad::Tape& tape, ad::ParamSet& params, const EncodeInput& input) const;
  // Inference convenience (no dropout).
  Matrix encode(const ad::ParamSet& params, const EncodeInput& input) const;

 private:
  ad::Var encode_recurrent(ad::Tape& tape, ad::ParamSet& params, const EncodeInput& input) const;
  ad::Var encode_attention(ad::Tape& tape, ad::ParamSet& params, const EncodeInput& input) const;
  ad::Var encode_precomputed(ad::Tape& tape, const EncodeInput& input) const;

  EncoderConfig config_;
  std::string prefix_ = "enc.";
  std::shared_ptr<const PrecomputedVectors> vectors_;
};

// Runs backward from a scalar loss and returns the L2 norm of the gradient.
// Throws TrainingError if the loss is not finite.
double parameter_gradients(ad::Tape& tape, ad::Var loss, ad::ParamSet& params);

// Random matrix with orthonormal columns (rows >= cols) or rows.
Matrix random_orthogonal(int rows, int cols, std::mt19937_64& rng);

}  // namespace clinie

#endif  // CLINIE_ENCODER_H_
