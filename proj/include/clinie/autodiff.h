// Reverse-mode differentiation over matrices.
//
// A Tape records every operation of one forward pass. Var is a cheap handle
// (tape pointer + node index). Trainable parameters live in a ParamSet and
// enter the tape through param() or embedding(); Tape::backward accumulates
// into Param::grad. Entries flagged in Param::frozen never receive gradient.

#ifndef CLINIE_AUTODIFF_H_
#define CLINIE_AUTODIFF_H_

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "clinie/matrix.h"

namespace clinie::ad {

class Param {
 public:
  Param(std::string name, Matrix value);

  const std::string& name() const { return name_; }
  Matrix value;
  Matrix grad;
  std::vector<char> frozen;  // empty, or one flag per entry

  bool is_frozen(std::size_t i) const { return !frozen.empty() && frozen[i]; }
  void zero_grad() { grad.fill(0.0); }

 private:
  std::string name_;
};

// Ordered, name-addressable collection of parameters.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet& other);
  ParamSet& operator=(const ParamSet& other);
  ParamSet(ParamSet&&) noexcept = default;
  ParamSet& operator=(ParamSet&&) noexcept = default;

  Param& add(const std::string& name, Matrix value);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  Param* find(const std::string& name);
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return *params_[i]; }
  const Param& operator[](std::size_t i) const { return *params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  double grad_norm() const;
  void scale_grad(double factor);
  // Copies values from another set with identical names and shapes.
  void assign_values(const ParamSet& other);
  bool same_values(const ParamSet& other) const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool training = false, std::mt19937_64* rng = nullptr)
      : training_(training), rng_(rng) {}

  bool training() const { return training_; }
  std::mt19937_64* rng() const { return rng_; }

  // Adds a node. `inputs` decides whether the node needs a gradient.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var push(Matrix value, std::span<const Var> inputs, Backward backward);
  Var leaf(Matrix value, bool requires_grad, Backward backward);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient buffer, allocated on first use.
  Matrix& grad(int id);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 node and propagates.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool training_;
  std::mt19937_64* rng_;
};

Var constant(Tape& tape, Matrix value);
Var param(Tape& tape, Param& p);
// Rows of `table` selected by ids; gradient scatters back into those rows.
Var embedding(Tape& tape, Param& table, std::span<const int> ids);

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);  // broadcasts a 1 x c row over every row of a
Var scale(Var a, double s);
Var tanh(Var a);
Var sigmoid(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, int begin, int end);
Var slice_cols(Var a, int begin, int end);
Var sum_rows(Var a, int begin, int end);  // 1 x c
Var gather_rows(Var a, std::span<const int> rows);
Var transpose(Var a);
Var softmax_rows(Var a);
Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);
// Inverted dropout; identity unless the tape is in training mode.
Var dropout(Var a, double rate);
Var sum(Var a);  // 1 x 1

// Fused LSTM cell. gates: 1 x 4h laid out [input, forget, cell, output];
// returns 1 x 2h = [h_t, c_t].
Var lstm_cell(Var gates, Var c_prev);

// Sum over rows of -log softmax(logits)[gold]; 1 x 1.
Var softmax_cross_entropy(Var logits, std::span<const int> gold);
// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets; 1 x 1.
Var bce_with_logits(Var logits, const Matrix& targets);

}  // namespace clinie::ad

#endif  // CLINIE_AUTODIFF_H_
