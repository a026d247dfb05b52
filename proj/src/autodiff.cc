#include "clinie/autodiff.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clinie::ad {

Param::Param(std::string name, Matrix v)
    : value(std::move(v)), grad(value.rows(), value.cols()), name_(std::move(name)) {}

ParamSet::ParamSet(const ParamSet& other) {
  for (const auto& p : other.params_) params_.push_back(std::make_unique<Param>(*p));
}

ParamSet& ParamSet::operator=(const ParamSet& other) {
  if (this != &other) {
    params_.clear();
    for (const auto& p : other.params_) params_.push_back(std::make_unique<Param>(*p));
  }
  return *this;
}

Param& ParamSet::add(const std::string& name, Matrix value) {
  if (contains(name)) throw std::logic_error("duplicate parameter " + name);
  params_.push_back(std::make_unique<Param>(name, std::move(value)));
  return *params_.back();
}

Param* ParamSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name() == name) return p.get();
  }
  return nullptr;
}

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const auto& p) { return p->name() == name; });
}

Param& ParamSet::get(const std::string& name) {
  Param* p = find(name);
  if (!p) throw std::out_of_range("no parameter named " + name);
  return *p;
}

const Param& ParamSet::get(const std::string& name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

double ParamSet::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      if (!p->is_frozen(i)) s += p->grad.data()[i] * p->grad.data()[i];
    }
  }
  return std::sqrt(s);
}

void ParamSet::scale_grad(double factor) {
  for (auto& p : params_)
    for (double& g : p->grad.data()) g *= factor;
}

void ParamSet::assign_values(const ParamSet& other) {
  if (other.size() != size()) throw std::logic_error("parameter sets differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    if (params_[i]->name() != other[i].name() ||
        params_[i]->value.rows() != other[i].value.rows() ||
        params_[i]->value.cols() != other[i].value.cols()) {
      throw std::logic_error("parameter mismatch at " + other[i].name());
    }
    params_[i]->value = other[i].value;
  }
}

bool ParamSet::same_values(const ParamSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (params_[i]->name() != other[i].name() || !(params_[i]->value == other[i].value)) {
      return false;
    }
  }
  return true;
}

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> inputs, Backward backward) {
  bool needs = std::any_of(inputs.begin(), inputs.end(),
                           [&](const Var& v) { return nodes_[v.id].requires_grad; });
  return leaf(std::move(value), needs, needs ? std::move(backward) : Backward{});
}

Var Tape::leaf(Matrix value, bool requires_grad, Backward backward) {
  nodes_.push_back({std::move(value), Matrix(), std::move(backward), requires_grad});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this || value(loss.id).size() != 1) {
    throw std::logic_error("backward needs a scalar node of this tape");
  }
  grad(loss.id)(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

namespace {

bool wants(Tape& t, Var v) { return t.requires_grad(v.id); }

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var constant(Tape& tape, Matrix value) { return tape.leaf(std::move(value), false, {}); }

Var param(Tape& tape, Param& p) {
  Param* ptr = &p;
  return tape.leaf(p.value, true, [ptr](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!ptr->is_frozen(i)) ptr->grad.data()[i] += g.data()[i];
    }
  });
}

Var embedding(Tape& tape, Param& table, std::span<const int> ids) {
  const int d = table.value.cols();
  Matrix out(static_cast<int>(ids.size()), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= table.value.rows()) {
      throw std::out_of_range("embedding index out of range");
    }
    std::copy_n(table.value.row(ids[r]).data(), d, out.row(static_cast<int>(r)).data());
  }
  Param* ptr = &table;
  std::vector<int> idx(ids.begin(), ids.end());
  return tape.leaf(std::move(out), true, [ptr, idx = std::move(idx), d](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      double* dst = ptr->grad.row(idx[r]).data();
      const double* src = g.row(static_cast<int>(r)).data();
      for (int c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  return a.tape->push(clinie::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (wants(t, a)) matmul_bt_acc(g, t.value(b.id), t.grad(a.id));
    if (wants(t, b)) matmul_at_acc(t.value(a.id), g, t.grad(b.id));
  });
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  axpy(1.0, b.value(), out);
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (wants(t, a)) axpy(1.0, g, t.grad(a.id));
    if (wants(t, b)) axpy(1.0, g, t.grad(b.id));
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  axpy(-1.0, b.value(), out);
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (wants(t, a)) axpy(1.0, g, t.grad(a.id));
    if (wants(t, b)) axpy(-1.0, g, t.grad(b.id));
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "mul");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (wants(t, a)) {
      Matrix& ga = t.grad(a.id);
      const Matrix& bv = t.value(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
    }
    if (wants(t, b)) {
      Matrix& gb = t.grad(b.id);
      const Matrix& av = t.value(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
    }
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix out = a.value();
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) += row.value()(0, c);
  return a.tape->push(std::move(out), {a, row}, [a, row](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (wants(t, a)) axpy(1.0, g, t.grad(a.id));
    if (wants(t, row)) {
      Matrix& gr = t.grad(row.id);
      for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
    }
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value();
  for (double& v : out.data()) v *= s;
  return a.tape->push(std::move(out), {a}, [a, s](Tape& t, int self) {
    axpy(s, t.grad(self), t.grad(a.id));
  });
}

Var tanh(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  return a.tape->push(std::move(out), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data()[i] += g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
    }
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = sigmoid_scalar(v);
  return a.tape->push(std::move(out), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data()[i] += g.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int rows = parts[0].rows();
  int cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  int offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->push(std::move(out), inputs, [inputs](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    int offset = 0;
    for (const Var& p : inputs) {
      const int pc = t.value(p.id).cols();
      if (wants(t, p)) {
        Matrix& gp = t.grad(p.id);
        for (int r = 0; r < g.rows(); ++r)
          for (int c = 0; c < pc; ++c) gp(r, c) += g(r, offset + c);
      }
      offset += pc;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const int cols = parts[0].cols();
  int rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  auto dst = out.data().begin();
  for (const Var& p : parts) dst = std::copy(p.value().data().begin(), p.value().data().end(), dst);
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->push(std::move(out), inputs, [inputs](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t n = t.value(p.id).size();
      if (wants(t, p)) {
        Matrix& gp = t.grad(p.id);
        for (std::size_t i = 0; i < n; ++i) gp.data()[i] += g.data()[offset + i];
      }
      offset += n;
    }
  });
}

Var slice_rows(Var a, int begin, int end) {
  if (begin < 0 || end > a.rows() || begin >= end) throw std::out_of_range("slice_rows");
  const int cols = a.cols();
  Matrix out(end - begin, cols);
  std::copy_n(a.value().row(begin).data(), out.size(), out.data().begin());
  return a.tape->push(std::move(out), {a}, [a, begin](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    double* dst = t.grad(a.id).row(begin).data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g.data()[i];
  });
}

Var slice_cols(Var a, int begin, int end) {
  if (begin < 0 || end > a.cols() || begin >= end) throw std::out_of_range("slice_cols");
  Matrix out(a.rows(), end - begin);
  for (int r = 0; r < out.rows(); ++r)
    for (int c = begin; c < end; ++c) out(r, c - begin) = a.value()(r, c);
  return a.tape->push(std::move(out), {a}, [a, begin](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c) ga(r, begin + c) += g(r, c);
  });
}

Var sum_rows(Var a, int begin, int end) {
  if (begin < 0 || end > a.rows() || begin >= end) throw std::out_of_range("sum_rows");
  Matrix out(1, a.cols());
  for (int r = begin; r < end; ++r)
    for (int c = 0; c < a.cols(); ++c) out(0, c) += a.value()(r, c);
  return a.tape->push(std::move(out), {a}, [a, begin, end](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (int r = begin; r < end; ++r)
      for (int c = 0; c < g.cols(); ++c) ga(r, c) += g(0, c);
  });
}

Var gather_rows(Var a, std::span<const int> rows) {
  const int cols = a.cols();
  Matrix out(static_cast<int>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw std::out_of_range("gather_rows");
    std::copy_n(a.value().row(rows[i]).data(), cols, out.row(static_cast<int>(i)).data());
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return a.tape->push(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int c = 0; c < g.cols(); ++c) ga(idx[i], c) += g(static_cast<int>(i), c);
  });
}

Var transpose(Var a) {
  return a.tape->push(clinie::transpose(a.value()), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
  });
}

Var softmax_rows(Var a) {
  Matrix out = a.value();
  for (int r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double lse = log_sum_exp(row);
    for (double& v : row) v = std::exp(v - lse);
  }
  return a.tape->push(std::move(out), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(a.id);
    for (int r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (int c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
      for (int c = 0; c < g.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var layer_norm(Var a, Var gamma, Var beta, double eps) {
  const int n = a.rows(), d = a.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw std::invalid_argument("layer_norm: shape mismatch");
  }
  Matrix xhat(n, d);
  std::vector<double> inv_std(n);
  Matrix out(n, d);
  for (int r = 0; r < n; ++r) {
    double mu = 0.0;
    for (int c = 0; c < d; ++c) mu += a.value()(r, c);
    mu /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) var += (a.value()(r, c) - mu) * (a.value()(r, c) - mu);
    var /= d;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < d; ++c) {
      xhat(r, c) = (a.value()(r, c) - mu) * inv_std[r];
      out(r, c) = gamma.value()(0, c) * xhat(r, c) + beta.value()(0, c);
    }
  }
  return a.tape->push(
      std::move(out), {a, gamma, beta},
      [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        const int n = g.rows(), d = g.cols();
        const Matrix& gm = t.value(gamma.id);
        if (wants(t, gamma)) {
          Matrix& gg = t.grad(gamma.id);
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < d; ++c) gg(0, c) += g(r, c) * xhat(r, c);
        }
        if (wants(t, beta)) {
          Matrix& gb = t.grad(beta.id);
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < d; ++c) gb(0, c) += g(r, c);
        }
        if (wants(t, a)) {
          Matrix& ga = t.grad(a.id);
          for (int r = 0; r < n; ++r) {
            double mean_dx = 0.0, mean_dx_x = 0.0;
            for (int c = 0; c < d; ++c) {
              double dxh = g(r, c) * gm(0, c);
              mean_dx += dxh;
              mean_dx_x += dxh * xhat(r, c);
            }
            mean_dx /= d;
            mean_dx_x /= d;
            for (int c = 0; c < d; ++c) {
              double dxh = g(r, c) * gm(0, c);
              ga(r, c) += inv_std[r] * (dxh - mean_dx - xhat(r, c) * mean_dx_x);
            }
          }
        }
      });
}

Var dropout(Var a, double rate) {
  Tape& tape = *a.tape;
  if (!tape.training() || rate <= 0.0) return a;
  if (!tape.rng()) throw std::logic_error("dropout in training mode needs an RNG");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (double& m : mask.data()) m = keep(*tape.rng()) ? 1.0 / (1.0 - rate) : 0.0;
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  return tape.push(std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * mask.data()[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape->push(Matrix(1, 1, s), {a}, [a](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    for (double& v : t.grad(a.id).data()) v += g;
  });
}

Var lstm_cell(Var gates, Var c_prev) {
  const int h = c_prev.cols();
  if (gates.rows() != 1 || c_prev.rows() != 1 || gates.cols() != 4 * h) {
    throw std::invalid_argument("lstm_cell: shape mismatch");
  }
  Matrix out(1, 2 * h);
  const Matrix& z = gates.value();
  const Matrix& cp = c_prev.value();
  for (int k = 0; k < h; ++k) {
    double i = sigmoid_scalar(z(0, k));
    double f = sigmoid_scalar(z(0, h + k));
    double g = std::tanh(z(0, 2 * h + k));
    double o = sigmoid_scalar(z(0, 3 * h + k));
    double c = f * cp(0, k) + i * g;
    out(0, k) = o * std::tanh(c);
    out(0, h + k) = c;
  }
  return gates.tape->push(std::move(out), {gates, c_prev}, [gates, c_prev, h](Tape& t, int self) {
    const Matrix& gout = t.grad(self);
    const Matrix& z = t.value(gates.id);
    const Matrix& cp = t.value(c_prev.id);
    const Matrix& y = t.value(self);
    const bool want_gates = wants(t, gates);
    const bool want_c = wants(t, c_prev);
    for (int k = 0; k < h; ++k) {
      double i = sigmoid_scalar(z(0, k));
      double f = sigmoid_scalar(z(0, h + k));
      double g = std::tanh(z(0, 2 * h + k));
      double o = sigmoid_scalar(z(0, 3 * h + k));
      double c = y(0, h + k);
      double tc = std::tanh(c);
      double dh = gout(0, k);
      double dc = gout(0, h + k) + dh * o * (1.0 - tc * tc);
      if (want_gates) {
        Matrix& gz = t.grad(gates.id);
        gz(0, k) += dc * g * i * (1.0 - i);
        gz(0, h + k) += dc * cp(0, k) * f * (1.0 - f);
        gz(0, 2 * h + k) += dc * i * (1.0 - g * g);
        gz(0, 3 * h + k) += dh * tc * o * (1.0 - o);
      }
      if (want_c) t.grad(c_prev.id)(0, k) += dc * f;
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> gold) {
  const Matrix& z = logits.value();
  if (static_cast<int>(gold.size()) != z.rows()) {
    throw std::invalid_argument("softmax_cross_entropy: gold length mismatch");
  }
  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (int r = 0; r < z.rows(); ++r) {
    if (gold[r] < 0 || gold[r] >= z.cols()) throw std::out_of_range("gold label out of range");
    double lse = log_sum_exp(z.row(r));
    for (int c = 0; c < z.cols(); ++c) probs(r, c) = std::exp(z(r, c) - lse);
    loss += lse - z(r, gold[r]);
  }
  std::vector<int> labels(gold.begin(), gold.end());
  return logits.tape->push(
      Matrix(1, 1, loss), {logits},
      [logits, probs = std::move(probs), labels = std::move(labels)](Tape& t, int self) {
        const double g = t.grad(self)(0, 0);
        Matrix& gz = t.grad(logits.id);
        for (int r = 0; r < probs.rows(); ++r) {
          for (int c = 0; c < probs.cols(); ++c) gz(r, c) += g * probs(r, c);
          gz(r, labels[r]) -= g;
        }
      });
}

Var bce_with_logits(Var logits, const Matrix& targets) {
  check_same_shape(logits.value(), targets, "bce_with_logits");
  const Matrix& z = logits.value();
  const double n = static_cast<double>(z.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double x = z.data()[i], y = targets.data()[i];
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  return logits.tape->push(Matrix(1, 1, n > 0 ? loss / n : 0.0), {logits},
                           [logits, targets, n](Tape& t, int self) {
                             const double g = t.grad(self)(0, 0) / n;
                             const Matrix& z = t.value(logits.id);
                             Matrix& gz = t.grad(logits.id);
                             for (std::size_t i = 0; i < z.size(); ++i) {
                               gz.data()[i] += g * (sigmoid_scalar(z.data()[i]) - targets.data()[i]);
                             }
                           });
}

}  // namespace clinie::ad
