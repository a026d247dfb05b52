#include "clinie/matrix.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace clinie {

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    double* crow = c.row(i).data();
    const double* arow = a.row(i).data();
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row(p).data();
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_bt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols() == b.cols() && c.rows() == a.rows() && c.cols() == b.rows());
  const int n = a.rows(), k = a.cols(), m = b.rows();
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row(i).data();
    double* crow = c.row(i).data();
    for (int j = 0; j < m; ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

void matmul_at_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int p = 0; p < n; ++p) {
    const double* arow = a.row(p).data();
    const double* brow = b.row(p).data();
    for (int i = 0; i < k; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c.row(i).data();
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  matmul_acc(a, b, c);
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

void axpy(double scale, const Matrix& b, Matrix& a) {
  assert(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += scale * b.data()[i];
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace clinie
