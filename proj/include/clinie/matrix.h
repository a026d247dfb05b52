// Dense row-major double matrix and the handful of kernels the models need.

#ifndef CLINIE_MATRIX_H_
#define CLINIE_MATRIX_H_

#include <cassert>
#include <span>
#include <vector>

namespace clinie {

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// c += a * b
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c);
// c += a * b^T
void matmul_bt_acc(const Matrix& a, const Matrix& b, Matrix& c);
// c += a^T * b
void matmul_at_acc(const Matrix& a, const Matrix& b, Matrix& c);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
// a += scale * b
void axpy(double scale, const Matrix& b, Matrix& a);

double log_sum_exp(std::span<const double> values);

}  // namespace clinie

#endif  // CLINIE_MATRIX_H_
