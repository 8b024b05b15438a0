#pragma once

// Row-major double-precision dense matrix, sized for desk-scale experiments
// (a few hundred rows at most). Everything the experiment harness measures
// flows through this type, so construction validates finiteness up front.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace miniopt::linalg {

using Vector = std::vector<double>;

inline void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
  }
}

class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  DenseMatrix(std::size_t rows, std::size_t cols, Vector data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("DenseMatrix: data length != rows * cols");
    }
    require_finite(data_, "DenseMatrix");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> values) {
    DenseMatrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Vector matvec(std::span<const double> x) const {
    if (x.size() != cols_) throw std::invalid_argument("matvec: size mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      double acc = 0.0;
      const double* r = data_.data() + i * cols_;
      for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
      y[i] = acc;
    }
    return y;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
  }

  double frobenius_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
  }

  // max |A_ij - A_ji| over all pairs; 0 for the empty matrix.
  double asymmetry() const {
    if (!square()) throw std::invalid_argument("asymmetry: non-square matrix");
    double m = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = i + 1; j < cols_; ++j) {
        m = std::max(m, std::fabs((*this)(i, j) - (*this)(j, i)));
      }
    }
    return m;
  }

  bool is_symmetric(double rel_tol = 1e-9) const {
    if (!square()) return false;
    return asymmetry() <= rel_tol * std::max(1e-300, max_abs());
  }

  void symmetrize() {
    if (!square()) throw std::invalid_argument("symmetrize: non-square matrix");
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = i + 1; j < cols_; ++j) {
        const double avg = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = avg;
        (*this)(j, i) = avg;
      }
    }
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

// Diagonal-over-off-diagonal ratio: sum_i |H_ii| / sum_ij |H_ij|.
// 1 means purely diagonal; rejects the all-zero matrix.
inline double diag_ratio_tau(const DenseMatrix& h) {
  if (!h.square()) throw std::invalid_argument("diag_ratio_tau: non-square matrix");
  double diag = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < h.cols(); ++j) {
      const double a = std::fabs(h(i, j));
      total += a;
      if (i == j) diag += a;
    }
  }
  if (total == 0.0) throw std::invalid_argument("diag_ratio_tau: all-zero matrix");
  return diag / total;
}

}  // namespace miniopt::linalg
