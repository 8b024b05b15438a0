#pragma once

// Symmetric eigensolver: cyclic Jacobi rotations. Chosen over LAPACK-style
// QR because it is a few dozen lines, bit-deterministic, and plenty fast for
// the <= few-hundred-dimensional matrices this project touches.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "miniopt/dense_matrix.hpp"

namespace miniopt::linalg {

struct SymEigResult {
  Vector eigenvalues;       // descending
  DenseMatrix eigenvectors; // column i pairs with eigenvalues[i]
};

namespace detail {

inline double offdiag_frobenius(const DenseMatrix& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) acc += a(i, j) * a(i, j);
  return std::sqrt(acc);
}

}  // namespace detail

// Eigendecomposition of a symmetric matrix. Converges when the off-diagonal
// Frobenius norm drops below 1e-12 * ||A||_F; caps at 100 sweeps and throws
// if that is ever hit (a signal of a numerically pathological input).
inline SymEigResult sym_eig(const DenseMatrix& input) {
  if (!input.square()) throw std::invalid_argument("sym_eig: non-square matrix");
  if (!input.is_symmetric(1e-9)) {
    throw std::invalid_argument("sym_eig: matrix is not symmetric within tolerance");
  }
  const std::size_t n = input.rows();
  DenseMatrix a = input;
  DenseMatrix v = DenseMatrix::identity(n);
  const double tol = 1e-12 * std::max(input.frobenius_norm(), 1e-300);

  bool converged = n < 2;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    if (detail::offdiag_frobenius(a) <= tol) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p < n - 1; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    if (detail::offdiag_frobenius(a) <= tol) converged = true;
  }
  if (!converged) throw std::runtime_error("sym_eig: no convergence after 100 sweeps");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymEigResult result;
  result.eigenvalues.resize(n);
  result.eigenvectors = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    result.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) result.eigenvectors(i, j) = v(i, order[j]);
  }
  return result;
}

// lambda_max / lambda_min of a symmetric positive-definite matrix.
inline double cond_number(const DenseMatrix& a) {
  const SymEigResult eig = sym_eig(a);
  const double lo = eig.eigenvalues.back();
  const double hi = eig.eigenvalues.front();
  if (lo <= 1e-12 * hi || hi <= 0.0) {
    throw std::invalid_argument("cond_number: matrix is not positive definite");
  }
  return hi / lo;
}

}  // namespace miniopt::linalg
