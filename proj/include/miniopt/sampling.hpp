#pragma once

// Random positive-definite matrices with a prescribed spectrum, and the
// Xavier-style Gaussian sampler used as the input distribution in the
// preconditioner study.

#include <cmath>
#include <stdexcept>

#include "miniopt/dense_matrix.hpp"
#include "miniopt/rng.hpp"

namespace miniopt::linalg {

// Orthogonal matrix built from d(d-1)/2 Givens rotations with angles
// scale * theta_ij, theta_ij ~ Uniform[-pi/2, pi/2]. Rotations are applied
// i ascending, j ascending within i, left-multiplying the accumulated Q, so
// the same rng always produces the same Q. scale = 0 gives exactly I.
inline DenseMatrix random_rotation(std::size_t d, double scale, SeededRng& rng) {
  if (d < 2) throw std::invalid_argument("random_rotation: d must be >= 2");
  DenseMatrix q = DenseMatrix::identity(d);
  const double half_pi = std::numbers::pi / 2.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double angle = scale * rng.uniform(-half_pi, half_pi);
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      // Left-multiplication by the plane rotation only touches rows i and j.
      for (std::size_t k = 0; k < d; ++k) {
        const double qi = q(i, k);
        const double qj = q(j, k);
        q(i, k) = c * qi + s * qj;
        q(j, k) = -s * qi + c * qj;
      }
    }
  }
  return q;
}

// Q * diag(eigenvalues) * Q^T for a given rotation Q.
inline DenseMatrix spectrum_matrix(const DenseMatrix& q, std::span<const double> eigenvalues) {
  const std::size_t d = q.rows();
  if (eigenvalues.size() != d) {
    throw std::invalid_argument("spectrum_matrix: eigenvalue count != dimension");
  }
  DenseMatrix h(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += q(i, k) * eigenvalues[k] * q(j, k);
      h(i, j) = acc;
      h(j, i) = acc;
    }
  }
  return h;
}

// Symmetric PD matrix with spectrum {kappa, 1, ..., 1}; rotation_scale in
// [0, 1] interpolates from diagonal (0) to a fully random rotation (1).
inline DenseMatrix random_rotation_pd(std::size_t d, double kappa, double rotation_scale,
                                      SeededRng& rng) {
  if (d < 2) throw std::invalid_argument("random_rotation_pd: d must be >= 2");
  if (kappa < 1.0) throw std::invalid_argument("random_rotation_pd: kappa must be >= 1");
  if (rotation_scale < 0.0 || rotation_scale > 1.0) {
    throw std::invalid_argument("random_rotation_pd: rotation scale must be in [0, 1]");
  }
  const DenseMatrix q = random_rotation(d, rotation_scale, rng);
  Vector eigenvalues(d, 1.0);
  eigenvalues[0] = kappa;
  return spectrum_matrix(q, eigenvalues);
}

// The sampler writes N(0, 1/sqrt(d)); whether 1/sqrt(d) names the variance
// or the standard deviation is ambiguous, so both are available. Default:
// variance.
enum class XavierScale { Variance, StdDev };

inline Vector xavier_sample(std::size_t d, SeededRng& rng,
                            XavierScale scale = XavierScale::Variance) {
  if (d < 1) throw std::invalid_argument("xavier_sample: d must be >= 1");
  const double sigma = scale == XavierScale::Variance
                           ? std::sqrt(1.0 / std::sqrt(static_cast<double>(d)))
                           : 1.0 / std::sqrt(static_cast<double>(d));
  Vector x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = sigma * rng.gaussian();
  return x;
}

}  // namespace miniopt::linalg
