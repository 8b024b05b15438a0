#pragma once

// Random block-diagonal quadratics: min_w 0.5 * w' H w with H assembled
// from dense PD sub-blocks, so per-block conditioning is known exactly.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "miniopt/dense_matrix.hpp"
#include "miniopt/optim.hpp"
#include "miniopt/sampling.hpp"

namespace miniopt::models {

using linalg::DenseMatrix;
using linalg::Vector;

struct QuadraticProblem {
  DenseMatrix h;                        // symmetric PD, block-diagonal by construction
  std::vector<std::int64_t> block_dims; // sums to dim(w)
  Vector w;
};

// loss = 0.5 * w' H w, grad = H w.
inline double quad_loss_grad(const QuadraticProblem& p, Vector& grad) {
  grad = p.h.matvec(p.w);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.w.size(); ++i) loss += p.w[i] * grad[i];
  return 0.5 * loss;
}

inline double quad_loss(const QuadraticProblem& p) {
  Vector grad;
  return quad_loss_grad(p, grad);
}

inline std::vector<optim::Range> quad_block_ranges(const QuadraticProblem& p) {
  std::vector<optim::Range> ranges;
  std::int64_t off = 0;
  for (std::int64_t d : p.block_dims) {
    ranges.emplace_back(off, off + d);
    off += d;
  }
  return ranges;
}

inline DenseMatrix quad_block_matrix(const QuadraticProblem& p, std::size_t block) {
  const auto ranges = quad_block_ranges(p);
  const auto [lo, hi] = ranges.at(block);
  DenseMatrix b(hi - lo, hi - lo);
  for (std::int64_t i = lo; i < hi; ++i)
    for (std::int64_t j = lo; j < hi; ++j) b(i - lo, j - lo) = p.h(i, j);
  return b;
}

// One dense PD block: eigenvalues drawn i.i.d. from the given candidate set,
// eigenvectors from a full random rotation.
inline DenseMatrix random_pd_block(std::size_t dim, std::span<const double> eigenvalue_set,
                                   linalg::SeededRng& rng) {
  if (eigenvalue_set.empty()) throw std::invalid_argument("random_pd_block: empty eigenvalue set");
  Vector eigs(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    eigs[i] = eigenvalue_set[rng.next_below(eigenvalue_set.size())];
  }
  const DenseMatrix q = linalg::random_rotation(dim, 1.0, rng);
  return linalg::spectrum_matrix(q, eigs);
}

// The three-block 90-dimensional problem: 30-dim blocks with eigenvalues
// from {1,2,3}, {99,100,101}, {4998,4999,5000}; cross-block entries exactly
// zero; w initialized from the Xavier sampler.
inline QuadraticProblem build_block_quadratic(linalg::SeededRng& rng) {
  constexpr std::size_t kBlockDim = 30;
  const std::vector<std::vector<double>> sets = {
      {1.0, 2.0, 3.0}, {99.0, 100.0, 101.0}, {4998.0, 4999.0, 5000.0}};
  QuadraticProblem p;
  const std::size_t dim = kBlockDim * sets.size();
  p.h = DenseMatrix(dim, dim);
  std::size_t off = 0;
  for (std::size_t l = 0; l < sets.size(); ++l) {
    auto block_rng = rng.child(l);
    const DenseMatrix block = random_pd_block(kBlockDim, sets[l], block_rng);
    for (std::size_t i = 0; i < kBlockDim; ++i)
      for (std::size_t j = 0; j < kBlockDim; ++j) p.h(off + i, off + j) = block(i, j);
    p.block_dims.push_back(static_cast<std::int64_t>(kBlockDim));
    off += kBlockDim;
  }
  auto w_rng = rng.child(1000);
  p.w = linalg::xavier_sample(dim, w_rng);
  return p;
}

}  // namespace miniopt::models
