#pragma once

// Hessian probes and the preconditioner-effectiveness study.
//
// fd_hessian differentiates an exact gradient oracle with central
// differences (second-order accurate; exact for quadratics up to rounding).
// precond_ratio_r measures how much the diagonal preconditioner
// D = Diag(1/sqrt(g.*g)), g = H x, improves the conditioning of a dense PD
// block: r = kappa(D H) / kappa(H), evaluated on the symmetric similarity
// form D^1/2 H D^1/2 (same spectrum, keeps the symmetric eigensolver
// sufficient).

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "miniopt/dense_matrix.hpp"
#include "miniopt/models/mlp.hpp"
#include "miniopt/sampling.hpp"
#include "miniopt/sym_eig.hpp"

namespace miniopt::hessian {

using linalg::DenseMatrix;
using linalg::Vector;

// grad_fn(theta, grad_out): exact gradient at theta.
using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

inline constexpr double kDefaultFdStep = 1e-5;
inline constexpr std::size_t kMaxProbeCoords = 2000;

// Central-difference Hessian over a coordinate subset:
// H[a][b] = (g_a(theta + h e_b) - g_a(theta - h e_b)) / (2h), symmetrized.
inline DenseMatrix fd_hessian_subset(const GradFn& grad_fn, std::span<const double> theta,
                                     std::span<const std::size_t> coords,
                                     double h = kDefaultFdStep) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_hessian: step must be positive");
  if (coords.empty() || coords.size() > kMaxProbeCoords) {
    throw std::invalid_argument("fd_hessian: probe must cover 1..2000 coordinates");
  }
  for (std::size_t c : coords) {
    if (c >= theta.size()) throw std::invalid_argument("fd_hessian: coordinate out of range");
  }
  const std::size_t n = coords.size();
  Vector point(theta.begin(), theta.end());
  Vector gplus(theta.size());
  Vector gminus(theta.size());
  DenseMatrix hess(n, n);
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t cb = coords[b];
    const double saved = point[cb];
    point[cb] = saved + h;
    grad_fn(point, gplus);
    point[cb] = saved - h;
    grad_fn(point, gminus);
    point[cb] = saved;
    linalg::require_finite(gplus, "fd_hessian gradient");
    linalg::require_finite(gminus, "fd_hessian gradient");
    for (std::size_t a = 0; a < n; ++a) {
      hess(a, b) = (gplus[coords[a]] - gminus[coords[a]]) / (2.0 * h);
    }
  }
  hess.symmetrize();
  return hess;
}

inline DenseMatrix fd_hessian(const GradFn& grad_fn, std::span<const double> theta,
                              double h = kDefaultFdStep) {
  std::vector<std::size_t> coords(theta.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  return fd_hessian_subset(grad_fn, theta, coords, h);
}

// Analytic cross-neuron block of the one-hidden-layer binary MLP on a single
// sample: p(1-p) * a_i * a_j * phi'(w_i'x) * phi'(w_j'x) * x x' (i != j).
inline DenseMatrix mlp_cross_block(const models::MlpBinary& m, std::span<const double> x,
                                   int y_pm, int i, int j) {
  if (i == j) throw std::invalid_argument("mlp_cross_block: need i != j");
  if (i < 0 || j < 0 || i >= m.n_neurons || j >= m.n_neurons) {
    throw std::invalid_argument("mlp_cross_block: neuron index out of range");
  }
  if (static_cast<int>(x.size()) != m.dim) {
    throw std::invalid_argument("mlp_cross_block: input dimension mismatch");
  }
  if (y_pm != 1 && y_pm != -1) throw std::invalid_argument("mlp_cross_block: label must be +-1");
  const double p = m.sample_p(x, y_pm);
  const auto phi_prime = [&](int neuron) {
    double pre = 0.0;
    const auto w = m.w_row(neuron);
    for (int k = 0; k < m.dim; ++k) pre += w[k] * x[k];
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  };
  const double factor = p * (1.0 - p) * m.a(i) * m.a(j) * phi_prime(i) * phi_prime(j);
  DenseMatrix block(x.size(), x.size());
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t c = 0; c < x.size(); ++c) block(r, c) = factor * x[r] * x[c];
  }
  return block;
}

// Fraction of squared Frobenius mass inside the diagonal blocks given a
// block id per coordinate. 1.0 means exactly block-diagonal.
inline double block_energy_ratio(const DenseMatrix& h, std::span<const int> block_of_coord) {
  if (!h.square()) throw std::invalid_argument("block_energy_ratio: non-square matrix");
  if (block_of_coord.size() != h.rows()) {
    throw std::invalid_argument("block_energy_ratio: layout does not match the matrix");
  }
  double inside = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < h.cols(); ++j) {
      const double sq = h(i, j) * h(i, j);
      total += sq;
      if (block_of_coord[i] == block_of_coord[j]) inside += sq;
    }
  }
  if (total == 0.0) throw std::invalid_argument("block_energy_ratio: zero matrix");
  return inside / total;
}

struct PrecondSample {
  double tau = 0.0;
  double r = 0.0;
};

// tau and r for one (H_b, x) pair. Throws if some gradient component
// underflows; the sampling loop resamples x in that case rather than
// clamping, which would bias r.
inline PrecondSample precond_ratio_r(const DenseMatrix& h_b, std::span<const double> x) {
  if (!h_b.square()) throw std::invalid_argument("precond_ratio_r: non-square matrix");
  const Vector g = h_b.matvec(x);
  for (double gi : g) {
    if (std::fabs(gi) < 1e-300) {
      throw std::domain_error("precond_ratio_r: near-zero gradient component");
    }
  }
  const std::size_t d = h_b.rows();
  // D^1/2 H D^1/2 with D = Diag(1/|g|); similar to D H, hence same spectrum.
  DenseMatrix m(d, d);
  Vector dhalf(d);
  for (std::size_t i = 0; i < d; ++i) dhalf[i] = 1.0 / std::sqrt(std::fabs(g[i]));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) m(i, j) = dhalf[i] * h_b(i, j) * dhalf[j];
  }
  PrecondSample out;
  out.tau = linalg::diag_ratio_tau(h_b);
  out.r = linalg::cond_number(m) / linalg::cond_number(h_b);
  return out;
}

struct TauRSample {
  int d = 0;
  double kappa = 0.0;
  double rotation = 0.0;  // R
  std::uint64_t theta_seed = 0;
  double tau_mean = 0.0;
  double r_mean = 0.0;
  int n_x = 0;
};

// Full sweep: for every R in the grid, n_theta random rotations and n_x
// Xavier points each; (tau, r) averaged arithmetically. Deterministic for a
// given rng seed and invariant to the worker count: each (R, theta) pair
// owns a child rng and results aggregate in index order.
inline std::vector<TauRSample> sweep_tau_r(int d, double kappa, std::span<const double> r_grid,
                                           int n_theta, int n_x, linalg::SeededRng rng,
                                           int n_threads = 1) {
  if (r_grid.empty()) throw std::invalid_argument("sweep_tau_r: empty R grid");
  if (n_theta < 1 || n_x < 1) throw std::invalid_argument("sweep_tau_r: bad sample counts");
  struct PairResult {
    double tau = 0.0;
    double r_sum = 0.0;
  };
  const std::size_t n_pairs = r_grid.size() * static_cast<std::size_t>(n_theta);
  std::vector<PairResult> results(n_pairs);

  const auto run_pair = [&](std::size_t pair_index) {
    const std::size_t gi = pair_index / n_theta;
    auto pair_rng = rng.child(pair_index);
    const DenseMatrix h_b = linalg::random_rotation_pd(d, kappa, r_grid[gi], pair_rng);
    PairResult res;
    res.tau = linalg::diag_ratio_tau(h_b);
    for (int xi = 0; xi < n_x; ++xi) {
      auto x_rng = pair_rng.child(static_cast<std::uint64_t>(xi) + 1);
      for (;;) {
        const Vector x = linalg::xavier_sample(d, x_rng);
        try {
          res.r_sum += precond_ratio_r(h_b, x).r;
          break;
        } catch (const std::domain_error&) {
          // resample x on an exactly-degenerate gradient component
        }
      }
    }
    results[pair_index] = res;
  };

  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n_pairs; ++i) run_pair(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min<std::size_t>(n_threads, n_pairs);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n_pairs; i = next.fetch_add(1)) run_pair(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<TauRSample> rows;
  rows.reserve(r_grid.size());
  for (std::size_t gi = 0; gi < r_grid.size(); ++gi) {
    TauRSample row;
    row.d = d;
    row.kappa = kappa;
    row.rotation = r_grid[gi];
    row.theta_seed = rng.child(gi * static_cast<std::size_t>(n_theta)).seed();
    row.n_x = n_x;
    double tau_sum = 0.0;
    double r_sum = 0.0;
    for (int ti = 0; ti < n_theta; ++ti) {
      const auto& res = results[gi * static_cast<std::size_t>(n_theta) + ti];
      tau_sum += res.tau;
      r_sum += res.r_sum;
    }
    row.tau_mean = tau_sum / n_theta;
    row.r_mean = r_sum / (static_cast<double>(n_theta) * n_x);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace miniopt::hessian
