#pragma once

// Optimizer update rules: AdamW/Adam, the block-partitioned Adam-mini
// family, LAMB, plain/blockwise gradient descent, and the cumulative-mean
// Adam variant used by the quadratic experiments. All arithmetic is 64-bit
// and strictly ordered: with a singleton partition, adam_mini_step is
// bit-identical to adamw_step, so the two share expression shapes below.
// Do not "simplify" the algebra here without re-checking that invariant.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "miniopt/dense_matrix.hpp"
#include "miniopt/partition.hpp"
#include "miniopt/sym_eig.hpp"

namespace miniopt::optim {

using linalg::DenseMatrix;
using Range = std::pair<std::int64_t, std::int64_t>;

struct HyperParams {
  double lr = 1e-3;  // the already-scheduled per-step value
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;

  void validate(bool allow_beta2_one = false) const {
    if (!(lr > 0.0)) throw std::invalid_argument("HyperParams: lr must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("HyperParams: negative weight decay");
    if (beta1 < 0.0 || beta1 >= 1.0) throw std::invalid_argument("HyperParams: beta1 not in [0,1)");
    const double beta2_hi = allow_beta2_one ? std::nextafter(1.0, 2.0) : 1.0;
    if (beta2 < 0.0 || beta2 >= beta2_hi) {
      throw std::invalid_argument("HyperParams: beta2 out of range");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("HyperParams: eps must be positive");
  }
};

struct AdamState {
  linalg::Vector m;
  linalg::Vector v;
  std::int64_t t = 0;

  static AdamState zeros(std::size_t n) { return {linalg::Vector(n, 0.0), linalg::Vector(n, 0.0), 0}; }
};

struct MiniState {
  linalg::Vector m;        // per coordinate
  linalg::Vector v_block;  // one scalar per partition block
  std::int64_t t = 0;

  static MiniState zeros(std::size_t n, std::size_t blocks) {
    return {linalg::Vector(n, 0.0), linalg::Vector(blocks, 0.0), 0};
  }
};

struct AdaGradMeanState {
  linalg::Vector v;  // cumulative mean of g*g
  std::int64_t t = 0;

  static AdaGradMeanState zeros(std::size_t n) { return {linalg::Vector(n, 0.0), 0}; }
};

enum class Aggregator { Mean, Max, Min, MeanAbs, RmsSquared };

namespace detail {

inline void check_step_inputs(std::span<const double> w, std::span<const double> g) {
  if (w.size() != g.size()) throw std::invalid_argument("optimizer step: shape mismatch");
  linalg::require_finite(g, "optimizer step gradients");
}

// Running (Welford) mean: exact for a constant stream and for one element,
// which is what makes block updates collapse to per-coordinate Adam when
// every coordinate of a block sees the same gradient.
template <typename F>
double running_mean(std::span<const double> g, F&& value_of) {
  double mean = 0.0;
  double count = 0.0;
  for (double gi : g) {
    count += 1.0;
    mean += (value_of(gi) - mean) / count;
  }
  return mean;
}

inline double aggregate_sq(std::span<const double> g, Aggregator agg) {
  switch (agg) {
    case Aggregator::Mean:
      return running_mean(g, [](double x) { return x * x; });
    case Aggregator::MeanAbs:  // 1-norm / length of g.*g
      return running_mean(g, [](double x) { return std::fabs(x * x); });
    case Aggregator::RmsSquared:  // squared 2-norm / length of g.*g
      return running_mean(g, [](double x) { return (x * x) * (x * x); });
    case Aggregator::Max: {
      double m = g[0] * g[0];
      for (double gi : g) m = std::max(m, gi * gi);
      return m;
    }
    case Aggregator::Min: {
      double m = g[0] * g[0];
      for (double gi : g) m = std::min(m, gi * gi);
      return m;
    }
  }
  throw std::invalid_argument("aggregate_sq: unknown aggregator");
}

}  // namespace detail

// Decoupled weight decay, per-coordinate second moment.
inline void adamw_step(std::span<double> w, std::span<const double> g, AdamState& state,
                       const HyperParams& hp) {
  detail::check_step_inputs(w, g);
  hp.validate();
  if (w.size() != state.m.size() || w.size() != state.v.size()) {
    throw std::invalid_argument("adamw_step: state shape mismatch");
  }
  const std::int64_t t = state.t + 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = w[i] - hp.lr * hp.weight_decay * w[i];
    state.m[i] = (1.0 - hp.beta1) * g[i] + hp.beta1 * state.m[i];
    const double m_hat = state.m[i] / bc1;
    state.v[i] = (1.0 - hp.beta2) * (g[i] * g[i]) + hp.beta2 * state.v[i];
    const double v_hat = state.v[i] / bc2;
    w[i] = w[i] - hp.lr * (m_hat / (std::sqrt(v_hat) + hp.eps));
  }
  state.t = t;
}

// Coupled weight decay: lambda * w folds into the gradient before the
// moments, and there is no separate shrink of the parameters.
inline void adam_step(std::span<double> w, std::span<const double> g, AdamState& state,
                      const HyperParams& hp) {
  detail::check_step_inputs(w, g);
  hp.validate();
  if (w.size() != state.m.size() || w.size() != state.v.size()) {
    throw std::invalid_argument("adam_step: state shape mismatch");
  }
  const std::int64_t t = state.t + 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = hp.weight_decay > 0.0 ? g[i] + hp.weight_decay * w[i] : g[i];
    state.m[i] = (1.0 - hp.beta1) * gi + hp.beta1 * state.m[i];
    const double m_hat = state.m[i] / bc1;
    state.v[i] = (1.0 - hp.beta2) * (gi * gi) + hp.beta2 * state.v[i];
    const double v_hat = state.v[i] / bc2;
    w[i] = w[i] - hp.lr * (m_hat / (std::sqrt(v_hat) + hp.eps));
  }
  state.t = t;
}

// Block-partitioned second moment: every coordinate of block b shares the
// denominator sqrt(v_hat_b) + eps; m and decoupled decay are per-coordinate
// exactly as in adamw_step. blocks are the partition's ranges into w.
inline void adam_mini_step(std::span<double> w, std::span<const double> g, MiniState& state,
                           std::span<const Range> blocks, const HyperParams& hp,
                           Aggregator aggregator = Aggregator::Mean) {
  detail::check_step_inputs(w, g);
  hp.validate();
  if (w.size() != state.m.size()) throw std::invalid_argument("adam_mini_step: state shape mismatch");
  if (blocks.size() != state.v_block.size()) {
    throw std::invalid_argument("adam_mini_step: block count mismatch");
  }
  std::int64_t covered = 0;
  for (const auto& [lo, hi] : blocks) {
    if (lo < 0 || hi > static_cast<std::int64_t>(w.size()) || lo >= hi) {
      throw std::invalid_argument("adam_mini_step: block out of range or empty");
    }
    covered += hi - lo;
  }
  if (covered != static_cast<std::int64_t>(w.size())) {
    throw std::invalid_argument("adam_mini_step: blocks do not cover the parameters");
  }

  const std::int64_t t = state.t + 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [lo, hi] = blocks[b];
    for (std::int64_t i = lo; i < hi; ++i) {
      w[i] = w[i] - hp.lr * hp.weight_decay * w[i];
      state.m[i] = (1.0 - hp.beta1) * g[i] + hp.beta1 * state.m[i];
    }
    const double agg = detail::aggregate_sq(g.subspan(lo, hi - lo), aggregator);
    state.v_block[b] = (1.0 - hp.beta2) * agg + hp.beta2 * state.v_block[b];
    const double v_hat = state.v_block[b] / bc2;
    const double denom = std::sqrt(v_hat) + hp.eps;
    for (std::int64_t i = lo; i < hi; ++i) {
      const double m_hat = state.m[i] / bc1;
      w[i] = w[i] - hp.lr * (m_hat / denom);
    }
  }
  state.t = t;
}

// Layer-wise trust-ratio scaling on top of the Adam direction. layers are
// per-tensor ranges; phi defaults to the identity. A zero trust-ratio
// denominator falls back to ratio 1.
inline void lamb_step(std::span<double> w, std::span<const double> g, AdamState& state,
                      const HyperParams& hp, std::span<const Range> layers,
                      const std::function<double(double)>& phi = {},
                      bool clamp_trust_ratio = false) {
  detail::check_step_inputs(w, g);
  hp.validate();
  if (w.size() != state.m.size() || w.size() != state.v.size()) {
    throw std::invalid_argument("lamb_step: state shape mismatch");
  }
  const std::int64_t t = state.t + 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  std::vector<double> r;
  for (const auto& [lo, hi] : layers) {
    if (lo < 0 || hi > static_cast<std::int64_t>(w.size()) || lo >= hi) {
      throw std::invalid_argument("lamb_step: layer out of range");
    }
    for (std::int64_t i = lo; i < hi; ++i) {
      w[i] = w[i] - hp.lr * hp.weight_decay * g[i];
    }
    r.assign(static_cast<std::size_t>(hi - lo), 0.0);
    double w_norm_sq = 0.0;
    double denom_sq = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) {
      state.m[i] = (1.0 - hp.beta1) * g[i] + hp.beta1 * state.m[i];
      const double m_hat = state.m[i] / bc1;
      state.v[i] = (1.0 - hp.beta2) * (g[i] * g[i]) + hp.beta2 * state.v[i];
      const double v_hat = state.v[i] / bc2;
      const double ri = m_hat / (std::sqrt(v_hat) + hp.eps);
      r[static_cast<std::size_t>(i - lo)] = ri;
      w_norm_sq += w[i] * w[i];
      const double di = ri + hp.weight_decay * w[i];
      denom_sq += di * di;
    }
    const double denom = std::sqrt(denom_sq);
    double ratio;
    if (denom == 0.0) {
      ratio = 1.0;
    } else {
      const double w_norm = std::sqrt(w_norm_sq);
      ratio = (phi ? phi(w_norm) : w_norm) / denom;
    }
    if (clamp_trust_ratio) ratio = std::clamp(ratio, 1e-3, 1e3);
    for (std::int64_t i = lo; i < hi; ++i) {
      w[i] = w[i] - hp.lr * ratio * r[static_cast<std::size_t>(i - lo)];
    }
  }
  state.t = t;
}

inline void gd_step(std::span<double> w, std::span<const double> g, double lr) {
  if (w.size() != g.size()) throw std::invalid_argument("gd_step: shape mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
}

// Heavy-ball: buffer <- beta1 * buffer + g, then a plain GD step on it.
inline void gd_momentum_step(std::span<double> w, std::span<const double> g,
                             linalg::Vector& buffer, double lr, double beta1) {
  if (w.size() != g.size() || w.size() != buffer.size()) {
    throw std::invalid_argument("gd_momentum_step: shape mismatch");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    buffer[i] = beta1 * buffer[i] + g[i];
    w[i] -= lr * buffer[i];
  }
}

// One tuned learning rate per block.
inline void blockwise_gd_step(std::span<double> w, std::span<const double> g,
                              std::span<const Range> blocks, std::span<const double> lrs) {
  if (w.size() != g.size()) throw std::invalid_argument("blockwise_gd_step: shape mismatch");
  if (blocks.size() != lrs.size()) {
    throw std::invalid_argument("blockwise_gd_step: lrs length != block count");
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [lo, hi] = blocks[b];
    if (lo < 0 || hi > static_cast<std::int64_t>(w.size()) || lo > hi) {
      throw std::invalid_argument("blockwise_gd_step: block out of range");
    }
    for (std::int64_t i = lo; i < hi; ++i) w[i] -= lrs[b] * g[i];
  }
}

// Optimal constant GD rate 2 / (L + mu) for a PD quadratic.
inline double optimal_gd_lr(const DenseMatrix& h) {
  const auto eig = linalg::sym_eig(h);
  const double hi = eig.eigenvalues.front();
  const double lo = eig.eigenvalues.back();
  if (lo <= 1e-12 * hi || hi <= 0.0) {
    throw std::invalid_argument("optimal_gd_lr: matrix is not positive definite");
  }
  return 2.0 / (hi + lo);
}

// Adam with beta1 = 0 and the second moment kept as the cumulative mean of
// g*g over steps 1..t (no bias correction). This is the time-varying-rate
// variant the quadratic experiments race against gradient descent.
inline void adagrad_mean_adam_step(std::span<double> w, std::span<const double> g,
                                   AdaGradMeanState& state, double lr, double eps = 1e-8) {
  detail::check_step_inputs(w, g);
  if (w.size() != state.v.size()) {
    throw std::invalid_argument("adagrad_mean_adam_step: state shape mismatch");
  }
  if (!(lr > 0.0) || !(eps > 0.0)) {
    throw std::invalid_argument("adagrad_mean_adam_step: lr and eps must be positive");
  }
  const double t = static_cast<double>(state.t + 1);
  for (std::size_t i = 0; i < w.size(); ++i) {
    state.v[i] = ((t - 1.0) * state.v[i] + g[i] * g[i]) / t;
    w[i] = w[i] - lr * (g[i] / (std::sqrt(state.v[i]) + eps));
  }
  state.t += 1;
}

// D = Diag(1 / sqrt(v_i)); rejects non-positive entries.
inline DenseMatrix adam_preconditioner(std::span<const double> v) {
  for (double vi : v) {
    if (!(vi > 0.0)) throw std::invalid_argument("adam_preconditioner: non-positive entry");
  }
  DenseMatrix d(v.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d(i, i) = 1.0 / std::sqrt(v[i]);
  return d;
}

enum class OptimizerKind { AdamW, Adam, AdamMini, Lamb, Gd, GdMomentum, AdaGradMean };

inline const char* optimizer_kind_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::AdamW: return "adamw";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AdamMini: return "adam_mini";
    case OptimizerKind::Lamb: return "lamb";
    case OptimizerKind::Gd: return "gd";
    case OptimizerKind::GdMomentum: return "gd_momentum";
    case OptimizerKind::AdaGradMean: return "adagrad_mean";
  }
  return "?";
}

struct FootprintReport {
  std::string optimizer;
  std::int64_t params = 0;
  std::int64_t m_elements = 0;
  std::int64_t v_elements = 0;
  std::int64_t state_bytes_f32 = 0;
  double v_reduction = 0.0;  // 1 - v_elements / params
};

// Optimizer-state element and byte accounting (float32 state, the standard
// choice). Adam-mini's v shrinks to one scalar per partition block.
inline FootprintReport state_footprint(OptimizerKind kind, const partition::PartitionSpec& spec,
                                       std::int64_t params) {
  if (params <= 0) throw std::invalid_argument("state_footprint: params must be positive");
  FootprintReport r;
  r.optimizer = optimizer_kind_name(kind);
  r.params = params;
  switch (kind) {
    case OptimizerKind::AdamW:
    case OptimizerKind::Adam:
    case OptimizerKind::Lamb:
      r.m_elements = params;
      r.v_elements = params;
      break;
    case OptimizerKind::AdamMini:
      r.m_elements = params;
      r.v_elements = spec.block_count();
      break;
    case OptimizerKind::Gd:
      break;
    case OptimizerKind::GdMomentum:
      r.m_elements = params;
      break;
    case OptimizerKind::AdaGradMean:
      r.v_elements = params;
      break;
  }
  r.state_bytes_f32 = 4 * (r.m_elements + r.v_elements);
  r.v_reduction = 1.0 - static_cast<double>(r.v_elements) / static_cast<double>(r.params);
  return r;
}

inline nlohmann::json to_json(const FootprintReport& r) {
  return {{"optimizer", r.optimizer},
          {"params", r.params},
          {"m_elements", r.m_elements},
          {"v_elements", r.v_elements},
          {"state_bytes_f32", r.state_bytes_f32},
          {"v_reduction", r.v_reduction}};
}

}  // namespace miniopt::optim
