#pragma once

// One-hidden-layer MLPs with exact analytic gradients. The binary model is
// f(theta, x) = sum_i a_i * tanh(w_i' x) under the logistic loss with labels
// in {-1, +1}; tanh keeps phi' smooth so finite-difference Hessian probes of
// the model are trustworthy. A small multi-class softmax variant backs the
// structural Hessian study.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "miniopt/dense_matrix.hpp"
#include "miniopt/models/datasets.hpp"
#include "miniopt/partition.hpp"
#include "miniopt/rng.hpp"

namespace miniopt::models {

using linalg::Vector;

namespace detail {

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

struct MlpBinary {
  int n_neurons = 0;
  int dim = 0;
  Vector theta;  // hidden weights W (n_neurons x dim) rows-first, then output weights a (n_neurons)

  static MlpBinary init(int n_neurons, int dim, linalg::SeededRng& rng, double scale = 0.5) {
    if (n_neurons < 2) throw std::invalid_argument("MlpBinary: need n_neurons >= 2");
    if (dim < 1) throw std::invalid_argument("MlpBinary: need dim >= 1");
    MlpBinary m;
    m.n_neurons = n_neurons;
    m.dim = dim;
    m.theta.resize(static_cast<std::size_t>(n_neurons) * dim + n_neurons);
    for (double& v : m.theta) v = scale * rng.gaussian();
    return m;
  }

  std::vector<partition::ParamMeta> metas() const {
    return {{"mlp.hidden", n_neurons, dim, partition::Role::Mlp, 0},
            {"mlp.out", n_neurons, 1, partition::Role::Other, 0}};
  }

  std::span<const double> w_row(int i) const {
    return {theta.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  double a(int i) const { return theta[static_cast<std::size_t>(n_neurons) * dim + i]; }

  double forward(std::span<const double> x) const {
    double f = 0.0;
    for (int i = 0; i < n_neurons; ++i) {
      double pre = 0.0;
      const double* w = theta.data() + static_cast<std::size_t>(i) * dim;
      for (int j = 0; j < dim; ++j) pre += w[j] * x[j];
      f += a(i) * std::tanh(pre);
    }
    return f;
  }

  // p(x) = 1 / (1 + exp(-y f)) for y in {-1, +1}.
  double sample_p(std::span<const double> x, int y_pm) const {
    return detail::sigmoid(static_cast<double>(y_pm) * forward(x));
  }

  // Mean logistic loss over the batch; grad matches the theta layout.
  // Dataset labels {0,1} are mapped to {-1,+1} here.
  double loss_grad(const BlobBatch& batch, Vector& grad) const {
    if (batch.dim != dim) throw std::invalid_argument("MlpBinary::loss_grad: dim mismatch");
    grad.assign(theta.size(), 0.0);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size);
    std::vector<double> act(static_cast<std::size_t>(n_neurons));
    for (int s = 0; s < batch.size; ++s) {
      const double* x = batch.x.data() + static_cast<std::size_t>(s) * dim;
      const double y = batch.label[static_cast<std::size_t>(s)] == 1 ? 1.0 : -1.0;
      double f = 0.0;
      for (int i = 0; i < n_neurons; ++i) {
        double pre = 0.0;
        const double* w = theta.data() + static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) pre += w[j] * x[j];
        act[static_cast<std::size_t>(i)] = std::tanh(pre);
        f += a(i) * act[static_cast<std::size_t>(i)];
      }
      loss += detail::softplus(-y * f) * inv_n;
      // d loss / d f = -y * (1 - p) with p = sigmoid(y f)
      const double dl_df = -y * detail::sigmoid(-y * f) * inv_n;
      for (int i = 0; i < n_neurons; ++i) {
        const double tanh_i = act[static_cast<std::size_t>(i)];
        grad[static_cast<std::size_t>(n_neurons) * dim + i] += dl_df * tanh_i;
        const double common = dl_df * a(i) * (1.0 - tanh_i * tanh_i);
        double* gw = grad.data() + static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) gw[j] += common * x[j];
      }
    }
    return loss;
  }

  double loss(const BlobBatch& batch) const {
    if (batch.dim != dim) throw std::invalid_argument("MlpBinary::loss: dim mismatch");
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size);
    for (int s = 0; s < batch.size; ++s) {
      const double* x = batch.x.data() + static_cast<std::size_t>(s) * dim;
      const double y = batch.label[static_cast<std::size_t>(s)] == 1 ? 1.0 : -1.0;
      total += detail::softplus(-y * forward({x, static_cast<std::size_t>(dim)})) * inv_n;
    }
    return total;
  }
};

// Multi-class head over the same hidden layer: logits_k = sum_i V_ki tanh(w_i' x),
// softmax cross-entropy. Labels are class indices.
struct MlpMulti {
  int n_neurons = 0;
  int dim = 0;
  int classes = 0;
  Vector theta;  // W (n_neurons x dim), then V (classes x n_neurons)

  static MlpMulti init(int n_neurons, int dim, int classes, linalg::SeededRng& rng,
                       double scale = 0.5) {
    if (n_neurons < 2 || dim < 1 || classes < 2) throw std::invalid_argument("MlpMulti: bad sizes");
    MlpMulti m;
    m.n_neurons = n_neurons;
    m.dim = dim;
    m.classes = classes;
    m.theta.resize(static_cast<std::size_t>(n_neurons) * dim +
                   static_cast<std::size_t>(classes) * n_neurons);
    for (double& v : m.theta) v = scale * rng.gaussian();
    return m;
  }

  std::vector<partition::ParamMeta> metas() const {
    return {{"mlp.hidden", n_neurons, dim, partition::Role::Mlp, 0},
            {"mlp.out", classes, n_neurons, partition::Role::Other, 0}};
  }

  double loss_grad(const BlobBatch& batch, Vector& grad) const {
    if (batch.dim != dim) throw std::invalid_argument("MlpMulti::loss_grad: dim mismatch");
    grad.assign(theta.size(), 0.0);
    const std::size_t v_off = static_cast<std::size_t>(n_neurons) * dim;
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size);
    std::vector<double> act(static_cast<std::size_t>(n_neurons));
    std::vector<double> logits(static_cast<std::size_t>(classes));
    for (int s = 0; s < batch.size; ++s) {
      const double* x = batch.x.data() + static_cast<std::size_t>(s) * dim;
      const int y = batch.label[static_cast<std::size_t>(s)];
      if (y < 0 || y >= classes) throw std::invalid_argument("MlpMulti::loss_grad: bad label");
      for (int i = 0; i < n_neurons; ++i) {
        double pre = 0.0;
        const double* w = theta.data() + static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) pre += w[j] * x[j];
        act[static_cast<std::size_t>(i)] = std::tanh(pre);
      }
      double max_logit = -1e300;
      for (int k = 0; k < classes; ++k) {
        double z = 0.0;
        const double* vk = theta.data() + v_off + static_cast<std::size_t>(k) * n_neurons;
        for (int i = 0; i < n_neurons; ++i) z += vk[i] * act[static_cast<std::size_t>(i)];
        logits[static_cast<std::size_t>(k)] = z;
        max_logit = std::max(max_logit, z);
      }
      double sum_exp = 0.0;
      for (int k = 0; k < classes; ++k) {
        sum_exp += std::exp(logits[static_cast<std::size_t>(k)] - max_logit);
      }
      const double log_z = max_logit + std::log(sum_exp);
      loss += (log_z - logits[static_cast<std::size_t>(y)]) * inv_n;
      for (int k = 0; k < classes; ++k) {
        const double p_k = std::exp(logits[static_cast<std::size_t>(k)] - log_z);
        const double dz = (p_k - (k == y ? 1.0 : 0.0)) * inv_n;
        const double* vk = theta.data() + v_off + static_cast<std::size_t>(k) * n_neurons;
        double* gvk = grad.data() + v_off + static_cast<std::size_t>(k) * n_neurons;
        for (int i = 0; i < n_neurons; ++i) {
          const double tanh_i = act[static_cast<std::size_t>(i)];
          gvk[i] += dz * tanh_i;
          const double common = dz * vk[i] * (1.0 - tanh_i * tanh_i);
          const double* xi = x;
          double* gw = grad.data() + static_cast<std::size_t>(i) * dim;
          for (int j = 0; j < dim; ++j) gw[j] += common * xi[j];
        }
      }
    }
    return loss;
  }

  double loss(const BlobBatch& batch) const {
    Vector grad;
    return loss_grad(batch, grad);
  }
};

}  // namespace miniopt::models
