#pragma once

// A tiny causal decoder with exact analytic backprop in 64-bit arithmetic.
// Pre-norm blocks, exact-softmax attention, GELU MLP, no dropout, no biases
// on the linear maps, untied output head. Parameter tensors are enumerated
// in a fixed order and carry the partition roles (embed/output by row,
// query/key by head, value/attn.proj/mlp by output neuron).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "miniopt/dense_matrix.hpp"
#include "miniopt/models/datasets.hpp"
#include "miniopt/partition.hpp"
#include "miniopt/rng.hpp"

namespace miniopt::models {

struct TransformerConfig {
  int n_layers = 2;
  int n_emb = 32;
  int n_heads = 4;
  int vocab = 64;
  int seq_len = 64;
  int mlp_width = 0;  // 0 means 4 * n_emb

  int resolved_mlp_width() const { return mlp_width > 0 ? mlp_width : 4 * n_emb; }

  void validate() const {
    if (n_layers < 1 || n_emb < 1 || n_heads < 1 || vocab < 2 || seq_len < 1) {
      throw std::invalid_argument("TransformerConfig: non-positive dimension");
    }
    if (n_emb % n_heads != 0) {
      throw std::invalid_argument("TransformerConfig: n_emb not divisible by n_heads");
    }
  }
};

// Parameter tensors in enumeration order, with partition roles. This order
// is a contract: gradients and optimizer state align with it index-for-index.
inline std::vector<partition::ParamMeta> transformer_param_metas(const TransformerConfig& cfg) {
  cfg.validate();
  using partition::ParamMeta;
  using partition::Role;
  const int e = cfg.n_emb;
  const int m = cfg.resolved_mlp_width();
  std::vector<ParamMeta> metas;
  metas.push_back({"embed", cfg.vocab, e, Role::Embed, 0});
  metas.push_back({"wpe", cfg.seq_len, e, Role::Other, 0});
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    metas.push_back({p + "ln1.gain", e, 1, Role::Other, 0});
    metas.push_back({p + "ln1.bias", e, 1, Role::Other, 0});
    metas.push_back({p + "attn.query", e, e, Role::Query, cfg.n_heads});
    metas.push_back({p + "attn.key", e, e, Role::Key, cfg.n_heads});
    metas.push_back({p + "attn.value", e, e, Role::Value, 0});
    metas.push_back({p + "attn.proj", e, e, Role::AttnProj, 0});
    metas.push_back({p + "ln2.gain", e, 1, Role::Other, 0});
    metas.push_back({p + "ln2.bias", e, 1, Role::Other, 0});
    metas.push_back({p + "mlp.fc1", m, e, Role::Mlp, 0});
    metas.push_back({p + "mlp.proj", e, m, Role::Mlp, 0});
  }
  metas.push_back({"lnf.gain", e, 1, Role::Other, 0});
  metas.push_back({"lnf.bias", e, 1, Role::Other, 0});
  metas.push_back({"output", cfg.vocab, e, Role::Output, 0});
  return metas;
}

namespace detail {

inline double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2)); }

inline double gelu_derivative(double z) {
  const double cdf = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + z * pdf;
}

constexpr double kLnEps = 1e-5;

}  // namespace detail

class TinyTransformer {
 public:
  TinyTransformer(const TransformerConfig& cfg, linalg::SeededRng rng)
      : cfg_(cfg), layout_(transformer_param_metas(cfg)) {
    params_.assign(static_cast<std::size_t>(layout_.total), 0.0);
    init_weights(rng);
  }

  const TransformerConfig& config() const { return cfg_; }
  const partition::ParamLayout& layout() const { return layout_; }
  linalg::Vector& params() { return params_; }
  const linalg::Vector& params() const { return params_; }

  std::span<double> tensor(const std::string& name) {
    for (std::size_t i = 0; i < layout_.metas.size(); ++i) {
      if (layout_.metas[i].name == name) {
        return {params_.data() + layout_.offsets[i],
                static_cast<std::size_t>(layout_.metas[i].size())};
      }
    }
    throw std::invalid_argument("TinyTransformer: unknown tensor '" + name + "'");
  }

  double loss(const TokenBatch& batch) const { return forward_backward(batch, nullptr); }

  // Mean next-token cross-entropy with causal masking; grad is aligned
  // index-for-index with the flat parameter vector.
  double loss_grad(const TokenBatch& batch, linalg::Vector& grad) const {
    grad.assign(params_.size(), 0.0);
    return forward_backward(batch, &grad);
  }

 private:
  struct LayerOffsets {
    std::int64_t ln1g, ln1b, wq, wk, wv, wo, ln2g, ln2b, wfc, wproj;
  };

  std::int64_t offset(const char* name) const { return layout_.offset_of(name); }
  std::int64_t offset(const std::string& name) const { return layout_.offset_of(name); }

  LayerOffsets layer_offsets(int l) const {
    const std::string p = "h" + std::to_string(l) + ".";
    return {offset(p + "ln1.gain"), offset(p + "ln1.bias"), offset(p + "attn.query"),
            offset(p + "attn.key"), offset(p + "attn.value"), offset(p + "attn.proj"),
            offset(p + "ln2.gain"), offset(p + "ln2.bias"), offset(p + "mlp.fc1"),
            offset(p + "mlp.proj")};
  }

  void init_weights(linalg::SeededRng& rng) {
    const double residual_scale = 1.0 / std::sqrt(2.0 * cfg_.n_layers);
    for (std::size_t i = 0; i < layout_.metas.size(); ++i) {
      const auto& meta = layout_.metas[i];
      double* dst = params_.data() + layout_.offsets[i];
      auto child = rng.child(i);
      if (meta.name.find("ln") != std::string::npos) {
        const double fill = meta.name.ends_with("gain") ? 1.0 : 0.0;
        for (std::int64_t k = 0; k < meta.size(); ++k) dst[k] = fill;
        continue;
      }
      double sd = 0.02;
      if (meta.name.ends_with("attn.proj") || meta.name.ends_with("mlp.proj")) {
        sd *= residual_scale;
      }
      for (std::int64_t k = 0; k < meta.size(); ++k) dst[k] = sd * child.gaussian();
    }
  }

  // --- primitive forward/backward pieces -------------------------------

  // y (T, out) = x (T, in) * W' with W row-major (out, in)
  static void linear_fwd(const double* w, int out, int in, const double* x, double* y, int t_len) {
    for (int t = 0; t < t_len; ++t) {
      const double* xt = x + static_cast<std::size_t>(t) * in;
      double* yt = y + static_cast<std::size_t>(t) * out;
      for (int o = 0; o < out; ++o) {
        const double* wo = w + static_cast<std::size_t>(o) * in;
        double acc = 0.0;
        for (int i = 0; i < in; ++i) acc += wo[i] * xt[i];
        yt[o] = acc;
      }
    }
  }

  static void linear_bwd(const double* w, int out, int in, const double* x, const double* dy,
                         double* dw, double* dx, int t_len) {
    for (int t = 0; t < t_len; ++t) {
      const double* xt = x + static_cast<std::size_t>(t) * in;
      const double* dyt = dy + static_cast<std::size_t>(t) * out;
      double* dxt = dx ? dx + static_cast<std::size_t>(t) * in : nullptr;
      for (int o = 0; o < out; ++o) {
        const double d = dyt[o];
        if (d == 0.0) continue;
        const double* wo = w + static_cast<std::size_t>(o) * in;
        double* dwo = dw + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) dwo[i] += d * xt[i];
        if (dxt) {
          for (int i = 0; i < in; ++i) dxt[i] += d * wo[i];
        }
      }
    }
  }

  void layernorm_fwd(const double* x, const double* gain, const double* bias, double* y,
                     double* mean, double* rstd, int t_len) const {
    const int e = cfg_.n_emb;
    for (int t = 0; t < t_len; ++t) {
      const double* xt = x + static_cast<std::size_t>(t) * e;
      double* yt = y + static_cast<std::size_t>(t) * e;
      double mu = 0.0;
      for (int i = 0; i < e; ++i) mu += xt[i];
      mu /= e;
      double var = 0.0;
      for (int i = 0; i < e; ++i) var += (xt[i] - mu) * (xt[i] - mu);
      var /= e;
      const double rs = 1.0 / std::sqrt(var + detail::kLnEps);
      mean[t] = mu;
      rstd[t] = rs;
      for (int i = 0; i < e; ++i) yt[i] = gain[i] * ((xt[i] - mu) * rs) + bias[i];
    }
  }

  void layernorm_bwd(const double* x, const double* gain, const double* mean, const double* rstd,
                     const double* dy, double* dx, double* dgain, double* dbias,
                     int t_len) const {
    const int e = cfg_.n_emb;
    for (int t = 0; t < t_len; ++t) {
      const double* xt = x + static_cast<std::size_t>(t) * e;
      const double* dyt = dy + static_cast<std::size_t>(t) * e;
      double* dxt = dx + static_cast<std::size_t>(t) * e;
      const double mu = mean[t];
      const double rs = rstd[t];
      double m1 = 0.0;
      double m2 = 0.0;
      for (int i = 0; i < e; ++i) {
        const double xhat = (xt[i] - mu) * rs;
        const double dxhat = dyt[i] * gain[i];
        dgain[i] += dyt[i] * xhat;
        dbias[i] += dyt[i];
        m1 += dxhat;
        m2 += dxhat * xhat;
      }
      m1 /= e;
      m2 /= e;
      for (int i = 0; i < e; ++i) {
        const double xhat = (xt[i] - mu) * rs;
        const double dxhat = dyt[i] * gain[i];
        dxt[i] += rs * (dxhat - m1 - xhat * m2);
      }
    }
  }

  // --- full pass --------------------------------------------------------

  double forward_backward(const TokenBatch& batch, linalg::Vector* grad) const {
    if (batch.time > cfg_.seq_len) {
      throw std::invalid_argument("TinyTransformer: sequence longer than configured seq_len");
    }
    if (batch.batch < 1 || batch.time < 1 ||
        batch.inputs.size() != static_cast<std::size_t>(batch.batch) * batch.time ||
        batch.targets.size() != batch.inputs.size()) {
      throw std::invalid_argument("TinyTransformer: malformed batch");
    }
    for (int id : batch.inputs) {
      if (id < 0 || id >= cfg_.vocab) throw std::invalid_argument("TinyTransformer: token id out of range");
    }
    for (int id : batch.targets) {
      if (id < 0 || id >= cfg_.vocab) throw std::invalid_argument("TinyTransformer: target id out of range");
    }

    const int t_len = batch.time;
    const int e = cfg_.n_emb;
    const int heads = cfg_.n_heads;
    const int hd = e / heads;
    const int m = cfg_.resolved_mlp_width();
    const int v_size = cfg_.vocab;
    const int layers = cfg_.n_layers;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const double loss_scale = 1.0 / (static_cast<double>(batch.batch) * t_len);
    const double* p = params_.data();

    const std::size_t te = static_cast<std::size_t>(t_len) * e;
    const std::size_t tm = static_cast<std::size_t>(t_len) * m;

    // per-sample caches, reused across the batch
    std::vector<std::vector<double>> xs(layers + 1, std::vector<double>(te));
    std::vector<std::vector<double>> ln1o(layers, std::vector<double>(te));
    std::vector<std::vector<double>> ln1_mean(layers, std::vector<double>(t_len));
    std::vector<std::vector<double>> ln1_rstd(layers, std::vector<double>(t_len));
    std::vector<std::vector<double>> qs(layers, std::vector<double>(te));
    std::vector<std::vector<double>> ks(layers, std::vector<double>(te));
    std::vector<std::vector<double>> vs(layers, std::vector<double>(te));
    std::vector<std::vector<double>> att(layers,
        std::vector<double>(static_cast<std::size_t>(heads) * t_len * t_len));
    std::vector<std::vector<double>> ctx(layers, std::vector<double>(te));
    std::vector<std::vector<double>> xmid(layers, std::vector<double>(te));
    std::vector<std::vector<double>> ln2o(layers, std::vector<double>(te));
    std::vector<std::vector<double>> ln2_mean(layers, std::vector<double>(t_len));
    std::vector<std::vector<double>> ln2_rstd(layers, std::vector<double>(t_len));
    std::vector<std::vector<double>> hpre(layers, std::vector<double>(tm));
    std::vector<std::vector<double>> hact(layers, std::vector<double>(tm));
    std::vector<double> lnfo(te);
    std::vector<double> lnf_mean(t_len);
    std::vector<double> lnf_rstd(t_len);
    std::vector<double> probs(static_cast<std::size_t>(t_len) * v_size);
    std::vector<double> buf_te(te);
    std::vector<double> buf2_te(te);
    std::vector<double> dq(te), dk(te), dv(te), dctx(te);
    std::vector<double> dbuf_tm(tm), dbuf2_tm(tm);
    std::vector<double> datt_row(t_len);

    const std::int64_t off_embed = offset("embed");
    const std::int64_t off_wpe = offset("wpe");
    const std::int64_t off_lnfg = offset("lnf.gain");
    const std::int64_t off_lnfb = offset("lnf.bias");
    const std::int64_t off_out = offset("output");
    std::vector<LayerOffsets> lo;
    lo.reserve(layers);
    for (int l = 0; l < layers; ++l) lo.push_back(layer_offsets(l));

    double total_loss = 0.0;
    for (int b = 0; b < batch.batch; ++b) {
      const int* ids = batch.inputs.data() + static_cast<std::size_t>(b) * t_len;
      const int* tgt = batch.targets.data() + static_cast<std::size_t>(b) * t_len;

      // token + position embeddings
      for (int t = 0; t < t_len; ++t) {
        const double* wte_row = p + off_embed + static_cast<std::size_t>(ids[t]) * e;
        const double* wpe_row = p + off_wpe + static_cast<std::size_t>(t) * e;
        double* x0 = xs[0].data() + static_cast<std::size_t>(t) * e;
        for (int i = 0; i < e; ++i) x0[i] = wte_row[i] + wpe_row[i];
      }

      for (int l = 0; l < layers; ++l) {
        const auto& o = lo[l];
        layernorm_fwd(xs[l].data(), p + o.ln1g, p + o.ln1b, ln1o[l].data(), ln1_mean[l].data(),
                      ln1_rstd[l].data(), t_len);
        linear_fwd(p + o.wq, e, e, ln1o[l].data(), qs[l].data(), t_len);
        linear_fwd(p + o.wk, e, e, ln1o[l].data(), ks[l].data(), t_len);
        linear_fwd(p + o.wv, e, e, ln1o[l].data(), vs[l].data(), t_len);

        for (int h = 0; h < heads; ++h) {
          const int hoff = h * hd;
          double* att_h = att[l].data() + static_cast<std::size_t>(h) * t_len * t_len;
          for (int t = 0; t < t_len; ++t) {
            const double* qt = qs[l].data() + static_cast<std::size_t>(t) * e + hoff;
            double* row = att_h + static_cast<std::size_t>(t) * t_len;
            double max_s = -1e300;
            for (int u = 0; u <= t; ++u) {
              const double* ku = ks[l].data() + static_cast<std::size_t>(u) * e + hoff;
              double s = 0.0;
              for (int j = 0; j < hd; ++j) s += qt[j] * ku[j];
              s *= att_scale;
              row[u] = s;
              max_s = std::max(max_s, s);
            }
            double denom = 0.0;
            for (int u = 0; u <= t; ++u) {
              row[u] = std::exp(row[u] - max_s);
              denom += row[u];
            }
            for (int u = 0; u <= t; ++u) row[u] /= denom;
            double* ctx_t = ctx[l].data() + static_cast<std::size_t>(t) * e + hoff;
            for (int j = 0; j < hd; ++j) ctx_t[j] = 0.0;
            for (int u = 0; u <= t; ++u) {
              const double a = row[u];
              const double* vu = vs[l].data() + static_cast<std::size_t>(u) * e + hoff;
              for (int j = 0; j < hd; ++j) ctx_t[j] += a * vu[j];
            }
          }
        }

        linear_fwd(p + o.wo, e, e, ctx[l].data(), buf_te.data(), t_len);
        for (std::size_t i = 0; i < te; ++i) xmid[l][i] = xs[l][i] + buf_te[i];

        layernorm_fwd(xmid[l].data(), p + o.ln2g, p + o.ln2b, ln2o[l].data(), ln2_mean[l].data(),
                      ln2_rstd[l].data(), t_len);
        linear_fwd(p + o.wfc, m, e, ln2o[l].data(), hpre[l].data(), t_len);
        for (std::size_t i = 0; i < tm; ++i) hact[l][i] = detail::gelu(hpre[l][i]);
        linear_fwd(p + o.wproj, e, m, hact[l].data(), buf_te.data(), t_len);
        for (std::size_t i = 0; i < te; ++i) xs[l + 1][i] = xmid[l][i] + buf_te[i];
      }

      layernorm_fwd(xs[layers].data(), p + off_lnfg, p + off_lnfb, lnfo.data(), lnf_mean.data(),
                    lnf_rstd.data(), t_len);

      // logits, loss, softmax cache
      for (int t = 0; t < t_len; ++t) {
        const double* xt = lnfo.data() + static_cast<std::size_t>(t) * e;
        double* pr = probs.data() + static_cast<std::size_t>(t) * v_size;
        double max_logit = -1e300;
        for (int w = 0; w < v_size; ++w) {
          const double* row = p + off_out + static_cast<std::size_t>(w) * e;
          double z = 0.0;
          for (int i = 0; i < e; ++i) z += row[i] * xt[i];
          pr[w] = z;
          max_logit = std::max(max_logit, z);
        }
        double denom = 0.0;
        for (int w = 0; w < v_size; ++w) {
          pr[w] = std::exp(pr[w] - max_logit);
          denom += pr[w];
        }
        for (int w = 0; w < v_size; ++w) pr[w] /= denom;
        total_loss -= std::log(std::max(pr[tgt[t]], 1e-300)) * loss_scale;
      }

      if (!grad) continue;
      double* g = grad->data();

      // logits -> final layer norm output
      std::fill(buf_te.begin(), buf_te.end(), 0.0);  // d lnfo
      for (int t = 0; t < t_len; ++t) {
        const double* xt = lnfo.data() + static_cast<std::size_t>(t) * e;
        const double* pr = probs.data() + static_cast<std::size_t>(t) * v_size;
        double* dxt = buf_te.data() + static_cast<std::size_t>(t) * e;
        for (int w = 0; w < v_size; ++w) {
          const double dlogit = (pr[w] - (w == tgt[t] ? 1.0 : 0.0)) * loss_scale;
          if (dlogit == 0.0) continue;
          const double* row = p + off_out + static_cast<std::size_t>(w) * e;
          double* grow = g + off_out + static_cast<std::size_t>(w) * e;
          for (int i = 0; i < e; ++i) {
            grow[i] += dlogit * xt[i];
            dxt[i] += dlogit * row[i];
          }
        }
      }

      // final layer norm
      std::fill(buf2_te.begin(), buf2_te.end(), 0.0);  // d xs[layers]
      layernorm_bwd(xs[layers].data(), p + off_lnfg, lnf_mean.data(), lnf_rstd.data(),
                    buf_te.data(), buf2_te.data(), g + off_lnfg, g + off_lnfb, t_len);

      // buf2_te now carries d(residual stream); walk the blocks backwards
      for (int l = layers - 1; l >= 0; --l) {
        const auto& o = lo[l];

        // MLP branch: d x_out -> d xmid
        std::fill(dbuf_tm.begin(), dbuf_tm.end(), 0.0);  // d hact
        linear_bwd(p + o.wproj, e, m, hact[l].data(), buf2_te.data(), g + o.wproj,
                   dbuf_tm.data(), t_len);
        for (std::size_t i = 0; i < tm; ++i) {
          dbuf2_tm[i] = dbuf_tm[i] * detail::gelu_derivative(hpre[l][i]);
        }
        std::fill(buf_te.begin(), buf_te.end(), 0.0);  // d ln2o
        linear_bwd(p + o.wfc, m, e, ln2o[l].data(), dbuf2_tm.data(), g + o.wfc, buf_te.data(),
                   t_len);
        layernorm_bwd(xmid[l].data(), p + o.ln2g, ln2_mean[l].data(), ln2_rstd[l].data(),
                      buf_te.data(), buf2_te.data(), g + o.ln2g, g + o.ln2b, t_len);
        // buf2_te now = d xmid (residual passthrough already included)

        // attention branch: d xmid -> d xs[l]
        std::fill(dctx.begin(), dctx.end(), 0.0);
        linear_bwd(p + o.wo, e, e, ctx[l].data(), buf2_te.data(), g + o.wo, dctx.data(), t_len);

        std::fill(dq.begin(), dq.end(), 0.0);
        std::fill(dk.begin(), dk.end(), 0.0);
        std::fill(dv.begin(), dv.end(), 0.0);
        for (int h = 0; h < heads; ++h) {
          const int hoff = h * hd;
          const double* att_h = att[l].data() + static_cast<std::size_t>(h) * t_len * t_len;
          for (int t = 0; t < t_len; ++t) {
            const double* row = att_h + static_cast<std::size_t>(t) * t_len;
            const double* dctx_t = dctx.data() + static_cast<std::size_t>(t) * e + hoff;
            double dot = 0.0;
            for (int u = 0; u <= t; ++u) {
              const double* vu = vs[l].data() + static_cast<std::size_t>(u) * e + hoff;
              double da = 0.0;
              for (int j = 0; j < hd; ++j) da += dctx_t[j] * vu[j];
              datt_row[u] = da;
              dot += row[u] * da;
              double* dvu = dv.data() + static_cast<std::size_t>(u) * e + hoff;
              const double a = row[u];
              for (int j = 0; j < hd; ++j) dvu[j] += a * dctx_t[j];
            }
            const double* qt = qs[l].data() + static_cast<std::size_t>(t) * e + hoff;
            double* dqt = dq.data() + static_cast<std::size_t>(t) * e + hoff;
            for (int u = 0; u <= t; ++u) {
              const double ds = row[u] * (datt_row[u] - dot) * att_scale;
              if (ds == 0.0) continue;
              const double* ku = ks[l].data() + static_cast<std::size_t>(u) * e + hoff;
              double* dku = dk.data() + static_cast<std::size_t>(u) * e + hoff;
              for (int j = 0; j < hd; ++j) {
                dqt[j] += ds * ku[j];
                dku[j] += ds * qt[j];
              }
            }
          }
        }

        std::fill(buf_te.begin(), buf_te.end(), 0.0);  // d ln1o
        linear_bwd(p + o.wq, e, e, ln1o[l].data(), dq.data(), g + o.wq, buf_te.data(), t_len);
        linear_bwd(p + o.wk, e, e, ln1o[l].data(), dk.data(), g + o.wk, buf_te.data(), t_len);
        linear_bwd(p + o.wv, e, e, ln1o[l].data(), dv.data(), g + o.wv, buf_te.data(), t_len);
        layernorm_bwd(xs[l].data(), p + o.ln1g, ln1_mean[l].data(), ln1_rstd[l].data(),
                      buf_te.data(), buf2_te.data(), g + o.ln1g, g + o.ln1b, t_len);
        // buf2_te now = d xs[l]
      }

      // embeddings
      for (int t = 0; t < t_len; ++t) {
        const double* dxt = buf2_te.data() + static_cast<std::size_t>(t) * e;
        double* gwte = g + off_embed + static_cast<std::size_t>(ids[t]) * e;
        double* gwpe = g + off_wpe + static_cast<std::size_t>(t) * e;
        for (int i = 0; i < e; ++i) {
          gwte[i] += dxt[i];
          gwpe[i] += dxt[i];
        }
      }
    }
    return total_loss;
  }

  TransformerConfig cfg_;
  partition::ParamLayout layout_;
  linalg::Vector params_;
};

}  // namespace miniopt::models
