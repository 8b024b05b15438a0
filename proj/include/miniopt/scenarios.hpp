#pragma once

// Scenario runners behind the CLI. Each takes a parsed RunConfig, writes
// CSV/SVG outputs into the run directory, and optionally evaluates its
// built-in checks (exit code 4 on failure). Outputs are byte-deterministic
// for a given config, including under the parallel worker pool: every trial
// owns a child rng and results are aggregated in index order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "miniopt/hessian.hpp"
#include "miniopt/io/csv.hpp"
#include "miniopt/io/svg.hpp"
#include "miniopt/models/datasets.hpp"
#include "miniopt/models/mlp.hpp"
#include "miniopt/models/quadratic.hpp"
#include "miniopt/models/transformer.hpp"
#include "miniopt/optim.hpp"
#include "miniopt/partition.hpp"
#include "miniopt/presets.hpp"
#include "miniopt/runconfig.hpp"
#include "miniopt/schedule.hpp"

namespace miniopt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitCheckFailed = 4;

inline constexpr double kDivergenceLossLimit = 1e6;

namespace detail {

inline void run_indexed(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline double trailing_mean(std::span<const double> values, double frac = 0.05) {
  if (values.empty()) throw std::invalid_argument("trailing_mean: empty");
  const std::size_t n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(frac * static_cast<double>(values.size()))));
  double acc = 0.0;
  for (std::size_t i = values.size() - n; i < values.size(); ++i) acc += values[i];
  return acc / static_cast<double>(n);
}

inline std::filesystem::path prepare_out_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// quadratic: races on the three-block random quadratic
// ---------------------------------------------------------------------------

struct QuadraticRaceResult {
  // loss trajectories per seed, [seed][step] with step 0 = initial loss
  std::vector<std::vector<double>> gd;
  std::vector<std::vector<double>> adam;
  std::vector<std::vector<double>> blockwise;
  // per block and seed: final losses of the sub-block races
  std::vector<std::vector<std::vector<double>>> sub_gd;    // [seed][block][step]
  std::vector<std::vector<std::vector<double>>> sub_adam;  // [seed][block][step]
  std::vector<double> gd_lr;  // per seed, 2/(L+mu) of the full Hessian
};

inline QuadraticRaceResult run_quadratic_races(const RunConfig& cfg) {
  QuadraticRaceResult res;
  const int seeds = cfg.n_seeds;
  const std::int64_t steps = cfg.steps;
  res.gd.resize(seeds);
  res.adam.resize(seeds);
  res.blockwise.resize(seeds);
  res.sub_gd.resize(seeds);
  res.sub_adam.resize(seeds);
  res.gd_lr.resize(seeds);

  detail::run_indexed(static_cast<std::size_t>(seeds), cfg.threads, [&](std::size_t s) {
    auto rng = linalg::SeededRng(cfg.seed).child(s);
    models::QuadraticProblem prob = models::build_block_quadratic(rng);
    const linalg::Vector w0 = prob.w;
    const auto blocks = models::quad_block_ranges(prob);

    const double gd_lr = optim::optimal_gd_lr(prob.h);
    res.gd_lr[s] = gd_lr;
    std::vector<double> block_lrs;
    std::vector<linalg::DenseMatrix> block_mats;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      block_mats.push_back(models::quad_block_matrix(prob, b));
      block_lrs.push_back(optim::optimal_gd_lr(block_mats.back()));
    }

    linalg::Vector grad;
    // full-problem GD
    prob.w = w0;
    res.gd[s].push_back(models::quad_loss(prob));
    for (std::int64_t k = 0; k < steps; ++k) {
      models::quad_loss_grad(prob, grad);
      optim::gd_step(prob.w, grad, gd_lr);
      res.gd[s].push_back(models::quad_loss(prob));
    }
    // full-problem Adam variant (beta1 = 0, cumulative-mean v)
    prob.w = w0;
    auto agm = optim::AdaGradMeanState::zeros(w0.size());
    res.adam[s].push_back(models::quad_loss(prob));
    for (std::int64_t k = 0; k < steps; ++k) {
      models::quad_loss_grad(prob, grad);
      optim::adagrad_mean_adam_step(prob.w, grad, agm, cfg.optimizer.adam_lr, cfg.optimizer.eps);
      res.adam[s].push_back(models::quad_loss(prob));
    }
    // blockwise GD with per-block 2/(L_b + mu_b)
    prob.w = w0;
    res.blockwise[s].push_back(models::quad_loss(prob));
    for (std::int64_t k = 0; k < steps; ++k) {
      models::quad_loss_grad(prob, grad);
      optim::blockwise_gd_step(prob.w, grad, blocks, block_lrs);
      res.blockwise[s].push_back(models::quad_loss(prob));
    }

    // each dense sub-block as its own problem
    res.sub_gd[s].resize(blocks.size());
    res.sub_adam[s].resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto [lo, hi] = blocks[b];
      models::QuadraticProblem sub;
      sub.h = block_mats[b];
      sub.block_dims = {hi - lo};
      const linalg::Vector sub_w0(w0.begin() + lo, w0.begin() + hi);

      sub.w = sub_w0;
      res.sub_gd[s][b].push_back(models::quad_loss(sub));
      for (std::int64_t k = 0; k < steps; ++k) {
        models::quad_loss_grad(sub, grad);
        optim::gd_step(sub.w, grad, block_lrs[b]);
        res.sub_gd[s][b].push_back(models::quad_loss(sub));
      }
      sub.w = sub_w0;
      auto sub_agm = optim::AdaGradMeanState::zeros(sub.w.size());
      res.sub_adam[s][b].push_back(models::quad_loss(sub));
      for (std::int64_t k = 0; k < steps; ++k) {
        models::quad_loss_grad(sub, grad);
        optim::adagrad_mean_adam_step(sub.w, grad, sub_agm, cfg.optimizer.adam_lr,
                                      cfg.optimizer.eps);
        res.sub_adam[s][b].push_back(models::quad_loss(sub));
      }
    }
  });
  return res;
}

inline bool quadratic_ordering_holds(const QuadraticRaceResult& res) {
  const int seeds = static_cast<int>(res.gd.size());
  int ordered = 0;
  for (int s = 0; s < seeds; ++s) {
    const double gd = res.gd[s].back();
    const double adam = res.adam[s].back();
    const double blockwise = res.blockwise[s].back();
    if (blockwise < adam && adam < gd) ++ordered;
  }
  if (ordered * 10 < seeds * 9) return false;
  const std::size_t n_blocks = res.sub_gd.empty() ? 0 : res.sub_gd[0].size();
  for (std::size_t b = 0; b < n_blocks; ++b) {
    int sub_ordered = 0;
    for (int s = 0; s < seeds; ++s) {
      if (res.sub_gd[s][b].back() < res.sub_adam[s][b].back()) ++sub_ordered;
    }
    if (sub_ordered * 10 < seeds * 9) return false;
  }
  return true;
}

inline int run_quadratic(const RunConfig& cfg, bool check) {
  const auto dir = detail::prepare_out_dir(cfg);
  const QuadraticRaceResult res = run_quadratic_races(cfg);

  {
    const std::vector<std::string> header = {"seed", "optimizer", "step", "loss", "lr"};
    io::CsvWriter csv(dir / "quadratic.csv", cfg.provenance(), header);
    for (int s = 0; s < cfg.n_seeds; ++s) {
      const auto emit = [&](const char* name, const std::vector<double>& series, double lr) {
        for (std::size_t k = 0; k < series.size(); ++k) {
          csv.write_row({io::fmt_int(s), name, io::fmt_int(static_cast<std::int64_t>(k)),
                         io::fmt_double(series[k]), io::fmt_double(lr)});
        }
      };
      emit("gd", res.gd[s], res.gd_lr[s]);
      emit("adagrad_mean", res.adam[s], cfg.optimizer.adam_lr);
      emit("blockwise_gd", res.blockwise[s], 0.0);
    }
  }
  {
    const std::vector<std::string> header = {"seed", "block", "optimizer", "step", "loss"};
    io::CsvWriter csv(dir / "quadratic_subblocks.csv", cfg.provenance(), header);
    for (int s = 0; s < cfg.n_seeds; ++s) {
      for (std::size_t b = 0; b < res.sub_gd[s].size(); ++b) {
        const auto emit = [&](const char* name, const std::vector<double>& series) {
          for (std::size_t k = 0; k < series.size(); ++k) {
            csv.write_row({io::fmt_int(s), io::fmt_int(static_cast<std::int64_t>(b)), name,
                           io::fmt_int(static_cast<std::int64_t>(k)), io::fmt_double(series[k])});
          }
        };
        emit("gd", res.sub_gd[s][b]);
        emit("adagrad_mean", res.sub_adam[s][b]);
      }
    }
  }
  {
    const auto as_series = [](const std::string& label, const std::vector<double>& y) {
      io::Series s;
      s.label = label;
      s.y = y;
      s.x.resize(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) s.x[i] = static_cast<double>(i);
      return s;
    };
    std::vector<io::Series> series = {as_series("gd", res.gd[0]),
                                      as_series("adagrad_mean", res.adam[0]),
                                      as_series("blockwise_gd", res.blockwise[0])};
    io::LinePlotOptions opts;
    opts.title = "three-block quadratic (seed 0)";
    opts.x_label = "iteration";
    opts.y_label = "loss";
    opts.log_y = true;
    io::emit_svg_lineplot(series, opts, dir / "quadratic.svg");

    std::vector<io::Series> sub = {as_series("gd", res.sub_gd[0][0]),
                                   as_series("adagrad_mean", res.sub_adam[0][0])};
    opts.title = "dense sub-block 0 (seed 0)";
    io::emit_svg_lineplot(sub, opts, dir / "quadratic_subblocks.svg");
  }

  if (check && !quadratic_ordering_holds(res)) return kExitCheckFailed;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// precond_study: tau / r sweeps
// ---------------------------------------------------------------------------

inline int run_precond_study(const RunConfig& cfg, bool check) {
  const auto dir = detail::prepare_out_dir(cfg);
  std::vector<double> r_grid(static_cast<std::size_t>(cfg.grid.r_points));
  for (int k = 0; k < cfg.grid.r_points; ++k) {
    r_grid[static_cast<std::size_t>(k)] =
        static_cast<double>(k) / static_cast<double>(cfg.grid.r_points - 1);
  }

  std::vector<std::vector<hessian::TauRSample>> all_rows(cfg.grid.sweeps.size());
  detail::run_indexed(cfg.grid.sweeps.size(), 1, [&](std::size_t c) {
    const auto& cell = cfg.grid.sweeps[c];
    all_rows[c] = hessian::sweep_tau_r(cell.d, cell.kappa, r_grid, cfg.grid.n_theta, cfg.grid.n_x,
                                       linalg::SeededRng(cfg.seed).child(c), cfg.threads);
  });

  {
    const std::vector<std::string> header = {"d", "kappa", "R", "theta_seed",
                                             "tau_mean", "r_mean", "n_x"};
    io::CsvWriter csv(dir / "precond_study.csv", cfg.provenance(), header);
    for (const auto& rows : all_rows) {
      for (const auto& row : rows) {
        csv.write_row({io::fmt_int(row.d), io::fmt_double(row.kappa), io::fmt_double(row.rotation),
                       std::to_string(row.theta_seed), io::fmt_double(row.tau_mean),
                       io::fmt_double(row.r_mean), io::fmt_int(row.n_x)});
      }
    }
  }
  {
    std::vector<io::Series> series;
    for (std::size_t c = 0; c < all_rows.size(); ++c) {
      io::Series s;
      s.label = "d=" + std::to_string(cfg.grid.sweeps[c].d) +
                " kappa=" + io::fmt_double(cfg.grid.sweeps[c].kappa);
      for (const auto& row : all_rows[c]) {
        s.x.push_back(row.tau_mean);
        s.y.push_back(row.r_mean);
      }
      series.push_back(std::move(s));
    }
    io::LinePlotOptions opts;
    opts.title = "preconditioner effectiveness";
    opts.x_label = "tau";
    opts.y_label = "r";
    opts.log_y = true;
    io::emit_svg_lineplot(series, opts, dir / "precond_study.svg");
  }

  if (check) {
    // factor-2 separation between the densest cell and the diagonal cell,
    // evaluated on a d=50, kappa=500 sweep
    bool found = false;
    for (std::size_t c = 0; c < all_rows.size(); ++c) {
      if (cfg.grid.sweeps[c].d != 50 || cfg.grid.sweeps[c].kappa != 500.0) continue;
      found = true;
      const auto& rows = all_rows[c];
      const auto smallest_tau =
          std::min_element(rows.begin(), rows.end(),
                           [](const auto& a, const auto& b) { return a.tau_mean < b.tau_mean; });
      const auto diag_row =
          std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.rotation == 0.0; });
      if (diag_row == rows.end()) return kExitCheckFailed;
      if (diag_row->tau_mean != 1.0) return kExitCheckFailed;
      if (!(smallest_tau->r_mean >= 2.0 * diag_row->r_mean)) return kExitCheckFailed;
    }
    if (!found) return kExitCheckFailed;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// hessian_mlp: trained-MLP Hessian structure and the analytic cross blocks
// ---------------------------------------------------------------------------

struct HessianMlpCheckpoint {
  std::int64_t step = 0;
  double energy_ratio = 0.0;
  double eq3_max_rel_err = 0.0;
};

inline double mlp_cross_block_err(const models::MlpBinary& model, const models::BlobBatch& data,
                                  linalg::SeededRng& rng, int n_pairs) {
  // compare the analytic cross-neuron blocks against finite differences of
  // the single-sample gradient; one aggregate relative error over all tested
  // (sample, i, j) tuples, so near-zero blocks cannot inflate the ratio
  double diff_sq = 0.0;
  double ref_sq = 0.0;
  for (int trial = 0; trial < n_pairs; ++trial) {
    const int s = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(data.size)));
    const int i = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(model.n_neurons)));
    int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(model.n_neurons - 1)));
    if (j >= i) ++j;
    models::BlobBatch one;
    one.dim = data.dim;
    one.size = 1;
    one.x.assign(data.x.begin() + static_cast<std::size_t>(s) * data.dim,
                 data.x.begin() + static_cast<std::size_t>(s + 1) * data.dim);
    one.label = {data.label[static_cast<std::size_t>(s)]};

    const int d = model.dim;
    std::vector<std::size_t> coords;
    for (int k = 0; k < d; ++k) coords.push_back(static_cast<std::size_t>(i) * d + k);
    for (int k = 0; k < d; ++k) coords.push_back(static_cast<std::size_t>(j) * d + k);

    models::MlpBinary probe = model;
    const hessian::GradFn grad_fn = [&](std::span<const double> theta, std::span<double> out) {
      std::copy(theta.begin(), theta.end(), probe.theta.begin());
      linalg::Vector g;
      probe.loss_grad(one, g);
      std::copy(g.begin(), g.end(), out.begin());
    };
    const linalg::DenseMatrix fd =
        hessian::fd_hessian_subset(grad_fn, model.theta, coords, 1e-5);
    const int y_pm = one.label[0] == 1 ? 1 : -1;
    const linalg::DenseMatrix analytic = hessian::mlp_cross_block(
        model, {one.x.data(), static_cast<std::size_t>(d)}, y_pm, i, j);

    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        const double fd_rc = fd(static_cast<std::size_t>(r), static_cast<std::size_t>(d + c));
        const double diff = analytic(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) - fd_rc;
        diff_sq += diff * diff;
        ref_sq += fd_rc * fd_rc;
      }
    }
  }
  return std::sqrt(diff_sq) / std::max(std::sqrt(ref_sq), 1e-300);
}

inline int run_hessian_mlp(const RunConfig& cfg, bool check) {
  const auto dir = detail::prepare_out_dir(cfg);
  const auto& ms = cfg.mlp;
  if (static_cast<std::int64_t>(ms.n_neurons) * ms.dim > static_cast<std::int64_t>(hessian::kMaxProbeCoords)) {
    throw ConfigError("hessian_mlp: probe exceeds the 2000-coordinate cap");
  }
  auto root = linalg::SeededRng(cfg.seed);
  auto data_rng = root.child(0);
  auto init_rng = root.child(1);
  auto pair_rng = root.child(2);
  const models::BlobBatch data =
      models::make_blob_dataset(ms.dim, ms.train_size, ms.separation, data_rng);
  models::MlpBinary model = models::MlpBinary::init(ms.n_neurons, ms.dim, init_rng);

  const std::vector<std::size_t> w_coords = [&] {
    std::vector<std::size_t> c(static_cast<std::size_t>(ms.n_neurons) * ms.dim);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = k;
    return c;
  }();
  const std::vector<int> neuron_of = [&] {
    std::vector<int> b(w_coords.size());
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = static_cast<int>(k) / ms.dim;
    return b;
  }();

  std::vector<HessianMlpCheckpoint> checkpoints;
  const auto probe = [&](std::int64_t step) {
    models::MlpBinary snapshot = model;
    const hessian::GradFn grad_fn = [&](std::span<const double> theta, std::span<double> out) {
      std::copy(theta.begin(), theta.end(), snapshot.theta.begin());
      linalg::Vector g;
      snapshot.loss_grad(data, g);
      std::copy(g.begin(), g.end(), out.begin());
    };
    const linalg::DenseMatrix h = hessian::fd_hessian_subset(grad_fn, model.theta, w_coords, 1e-5);
    HessianMlpCheckpoint cp;
    cp.step = step;
    cp.energy_ratio = hessian::block_energy_ratio(h, neuron_of);
    cp.eq3_max_rel_err = mlp_cross_block_max_err(model, data, pair_rng, 8);
    checkpoints.push_back(cp);

    const std::string tag = "ckpt" + std::to_string(checkpoints.size() - 1);
    io::emit_svg_heatmap(h, "mlp hessian at step " + std::to_string(step),
                         dir / ("hessian_mlp_" + tag + ".svg"));
    std::vector<std::string> header(h.cols());
    for (std::size_t c = 0; c < h.cols(); ++c) header[c] = "c" + std::to_string(c);
    io::CsvWriter mat_csv(dir / ("hessian_mlp_" + tag + ".csv"), cfg.provenance(), header);
    std::vector<std::string> row(h.cols());
    for (std::size_t r = 0; r < h.rows(); ++r) {
      for (std::size_t c = 0; c < h.cols(); ++c) row[c] = io::fmt_double(h(r, c));
      mat_csv.write_row(row);
    }
  };

  // train with AdamW under the configured schedule, probing at 0/50/100%
  optim::HyperParams hp;
  hp.beta1 = cfg.optimizer.beta1;
  hp.beta2 = cfg.optimizer.beta2;
  hp.eps = cfg.optimizer.eps;
  hp.weight_decay = 0.0;
  auto state = optim::AdamState::zeros(model.theta.size());
  linalg::Vector grad;
  probe(0);
  for (std::int64_t k = 0; k < cfg.steps; ++k) {
    model.loss_grad(data, grad);
    hp.lr = cfg.schedule.lr_at(k, cfg.steps);
    optim::adamw_step(model.theta, grad, state, hp);
    if (k + 1 == cfg.steps / 2 || k + 1 == cfg.steps) probe(k + 1);
  }

  // small multi-class variant: structural probe only
  {
    auto mc_rng = root.child(3);
    const models::BlobBatch mc_data = models::make_blob_multiclass(
        ms.dim, ms.train_size, ms.classes, ms.separation, mc_rng);
    auto mc_init = root.child(4);
    models::MlpMulti mc = models::MlpMulti::init(ms.n_neurons, ms.dim, ms.classes, mc_init);
    auto mc_state = optim::AdamState::zeros(mc.theta.size());
    for (std::int64_t k = 0; k < cfg.steps; ++k) {
      mc.loss_grad(mc_data, grad);
      hp.lr = cfg.schedule.lr_at(k, cfg.steps);
      optim::adamw_step(mc.theta, grad, mc_state, hp);
    }
    models::MlpMulti snapshot = mc;
    const hessian::GradFn grad_fn = [&](std::span<const double> theta, std::span<double> out) {
      std::copy(theta.begin(), theta.end(), snapshot.theta.begin());
      linalg::Vector g;
      snapshot.loss_grad(mc_data, g);
      std::copy(g.begin(), g.end(), out.begin());
    };
    const linalg::DenseMatrix h = hessian::fd_hessian_subset(grad_fn, mc.theta, w_coords, 1e-5);
    io::emit_svg_heatmap(h, "multiclass mlp hessian (trained)",
                         dir / "hessian_mlp_multiclass.svg");
  }

  {
    const std::vector<std::string> header = {"checkpoint", "step", "block_energy_ratio",
                                             "eq3_max_rel_err"};
    io::CsvWriter csv(dir / "hessian_mlp.csv", cfg.provenance(), header);
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      csv.write_row({io::fmt_int(static_cast<std::int64_t>(i)), io::fmt_int(checkpoints[i].step),
                     io::fmt_double(checkpoints[i].energy_ratio),
                     io::fmt_double(checkpoints[i].eq3_max_rel_err)});
    }
  }

  if (check) {
    for (const auto& cp : checkpoints) {
      if (!(cp.eq3_max_rel_err <= 1e-6)) return kExitCheckFailed;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train_toy / trajectory: optimizer races on the tiny Transformer
// ---------------------------------------------------------------------------

struct TrainRun {
  std::string optimizer;
  int seed_index = 0;
  std::vector<double> losses;  // per step
  std::vector<double> lrs;
  std::vector<std::int64_t> checkpoint_steps;
  std::vector<linalg::Vector> checkpoints;  // parameter snapshots
  bool diverged = false;
  std::int64_t abort_step = -1;
};

namespace detail {

struct OptimizerRunner {
  optim::OptimizerKind kind;
  optim::HyperParams hp;
  optim::AdamState adam;
  optim::MiniState mini;
  optim::AdaGradMeanState agm;
  linalg::Vector momentum;
  std::vector<optim::Range> blocks;
  std::vector<optim::Range> layers;
  optim::Aggregator aggregator = optim::Aggregator::Mean;

  static optim::OptimizerKind kind_from_string(const std::string& s) {
    if (s == "adamw") return optim::OptimizerKind::AdamW;
    if (s == "adam") return optim::OptimizerKind::Adam;
    if (s == "adam_mini") return optim::OptimizerKind::AdamMini;
    if (s == "lamb") return optim::OptimizerKind::Lamb;
    if (s == "gd") return optim::OptimizerKind::Gd;
    if (s == "gd_momentum") return optim::OptimizerKind::GdMomentum;
    if (s == "adagrad_mean") return optim::OptimizerKind::AdaGradMean;
    throw ConfigError("unknown optimizer '" + s + "'");
  }

  void init(const partition::ParamLayout& layout, const OptimizerSettings& settings,
            const std::string& name) {
    kind = kind_from_string(name);
    hp.beta1 = settings.beta1;
    hp.beta2 = settings.beta2;
    hp.eps = settings.eps;
    hp.weight_decay = settings.weight_decay;
    aggregator = settings.aggregator;
    const std::size_t n = static_cast<std::size_t>(layout.total);
    switch (kind) {
      case optim::OptimizerKind::AdamW:
      case optim::OptimizerKind::Adam:
        adam = optim::AdamState::zeros(n);
        break;
      case optim::OptimizerKind::AdamMini: {
        partition::PartitionSpec spec;
        switch (settings.partition_strategy) {
          case partition::Strategy::PerTensor:
            spec = partition::partition_per_tensor(layout.metas);
            break;
          case partition::Strategy::Singleton:
            spec = partition::partition_singleton(layout.metas);
            break;
          default:
            spec = partition::partition_transformer(layout.metas, settings.value_as_whole);
            break;
        }
        blocks = partition::global_block_ranges(spec, layout);
        mini = optim::MiniState::zeros(n, blocks.size());
        break;
      }
      case optim::OptimizerKind::Lamb: {
        const auto spec = partition::partition_per_tensor(layout.metas);
        layers = partition::global_block_ranges(spec, layout);
        adam = optim::AdamState::zeros(n);
        break;
      }
      case optim::OptimizerKind::Gd:
        break;
      case optim::OptimizerKind::GdMomentum:
        momentum.assign(n, 0.0);
        break;
      case optim::OptimizerKind::AdaGradMean:
        agm = optim::AdaGradMeanState::zeros(n);
        break;
    }
  }

  void step(std::span<double> w, std::span<const double> g, double lr) {
    hp.lr = lr;
    switch (kind) {
      case optim::OptimizerKind::AdamW:
        optim::adamw_step(w, g, adam, hp);
        break;
      case optim::OptimizerKind::Adam:
        optim::adam_step(w, g, adam, hp);
        break;
      case optim::OptimizerKind::AdamMini:
        optim::adam_mini_step(w, g, mini, blocks, hp, aggregator);
        break;
      case optim::OptimizerKind::Lamb:
        optim::lamb_step(w, g, adam, hp, layers);
        break;
      case optim::OptimizerKind::Gd:
        optim::gd_step(w, g, lr);
        break;
      case optim::OptimizerKind::GdMomentum:
        optim::gd_momentum_step(w, g, momentum, lr, hp.beta1);
        break;
      case optim::OptimizerKind::AdaGradMean:
        optim::adagrad_mean_adam_step(w, g, agm, lr, hp.eps);
        break;
    }
  }
};

}  // namespace detail

// Trains one (seed, optimizer) pair; identical seeds see identical
// initialization and batch order regardless of the optimizer.
inline TrainRun train_one(const RunConfig& cfg, std::span<const std::uint16_t> corpus,
                          int seed_index, const std::string& optimizer_name,
                          bool keep_checkpoints) {
  TrainRun run;
  run.optimizer = optimizer_name;
  run.seed_index = seed_index;

  auto root = linalg::SeededRng(cfg.seed).child(static_cast<std::uint64_t>(seed_index) + 1);
  models::TinyTransformer model(cfg.model.transformer, root.child(0));
  auto data_rng = root.child(1);

  detail::OptimizerRunner opt;
  opt.init(model.layout(), cfg.optimizer, optimizer_name);

  linalg::Vector grad;
  for (std::int64_t k = 0; k < cfg.steps; ++k) {
    const auto batch = models::sample_batch(corpus, cfg.model.batch,
                                            cfg.model.transformer.seq_len, data_rng);
    const double lr = cfg.schedule.lr_at(k, cfg.steps);
    const double loss = model.loss_grad(batch, grad);
    run.losses.push_back(loss);
    run.lrs.push_back(lr);
    if (!std::isfinite(loss) || loss > kDivergenceLossLimit) {
      run.diverged = true;
      run.abort_step = k;
      break;
    }
    opt.step(model.params(), grad, lr);
    if (keep_checkpoints && (k + 1) % cfg.checkpoint_every == 0) {
      run.checkpoint_steps.push_back(k + 1);
      run.checkpoints.push_back(model.params());
    }
  }
  return run;
}

inline int run_train_toy(const RunConfig& cfg, bool check) {
  const auto dir = detail::prepare_out_dir(cfg);
  const bool trajectory_mode = cfg.scenario == Scenario::Trajectory;

  auto corpus_rng = linalg::SeededRng(cfg.seed).child(0);
  const auto corpus = models::make_markov_corpus(cfg.model.transformer.vocab,
                                                 cfg.model.corpus_length, corpus_rng,
                                                 cfg.model.markov_p);

  const std::size_t n_runs = static_cast<std::size_t>(cfg.n_seeds) * cfg.optimizers.size();
  std::vector<TrainRun> runs(n_runs);
  detail::run_indexed(n_runs, cfg.threads, [&](std::size_t i) {
    const int seed_index = static_cast<int>(i / cfg.optimizers.size());
    const std::string& name = cfg.optimizers[i % cfg.optimizers.size()];
    runs[i] = train_one(cfg, corpus, seed_index, name, trajectory_mode);
  });

  bool any_diverged = false;
  {
    const std::vector<std::string> header = {"seed", "optimizer", "step", "loss", "lr"};
    io::CsvWriter csv(dir / "train_toy.csv", cfg.provenance(), header);
    for (const auto& run : runs) {
      for (std::size_t k = 0; k < run.losses.size(); ++k) {
        csv.write_row({io::fmt_int(run.seed_index), run.optimizer,
                       io::fmt_int(static_cast<std::int64_t>(k)), io::fmt_double(run.losses[k]),
                       io::fmt_double(run.lrs[k])});
      }
      if (run.diverged) {
        any_diverged = true;
        csv.write_comment("aborted seed=" + std::to_string(run.seed_index) + " optimizer=" +
                          run.optimizer + " step=" + std::to_string(run.abort_step) +
                          " reason=divergence");
      }
    }
  }
  {
    std::vector<io::Series> series;
    for (const auto& run : runs) {
      if (run.seed_index != 0) continue;
      io::Series s;
      s.label = run.optimizer;
      for (std::size_t k = 0; k < run.losses.size(); ++k) {
        s.x.push_back(static_cast<double>(k));
        s.y.push_back(run.losses[k]);
      }
      series.push_back(std::move(s));
    }
    io::LinePlotOptions opts;
    opts.title = "toy training (seed 0)";
    opts.x_label = "step";
    opts.y_label = "loss";
    io::emit_svg_lineplot(series, opts, dir / "train_toy.svg");
  }

  bool distances_ok = true;
  if (trajectory_mode) {
    const std::vector<std::string> header = {"seed", "optimizer", "step",
                                             "distance_to_reference"};
    io::CsvWriter csv(dir / "trajectory.csv", cfg.provenance(), header);
    std::vector<io::Series> series;
    std::map<std::string, std::vector<double>> seed0_dist;
    for (int s = 0; s < cfg.n_seeds; ++s) {
      const TrainRun* reference = nullptr;
      for (const auto& run : runs) {
        if (run.seed_index == s && run.optimizer == "adamw") reference = &run;
      }
      if (!reference) throw ConfigError("trajectory scenario requires the adamw reference");
      for (const auto& run : runs) {
        if (run.seed_index != s || &run == reference) continue;
        const std::size_t n_ck = std::min(run.checkpoints.size(), reference->checkpoints.size());
        for (std::size_t c = 0; c < n_ck; ++c) {
          double acc = 0.0;
          for (std::size_t k = 0; k < run.checkpoints[c].size(); ++k) {
            const double diff = run.checkpoints[c][k] - reference->checkpoints[c][k];
            acc += diff * diff;
          }
          const double dist = std::sqrt(acc);
          csv.write_row({io::fmt_int(s), run.optimizer, io::fmt_int(run.checkpoint_steps[c]),
                         io::fmt_double(dist)});
          if (s == 0) seed0_dist[run.optimizer].push_back(dist);
        }
      }
    }
    for (const auto& [name, dists] : seed0_dist) {
      io::Series ser;
      ser.label = name;
      for (std::size_t c = 0; c < dists.size(); ++c) {
        ser.x.push_back(static_cast<double>((c + 1) * cfg.checkpoint_every));
        ser.y.push_back(dists[c]);
      }
      series.push_back(std::move(ser));
    }
    if (!series.empty()) {
      io::LinePlotOptions opts;
      opts.title = "parameter distance to the adamw trajectory (seed 0)";
      opts.x_label = "step";
      opts.y_label = "l2 distance";
      io::emit_svg_lineplot(series, opts, dir / "trajectory.svg");
    }

    // distance ordering: adam_mini must stay closer than gd_momentum
    for (int s = 0; s < cfg.n_seeds && distances_ok; ++s) {
      const TrainRun *mini = nullptr, *gdm = nullptr, *ref = nullptr;
      for (const auto& run : runs) {
        if (run.seed_index != s) continue;
        if (run.optimizer == "adam_mini") mini = &run;
        if (run.optimizer == "gd_momentum") gdm = &run;
        if (run.optimizer == "adamw") ref = &run;
      }
      if (!mini || !gdm || !ref) continue;
      const std::size_t n_ck =
          std::min({mini->checkpoints.size(), gdm->checkpoints.size(), ref->checkpoints.size()});
      for (std::size_t c = 0; c < n_ck; ++c) {
        double d_mini = 0.0, d_gdm = 0.0;
        for (std::size_t k = 0; k < ref->checkpoints[c].size(); ++k) {
          const double a = mini->checkpoints[c][k] - ref->checkpoints[c][k];
          const double b = gdm->checkpoints[c][k] - ref->checkpoints[c][k];
          d_mini += a * a;
          d_gdm += b * b;
        }
        if (!(d_mini < d_gdm)) {
          distances_ok = false;
          break;
        }
      }
    }
  }

  if (any_diverged) return kExitDivergence;
  if (check) {
    // trailing-smoothed parity between adam_mini and adamw, per seed
    for (int s = 0; s < cfg.n_seeds; ++s) {
      const TrainRun *mini = nullptr, *ref = nullptr;
      for (const auto& run : runs) {
        if (run.seed_index != s) continue;
        if (run.optimizer == "adam_mini") mini = &run;
        if (run.optimizer == "adamw") ref = &run;
      }
      if (!mini || !ref) continue;
      const double a = detail::trailing_mean(mini->losses);
      const double b = detail::trailing_mean(ref->losses);
      if (!(std::fabs(a - b) <= 0.05 * std::fabs(b))) return kExitCheckFailed;
    }
    if (!distances_ok) return kExitCheckFailed;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// memory_audit: optimizer-state accounting for architecture presets
// ---------------------------------------------------------------------------

inline int run_memory_audit(const RunConfig& cfg, bool check) {
  const auto dir = detail::prepare_out_dir(cfg);
  std::vector<partition::ParamMeta> metas;
  try {
    metas = preset_metas(cfg.preset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto spec = partition::partition_transformer(metas, cfg.optimizer.value_as_whole);
  std::int64_t params = 0;
  for (const auto& m : metas) params += m.size();

  const auto adamw = optim::state_footprint(optim::OptimizerKind::AdamW, spec, params);
  const auto mini = optim::state_footprint(optim::OptimizerKind::AdamMini, spec, params);

  {
    const std::vector<std::string> header = {"optimizer", "params", "m_elements",
                                             "v_elements", "state_bytes", "v_reduction"};
    io::CsvWriter csv(dir / "memory_audit.csv", cfg.provenance(), header);
    for (const auto& r : {adamw, mini}) {
      csv.write_row({r.optimizer, io::fmt_int(r.params), io::fmt_int(r.m_elements),
                     io::fmt_int(r.v_elements), io::fmt_int(r.state_bytes_f32),
                     io::fmt_double(r.v_reduction)});
    }
  }
  {
    nlohmann::json doc;
    doc["preset"] = cfg.preset;
    doc["blocks"] = spec.block_count();
    doc["reports"] = {optim::to_json(adamw), optim::to_json(mini)};
    std::ofstream out(dir / "memory_audit.json", std::ios::binary);
    out << doc.dump(2) << "\n";
  }

  if (check && cfg.preset == "gpt2-1.5b") {
    const double adamw_gb = static_cast<double>(adamw.state_bytes_f32) / 1e9;
    const double mini_gb = static_cast<double>(mini.state_bytes_f32) / 1e9;
    if (!(std::fabs(adamw_gb - 12.48) <= 0.02 * 12.48)) return kExitCheckFailed;
    if (!(std::fabs(mini_gb - 6.24) <= 0.02 * 6.24)) return kExitCheckFailed;
    if (!(mini.v_reduction >= 0.999)) return kExitCheckFailed;
  }
  if (check && cfg.preset == "tiny") {
    const auto counts = partition::block_counts(spec);
    const std::map<std::string, std::int64_t> expected = {
        {"h0.attn.query", 4}, {"h0.attn.key", 4},  {"h0.attn.value", 16},
        {"h0.attn.proj", 16}, {"h0.mlp.fc1", 32},  {"h0.mlp.proj", 16},
        {"embed", 8},         {"output", 8}};
    for (const auto& [name, want] : expected) {
      const auto it = counts.find(name);
      if (it == counts.end() || it->second != want) return kExitCheckFailed;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run_scenario(const RunConfig& cfg, bool check) {
  switch (cfg.scenario) {
    case Scenario::Quadratic:
      return run_quadratic(cfg, check);
    case Scenario::PrecondStudy:
      return run_precond_study(cfg, check);
    case Scenario::HessianMlp:
      return run_hessian_mlp(cfg, check);
    case Scenario::TrainToy:
    case Scenario::Trajectory:
      return run_train_toy(cfg, check);
    case Scenario::MemoryAudit:
      return run_memory_audit(cfg, check);
  }
  throw ConfigError("unhandled scenario");
}

}  // namespace miniopt::cli
