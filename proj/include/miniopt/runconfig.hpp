#pragma once

// Run configuration: one JSON document per run. Parsing is fail-fast —
// unknown keys are errors, so a config always means exactly what it says.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "miniopt/io/csv.hpp"
#include "miniopt/models/transformer.hpp"
#include "miniopt/optim.hpp"
#include "miniopt/partition.hpp"
#include "miniopt/schedule.hpp"

namespace miniopt::cli {

enum class Scenario { Quadratic, PrecondStudy, HessianMlp, TrainToy, MemoryAudit, Trajectory };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Quadratic: return "quadratic";
    case Scenario::PrecondStudy: return "precond_study";
    case Scenario::HessianMlp: return "hessian_mlp";
    case Scenario::TrainToy: return "train_toy";
    case Scenario::MemoryAudit: return "memory_audit";
    case Scenario::Trajectory: return "trajectory";
  }
  return "?";
}

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "quadratic") return Scenario::Quadratic;
  if (s == "precond_study") return Scenario::PrecondStudy;
  if (s == "hessian_mlp") return Scenario::HessianMlp;
  if (s == "train_toy") return Scenario::TrainToy;
  if (s == "memory_audit") return Scenario::MemoryAudit;
  if (s == "trajectory") return Scenario::Trajectory;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OptimizerSettings {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
  optim::Aggregator aggregator = optim::Aggregator::Mean;
  partition::Strategy partition_strategy = partition::Strategy::Transformer;
  bool value_as_whole = false;
  double adam_lr = 0.01;  // constant rate for the quadratic-scenario Adam variant
};

struct ModelSettings {
  models::TransformerConfig transformer;
  int batch = 16;
  std::int64_t corpus_length = 50000;
  double markov_p = 0.9;
};

struct MlpSettings {
  int n_neurons = 8;
  int dim = 8;
  int classes = 3;
  int train_size = 256;
  double separation = 2.0;
};

struct SweepCell {
  int d = 50;
  double kappa = 500.0;
};

struct GridSettings {
  std::vector<SweepCell> sweeps;  // empty -> scenario default
  int r_points = 51;              // R in {k/(r_points-1)}
  int n_theta = 10;
  int n_x = 20;
};

struct RunConfig {
  Scenario scenario = Scenario::Quadratic;
  std::uint64_t seed = 1;
  std::int64_t steps = 1000;
  int n_seeds = 10;
  int threads = 1;
  std::string out_dir = "out";
  OptimizerSettings optimizer;
  Schedule schedule;
  ModelSettings model;
  MlpSettings mlp;
  GridSettings grid;
  std::string preset = "gpt2-1.5b";
  std::int64_t checkpoint_every = 100;
  std::vector<std::string> optimizers = {"adamw", "adam_mini", "gd_momentum"};
  std::string canonical_json;  // effective config after overrides

  std::uint64_t config_hash() const { return io::fnv1a(canonical_json); }

  std::string provenance() const {
    return "miniopt scenario=" + std::string(scenario_name(scenario)) +
           " config_hash=" + io::hex64(config_hash()) + " seed=" + std::to_string(seed);
  }
};

namespace detail {

inline void expect_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                        const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

inline optim::Aggregator aggregator_from_string(const std::string& s) {
  if (s == "mean") return optim::Aggregator::Mean;
  if (s == "max") return optim::Aggregator::Max;
  if (s == "min") return optim::Aggregator::Min;
  if (s == "mean_abs") return optim::Aggregator::MeanAbs;
  if (s == "rms_squared") return optim::Aggregator::RmsSquared;
  throw ConfigError("config: unknown aggregator '" + s + "'");
}

inline partition::Strategy strategy_from_string(const std::string& s) {
  if (s == "per_tensor") return partition::Strategy::PerTensor;
  if (s == "transformer") return partition::Strategy::Transformer;
  if (s == "singleton") return partition::Strategy::Singleton;
  throw ConfigError("config: unknown partition strategy '" + s + "'");
}

}  // namespace detail

// Parses and validates a config document. scenario_override (from the CLI
// positional) must agree with the config's own scenario when both are given.
inline RunConfig parse_config(const nlohmann::json& doc,
                              const std::string& scenario_override = "",
                              std::int64_t seed_override = -1,
                              const std::string& out_override = "") {
  using detail::expect_keys;
  using detail::get_or;
  expect_keys(doc,
              {"scenario", "seed", "steps", "n_seeds", "threads", "out_dir", "optimizer",
               "schedule", "model", "mlp", "grid", "preset", "checkpoint_every", "optimizers"},
              "top level");
  RunConfig cfg;

  std::string scenario_str = get_or<std::string>(doc, "scenario", "");
  if (!scenario_override.empty()) {
    if (!scenario_str.empty() && scenario_str != scenario_override) {
      throw ConfigError("config: scenario '" + scenario_str +
                        "' does not match the requested scenario '" + scenario_override + "'");
    }
    scenario_str = scenario_override;
  }
  if (scenario_str.empty()) throw ConfigError("config: missing scenario");
  try {
    cfg.scenario = scenario_from_string(scenario_str);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  cfg.seed = get_or<std::uint64_t>(doc, "seed", 1);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  cfg.steps = get_or<std::int64_t>(doc, "steps", 1000);
  if (cfg.steps < 1) throw ConfigError("config: steps must be >= 1");
  cfg.n_seeds = get_or<int>(doc, "n_seeds", cfg.scenario == Scenario::Quadratic ? 10 : 3);
  if (cfg.n_seeds < 1) throw ConfigError("config: n_seeds must be >= 1");
  cfg.threads = get_or<int>(doc, "threads", 1);
  if (cfg.threads < 1) throw ConfigError("config: threads must be >= 1");
  cfg.out_dir = get_or<std::string>(doc, "out_dir", "out");
  if (!out_override.empty()) cfg.out_dir = out_override;
  cfg.preset = get_or<std::string>(doc, "preset", "gpt2-1.5b");
  cfg.checkpoint_every = get_or<std::int64_t>(doc, "checkpoint_every", 100);
  if (cfg.checkpoint_every < 1) throw ConfigError("config: checkpoint_every must be >= 1");
  if (doc.contains("optimizers")) {
    cfg.optimizers = doc.at("optimizers").get<std::vector<std::string>>();
    if (cfg.optimizers.empty()) throw ConfigError("config: optimizers must be non-empty");
  }

  if (doc.contains("optimizer")) {
    const auto& o = doc.at("optimizer");
    expect_keys(o,
                {"beta1", "beta2", "eps", "weight_decay", "aggregator", "partition",
                 "value_as_whole", "adam_lr"},
                "optimizer");
    cfg.optimizer.beta1 = get_or<double>(o, "beta1", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = get_or<double>(o, "beta2", cfg.optimizer.beta2);
    cfg.optimizer.eps = get_or<double>(o, "eps", cfg.optimizer.eps);
    cfg.optimizer.weight_decay = get_or<double>(o, "weight_decay", cfg.optimizer.weight_decay);
    if (o.contains("aggregator")) {
      cfg.optimizer.aggregator = detail::aggregator_from_string(o.at("aggregator").get<std::string>());
    }
    if (o.contains("partition")) {
      cfg.optimizer.partition_strategy =
          detail::strategy_from_string(o.at("partition").get<std::string>());
    }
    cfg.optimizer.value_as_whole = get_or<bool>(o, "value_as_whole", false);
    cfg.optimizer.adam_lr = get_or<double>(o, "adam_lr", cfg.optimizer.adam_lr);
  }

  if (doc.contains("schedule")) {
    const auto& s = doc.at("schedule");
    expect_keys(s, {"kind", "peak_lr", "warmup_frac"}, "schedule");
    if (s.contains("kind")) {
      try {
        cfg.schedule.kind = schedule_kind_from_string(s.at("kind").get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    cfg.schedule.peak_lr = get_or<double>(s, "peak_lr", cfg.schedule.peak_lr);
    cfg.schedule.warmup_frac = get_or<double>(s, "warmup_frac", cfg.schedule.warmup_frac);
    try {
      cfg.schedule.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    expect_keys(m,
                {"n_layers", "n_emb", "n_heads", "vocab", "seq_len", "mlp_width", "batch",
                 "corpus_length", "markov_p"},
                "model");
    auto& t = cfg.model.transformer;
    t.n_layers = get_or<int>(m, "n_layers", t.n_layers);
    t.n_emb = get_or<int>(m, "n_emb", t.n_emb);
    t.n_heads = get_or<int>(m, "n_heads", t.n_heads);
    t.vocab = get_or<int>(m, "vocab", t.vocab);
    t.seq_len = get_or<int>(m, "seq_len", t.seq_len);
    t.mlp_width = get_or<int>(m, "mlp_width", t.mlp_width);
    try {
      t.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    cfg.model.batch = get_or<int>(m, "batch", cfg.model.batch);
    cfg.model.corpus_length = get_or<std::int64_t>(m, "corpus_length", cfg.model.corpus_length);
    cfg.model.markov_p = get_or<double>(m, "markov_p", cfg.model.markov_p);
    if (cfg.model.batch < 1) throw ConfigError("config: model.batch must be >= 1");
  }

  if (doc.contains("mlp")) {
    const auto& m = doc.at("mlp");
    expect_keys(m, {"n_neurons", "dim", "classes", "train_size", "separation"}, "mlp");
    cfg.mlp.n_neurons = get_or<int>(m, "n_neurons", cfg.mlp.n_neurons);
    cfg.mlp.dim = get_or<int>(m, "dim", cfg.mlp.dim);
    cfg.mlp.classes = get_or<int>(m, "classes", cfg.mlp.classes);
    cfg.mlp.train_size = get_or<int>(m, "train_size", cfg.mlp.train_size);
    cfg.mlp.separation = get_or<double>(m, "separation", cfg.mlp.separation);
  }

  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    expect_keys(g, {"sweeps", "r_points", "n_theta", "n_x"}, "grid");
    if (g.contains("sweeps")) {
      for (const auto& cell : g.at("sweeps")) {
        expect_keys(cell, {"d", "kappa"}, "grid.sweeps[]");
        SweepCell c;
        c.d = get_or<int>(cell, "d", 50);
        c.kappa = get_or<double>(cell, "kappa", 500.0);
        if (c.d < 2 || c.kappa < 1.0) throw ConfigError("config: bad sweep cell");
        cfg.grid.sweeps.push_back(c);
      }
    }
    cfg.grid.r_points = get_or<int>(g, "r_points", cfg.grid.r_points);
    cfg.grid.n_theta = get_or<int>(g, "n_theta", cfg.grid.n_theta);
    cfg.grid.n_x = get_or<int>(g, "n_x", cfg.grid.n_x);
    if (cfg.grid.r_points < 2 || cfg.grid.n_theta < 1 || cfg.grid.n_x < 1) {
      throw ConfigError("config: bad grid sizes");
    }
  }
  if (cfg.grid.sweeps.empty()) {
    // default study: vary d at kappa=500, vary kappa at d=50
    cfg.grid.sweeps = {{10, 500.0}, {50, 500.0}, {100, 500.0},
                       {50, 10.0},  {50, 100.0}, {50, 1000.0}};
  }

  // canonical form for hashing: the effective document after overrides
  nlohmann::json effective = doc;
  effective["scenario"] = scenario_name(cfg.scenario);
  effective["seed"] = cfg.seed;
  effective["out_dir"] = cfg.out_dir;
  cfg.canonical_json = effective.dump();
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text, const std::string& scenario_override = "",
                                   std::int64_t seed_override = -1,
                                   const std::string& out_override = "") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(doc, scenario_override, seed_override, out_override);
}

}  // namespace miniopt::cli
