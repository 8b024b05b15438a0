// miniopt CLI: one scenario per invocation.
//
//   miniopt <scenario> --config <path> [--seed N] [--out DIR] [--check]
//           [--dump-partition]
//
// Exit codes: 0 success, 2 config error, 3 numerical divergence,
// 4 acceptance-check failure (with --check).

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "miniopt/presets.hpp"
#include "miniopt/runconfig.hpp"
#include "miniopt/scenarios.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw miniopt::cli::ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump_partition(const miniopt::cli::RunConfig& cfg) {
  using namespace miniopt;
  std::vector<partition::ParamMeta> metas;
  if (cfg.scenario == cli::Scenario::MemoryAudit) {
    metas = cli::preset_metas(cfg.preset);
  } else {
    metas = models::transformer_param_metas(cfg.model.transformer);
  }
  partition::PartitionSpec spec;
  switch (cfg.optimizer.partition_strategy) {
    case partition::Strategy::PerTensor:
      spec = partition::partition_per_tensor(metas);
      break;
    case partition::Strategy::Singleton:
      spec = partition::partition_singleton(metas);
      break;
    default:
      spec = partition::partition_transformer(metas, cfg.optimizer.value_as_whole);
      break;
  }
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "partition.json", std::ios::binary);
  out << partition::to_json(spec, metas).dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"miniopt: block-partitioned Adam experiments"};
  app.require_subcommand(1);

  std::string config_path;
  long long seed_override = -1;
  std::string out_override;
  bool check = false;
  bool want_partition_dump = false;

  const char* scenario_names[] = {"quadratic", "precond_study", "hessian_mlp",
                                  "train_toy",  "memory_audit",  "trajectory"};
  for (const char* name : scenario_names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run config")->required();
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--out", out_override, "override the output directory");
    sub->add_flag("--check", check, "evaluate the scenario's built-in checks");
    sub->add_flag("--dump-partition", want_partition_dump, "write partition.json and exit");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string scenario = app.get_subcommands().front()->get_name();

  try {
    const auto cfg = miniopt::cli::parse_config_text(read_file(config_path), scenario,
                                                     seed_override, out_override);
    if (want_partition_dump) {
      dump_partition(cfg);
      return miniopt::cli::kExitOk;
    }
    const int code = miniopt::cli::run_scenario(cfg, check);
    if (code == miniopt::cli::kExitDivergence) {
      std::cerr << "miniopt: run aborted on divergence (see the output CSV)\n";
    } else if (code == miniopt::cli::kExitCheckFailed) {
      std::cerr << "miniopt: scenario check failed\n";
    }
    return code;
  } catch (const miniopt::cli::ConfigError& e) {
    std::cerr << "miniopt: " << e.what() << "\n";
    return miniopt::cli::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "miniopt: error: " << e.what() << "\n";
    return 1;
  }
}
