#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "miniopt/scenarios.hpp"

using namespace miniopt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("miniopt_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// every regular file in a must exist in b with identical bytes, and vice versa
void require_dirs_identical(const fs::path& a, const fs::path& b) {
  std::map<std::string, std::string> fa, fb;
  for (const auto& e : fs::directory_iterator(a)) fa[e.path().filename().string()] = slurp(e.path());
  for (const auto& e : fs::directory_iterator(b)) fb[e.path().filename().string()] = slurp(e.path());
  REQUIRE(fa.size() == fb.size());
  for (const auto& [name, text] : fa) {
    REQUIRE(fb.count(name) == 1);
    REQUIRE(text == fb.at(name));
  }
}

}  // namespace

TEST_CASE("memory audit scenario") {
  SECTION("gpt2-1.5b matches the published state sizes") {
    cli::RunConfig cfg;
    cfg.scenario = cli::Scenario::MemoryAudit;
    cfg.preset = "gpt2-1.5b";
    cfg.out_dir = fresh_dir("audit15b").string();
    REQUIRE(cli::run_memory_audit(cfg, true) == cli::kExitOk);
    const std::string csv = slurp(fs::path(cfg.out_dir) / "memory_audit.csv");
    REQUIRE(csv.find("optimizer,params,m_elements,v_elements,state_bytes,v_reduction") !=
            std::string::npos);
    REQUIRE(csv.find("adamw,1557611200,1557611200,1557611200,12460889600") != std::string::npos);
    REQUIRE(csv.find("adam_mini,1557611200,1557611200,590740") != std::string::npos);
  }
  SECTION("tiny preset carries the expected per-tensor block counts") {
    cli::RunConfig cfg;
    cfg.scenario = cli::Scenario::MemoryAudit;
    cfg.preset = "tiny";
    cfg.out_dir = fresh_dir("audit_tiny").string();
    REQUIRE(cli::run_memory_audit(cfg, true) == cli::kExitOk);
  }
  SECTION("unknown preset is a config error") {
    cli::RunConfig cfg;
    cfg.scenario = cli::Scenario::MemoryAudit;
    cfg.preset = "gpt5";
    cfg.out_dir = fresh_dir("audit_bad").string();
    REQUIRE_THROWS_AS(cli::run_memory_audit(cfg, false), cli::ConfigError);
  }
}

TEST_CASE("quadratic scenario writes well-formed deterministic outputs") {
  cli::RunConfig cfg;
  cfg.scenario = cli::Scenario::Quadratic;
  cfg.seed = 5;
  cfg.steps = 60;
  cfg.n_seeds = 2;
  cfg.out_dir = fresh_dir("quad_a").string();
  REQUIRE(cli::run_quadratic(cfg, false) == cli::kExitOk);
  REQUIRE(fs::exists(fs::path(cfg.out_dir) / "quadratic.csv"));
  REQUIRE(fs::exists(fs::path(cfg.out_dir) / "quadratic_subblocks.csv"));
  REQUIRE(fs::exists(fs::path(cfg.out_dir) / "quadratic.svg"));

  const std::string csv = slurp(fs::path(cfg.out_dir) / "quadratic.csv");
  REQUIRE(csv.rfind("# miniopt scenario=quadratic config_hash=", 0) == 0);
  REQUIRE(csv.find("seed,optimizer,step,loss,lr\n") != std::string::npos);

  // GD with 2/(L+mu) never increases the quadratic loss
  const auto res = cli::run_quadratic_races(cfg);
  for (const auto& series : res.gd) {
    for (std::size_t k = 1; k < series.size(); ++k) REQUIRE(series[k] <= series[k - 1]);
  }

  cli::RunConfig cfg2 = cfg;
  cfg2.out_dir = fresh_dir("quad_b").string();
  cfg2.canonical_json = cfg.canonical_json;
  REQUIRE(cli::run_quadratic(cfg2, false) == cli::kExitOk);
  require_dirs_identical(cfg.out_dir, cfg2.out_dir);
}

TEST_CASE("precond scenario is deterministic under a worker pool") {
  cli::RunConfig base;
  base.scenario = cli::Scenario::PrecondStudy;
  base.seed = 3;
  base.grid.sweeps = {{8, 50.0}};
  base.grid.r_points = 4;
  base.grid.n_theta = 2;
  base.grid.n_x = 3;

  cli::RunConfig a = base;
  a.threads = 1;
  a.out_dir = fresh_dir("precond_a").string();
  REQUIRE(cli::run_precond_study(a, false) == cli::kExitOk);

  cli::RunConfig b = base;
  b.threads = 4;
  b.out_dir = fresh_dir("precond_b").string();
  REQUIRE(cli::run_precond_study(b, false) == cli::kExitOk);

  require_dirs_identical(a.out_dir, b.out_dir);
  const std::string csv = slurp(fs::path(a.out_dir) / "precond_study.csv");
  REQUIRE(csv.find("d,kappa,R,theta_seed,tau_mean,r_mean,n_x\n") != std::string::npos);
  // 4 R cells -> 4 data rows after comment + header
  std::size_t lines = 0;
  for (char c : csv) {
    if (c == '\n') ++lines;
  }
  REQUIRE(lines == 2 + 4);
  // the R = 0 row reports tau exactly 1
  REQUIRE(csv.find("8,50,0,") != std::string::npos);
  REQUIRE(csv.find(",1,") != std::string::npos);
}

TEST_CASE("hessian_mlp scenario validates the analytic cross blocks") {
  cli::RunConfig cfg;
  cfg.scenario = cli::Scenario::HessianMlp;
  cfg.seed = 2;
  cfg.steps = 40;
  cfg.mlp.n_neurons = 4;
  cfg.mlp.dim = 4;
  cfg.mlp.classes = 3;
  cfg.mlp.train_size = 64;
  cfg.mlp.separation = 2.0;
  cfg.schedule.peak_lr = 5e-3;
  cfg.out_dir = fresh_dir("hmlp").string();
  REQUIRE(cli::run_hessian_mlp(cfg, true) == cli::kExitOk);
  for (const char* f : {"hessian_mlp.csv", "hessian_mlp_ckpt0.svg", "hessian_mlp_ckpt1.svg",
                        "hessian_mlp_ckpt2.svg", "hessian_mlp_ckpt0.csv",
                        "hessian_mlp_multiclass.svg"}) {
    REQUIRE(fs::exists(fs::path(cfg.out_dir) / f));
  }
  SECTION("probe cap is enforced") {
    cli::RunConfig big = cfg;
    big.mlp.n_neurons = 100;
    big.mlp.dim = 40;  // 4000 coordinates
    big.out_dir = fresh_dir("hmlp_big").string();
    REQUIRE_THROWS_AS(cli::run_hessian_mlp(big, false), cli::ConfigError);
  }
}

TEST_CASE("train_toy micro-run: singleton adam-mini reproduces adamw exactly") {
  cli::RunConfig cfg;
  cfg.scenario = cli::Scenario::TrainToy;
  cfg.seed = 4;
  cfg.steps = 12;
  cfg.n_seeds = 1;
  cfg.optimizers = {"adamw", "adam_mini"};
  cfg.optimizer.partition_strategy = partition::Strategy::Singleton;
  cfg.model.transformer = {1, 8, 2, 16, 8, 16};
  cfg.model.batch = 2;
  cfg.model.corpus_length = 2000;
  cfg.out_dir = fresh_dir("train_singleton").string();
  REQUIRE(cli::run_train_toy(cfg, false) == cli::kExitOk);

  // identical seeds and a singleton partition: the loss columns match bitwise,
  // which the CSV text preserves via shortest-round-trip formatting
  const std::string csv = slurp(fs::path(cfg.out_dir) / "train_toy.csv");
  std::map<std::string, std::vector<std::string>> loss_by_opt;
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("seed,", 0) == 0) continue;
    const auto c1 = line.find(','), c2 = line.find(',', line.find(',') + 1);
    const auto c3 = line.find(',', c2 + 1);
    const auto c4 = line.find(',', c3 + 1);
    loss_by_opt[line.substr(c1 + 1, c2 - c1 - 1)].push_back(line.substr(c3 + 1, c4 - c3 - 1));
  }
  REQUIRE(loss_by_opt.at("adamw").size() == 12);
  REQUIRE(loss_by_opt.at("adamw") == loss_by_opt.at("adam_mini"));
}

TEST_CASE("trajectory micro-run is deterministic under a worker pool") {
  cli::RunConfig base;
  base.scenario = cli::Scenario::Trajectory;
  base.seed = 6;
  base.steps = 12;
  base.n_seeds = 2;
  base.checkpoint_every = 4;
  base.optimizers = {"adamw", "adam_mini", "gd_momentum"};
  base.model.transformer = {1, 8, 2, 16, 8, 16};
  base.model.batch = 2;
  base.model.corpus_length = 2000;

  cli::RunConfig a = base;
  a.threads = 1;
  a.out_dir = fresh_dir("traj_a").string();
  REQUIRE(cli::run_train_toy(a, false) == cli::kExitOk);
  REQUIRE(fs::exists(fs::path(a.out_dir) / "trajectory.csv"));
  REQUIRE(fs::exists(fs::path(a.out_dir) / "trajectory.svg"));

  cli::RunConfig b = base;
  b.threads = 3;
  b.out_dir = fresh_dir("traj_b").string();
  REQUIRE(cli::run_train_toy(b, false) == cli::kExitOk);
  require_dirs_identical(a.out_dir, b.out_dir);
}

TEST_CASE("divergence aborts the run and records the abort") {
  cli::RunConfig cfg;
  cfg.scenario = cli::Scenario::TrainToy;
  cfg.seed = 7;
  cfg.steps = 50;
  cfg.n_seeds = 1;
  cfg.optimizers = {"gd"};
  cfg.schedule.kind = cli::ScheduleKind::Constant;
  cfg.schedule.peak_lr = 1e9;  // blow up on purpose
  cfg.schedule.warmup_frac = 0.0;
  cfg.model.transformer = {1, 8, 2, 16, 8, 16};
  cfg.model.batch = 2;
  cfg.model.corpus_length = 2000;
  cfg.out_dir = fresh_dir("diverge").string();
  REQUIRE(cli::run_train_toy(cfg, false) == cli::kExitDivergence);
  const std::string csv = slurp(fs::path(cfg.out_dir) / "train_toy.csv");
  REQUIRE(csv.find("# aborted seed=0 optimizer=gd step=") != std::string::npos);
  REQUIRE(csv.find("reason=divergence") != std::string::npos);
}

TEST_CASE("lamb and adam run end to end in the harness") {
  cli::RunConfig cfg;
  cfg.scenario = cli::Scenario::TrainToy;
  cfg.seed = 8;
  cfg.steps = 8;
  cfg.n_seeds = 1;
  cfg.optimizers = {"adam", "lamb", "adagrad_mean"};
  cfg.model.transformer = {1, 8, 2, 16, 8, 16};
  cfg.model.batch = 2;
  cfg.model.corpus_length = 2000;
  cfg.out_dir = fresh_dir("others").string();
  REQUIRE(cli::run_train_toy(cfg, false) == cli::kExitOk);
}
