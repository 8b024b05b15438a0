#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "miniopt/io/csv.hpp"
#include "miniopt/io/svg.hpp"
#include "miniopt/runconfig.hpp"
#include "miniopt/schedule.hpp"

using namespace miniopt;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("schedules") {
  cli::Schedule s;
  s.peak_lr = 1.0;
  s.warmup_frac = 0.1;
  const long total = 100;

  SECTION("warm-up ramps linearly to the peak") {
    s.kind = cli::ScheduleKind::Constant;
    REQUIRE(s.lr_at(0, total) == Catch::Approx(0.1));
    REQUIRE(s.lr_at(9, total) == Catch::Approx(1.0));
    REQUIRE(s.lr_at(50, total) == 1.0);
  }
  SECTION("cosine decays to peak/10") {
    s.kind = cli::ScheduleKind::Cosine;
    REQUIRE(s.lr_at(10, total) == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(s.lr_at(100, total) == Catch::Approx(0.1).epsilon(1e-12));
    REQUIRE(s.lr_at(55, total) == Catch::Approx(0.55).epsilon(1e-2));
    // monotone after warm-up
    for (long k = 11; k <= 99; ++k) REQUIRE(s.lr_at(k, total) <= s.lr_at(k - 1, total));
  }
  SECTION("linear decays toward zero") {
    s.kind = cli::ScheduleKind::Linear;
    REQUIRE(s.lr_at(10, total) == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(s.lr_at(100, total) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("validation") {
    s.warmup_frac = 1.0;
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    s.warmup_frac = 0.0;
    s.peak_lr = 0.0;
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
  }
}

TEST_CASE("csv writer") {
  const auto path = std::filesystem::temp_directory_path() / "miniopt_csv_test.csv";
  {
    const std::vector<std::string> header = {"a", "b"};
    io::CsvWriter csv(path, "prov hash=deadbeef seed=1", header);
    csv.write_row({"1", "plain"});
    csv.write_row({io::fmt_double(0.1), "with,comma and \"quote\""});
    csv.write_comment("aborted step=3 reason=divergence");
  }
  const std::string text = slurp(path);
  REQUIRE(text.rfind("# prov hash=deadbeef seed=1\n", 0) == 0);
  REQUIRE(text.find("a,b\n") != std::string::npos);
  REQUIRE(text.find("0.1,") != std::string::npos);
  REQUIRE(text.find("\"with,comma and \"\"quote\"\"\"") != std::string::npos);
  REQUIRE(text.find("# aborted step=3 reason=divergence\n") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("double formatting is shortest round-trip") {
  REQUIRE(io::fmt_double(0.1) == "0.1");
  REQUIRE(io::fmt_double(1.0) == "1");
  REQUIRE(io::fmt_double(-2.5e-300) == "-2.5e-300");
  const double v = 1.0 / 3.0;
  REQUIRE(std::stod(io::fmt_double(v)) == v);
}

TEST_CASE("svg line plot") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto p1 = dir / "miniopt_svg_a.svg";
  const auto p2 = dir / "miniopt_svg_b.svg";
  std::vector<io::Series> series(1);
  series[0].label = "loss";
  series[0].x = {0.0, 1.0};
  series[0].y = {2.0, 1.0};
  io::LinePlotOptions opts;
  opts.title = "two points";
  io::emit_svg_lineplot(series, opts, p1);
  io::emit_svg_lineplot(series, opts, p2);

  const std::string a = slurp(p1);
  REQUIRE(a == slurp(p2));  // identical inputs, identical bytes
  std::size_t polylines = 0;
  for (std::size_t pos = a.find("<polyline"); pos != std::string::npos;
       pos = a.find("<polyline", pos + 1)) {
    ++polylines;
  }
  REQUIRE(polylines == 1);
  REQUIRE(a.find("</svg>") != std::string::npos);

  REQUIRE_THROWS_AS(io::emit_svg_lineplot({}, opts, p1), std::invalid_argument);
  std::vector<io::Series> empty_series(1);
  REQUIRE_THROWS_AS(io::emit_svg_lineplot(empty_series, opts, p1), std::invalid_argument);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("svg heatmap") {
  const auto path = std::filesystem::temp_directory_path() / "miniopt_heat.svg";
  linalg::DenseMatrix m(2, 2, {1.0, 0.0, 0.0, -1.0});
  io::emit_svg_heatmap(m, "tiny", path);
  const std::string text = slurp(path);
  REQUIRE(text.find("<rect") != std::string::npos);
  REQUIRE(text.find("#000000") != std::string::npos);  // |1| at full intensity
  REQUIRE(text.find("#ffffff") != std::string::npos);  // zeros stay white
  std::filesystem::remove(path);
}

TEST_CASE("run config parsing") {
  SECTION("defaults and canonical hash") {
    const auto cfg = cli::parse_config_text(R"({"scenario":"quadratic"})");
    REQUIRE(cfg.scenario == cli::Scenario::Quadratic);
    REQUIRE(cfg.seed == 1);
    REQUIRE(cfg.steps == 1000);
    REQUIRE(cfg.n_seeds == 10);
    REQUIRE(cfg.optimizer.beta2 == 0.95);
    REQUIRE(cfg.schedule.warmup_frac == 0.01);
    REQUIRE(cfg.config_hash() == cli::parse_config_text(R"({"scenario":"quadratic"})").config_hash());
  }
  SECTION("unknown keys are errors") {
    REQUIRE_THROWS_AS(cli::parse_config_text(R"({"scenario":"quadratic","stpes":3})"),
                      cli::ConfigError);
    REQUIRE_THROWS_AS(
        cli::parse_config_text(R"({"scenario":"quadratic","optimizer":{"beta3":0.5}})"),
        cli::ConfigError);
  }
  SECTION("invalid values are errors") {
    REQUIRE_THROWS_AS(cli::parse_config_text(R"({"scenario":"nope"})"), cli::ConfigError);
    REQUIRE_THROWS_AS(cli::parse_config_text(R"({"scenario":"quadratic","steps":0})"),
                      cli::ConfigError);
    REQUIRE_THROWS_AS(
        cli::parse_config_text(R"({"scenario":"quadratic","schedule":{"warmup_frac":1.0}})"),
        cli::ConfigError);
    REQUIRE_THROWS_AS(cli::parse_config_text("not json"), cli::ConfigError);
  }
  SECTION("scenario override must agree") {
    REQUIRE_THROWS_AS(cli::parse_config_text(R"({"scenario":"quadratic"})", "train_toy"),
                      cli::ConfigError);
    const auto cfg = cli::parse_config_text(R"({})", "train_toy");
    REQUIRE(cfg.scenario == cli::Scenario::TrainToy);
  }
  SECTION("seed and out-dir overrides feed the hash") {
    const auto a = cli::parse_config_text(R"({"scenario":"quadratic"})", "", 7, "dir_a");
    REQUIRE(a.seed == 7);
    REQUIRE(a.out_dir == "dir_a");
    const auto b = cli::parse_config_text(R"({"scenario":"quadratic"})", "", 8, "dir_a");
    REQUIRE(a.config_hash() != b.config_hash());
  }
  SECTION("grid defaults cover the study cells") {
    const auto cfg = cli::parse_config_text(R"({"scenario":"precond_study"})");
    REQUIRE(cfg.grid.sweeps.size() == 6);
    REQUIRE(cfg.grid.r_points == 51);
  }
}
