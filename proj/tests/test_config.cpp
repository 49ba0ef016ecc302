#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "support.hpp"
#include "tlab/config.hpp"
#include "tlab/errors.hpp"
#include "tlab/records.hpp"

using namespace tlab;

TEST_CASE("default configuration") {
  const ExperimentConfig cfg;
  CHECK(cfg.seeds.size() == 24);
  CHECK(cfg.gamma == 1e-4);
  CHECK(cfg.batch_size == 256);
  CHECK(cfg.strategies.size() == 4);
  CHECK(std::abs(cfg.mei_phi_w() - 1e-12) < 1e-27);
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.resolved_cache_dir() == std::filesystem::path("runs") / "cache");
}

TEST_CASE("config text: comments, dashes, ranges and lambda") {
  ExperimentConfig cfg;
  apply_config_text(cfg, "# desk run\n"
                         "seeds = 1-3,7\n"
                         "batch-size = 64   # small\n"
                         "strategies = mei, mei_fn\n"
                         "lambda = 0.5\n"
                         "optimizer = sgd\n");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 7});
  CHECK(cfg.batch_size == 64);
  CHECK(cfg.strategies == std::vector<Strategy>{Strategy::mei, Strategy::mei_fn});
  CHECK(cfg.optimizer == OptimizerKind::sgd);
  CHECK(cfg.lambda.has_value());
  CHECK_FALSE(cfg.phi_w.has_value());
  // gamma^2 lambda^2 / C^2 with C = 5 target classes
  CHECK(std::abs(cfg.mei_phi_w() - std::pow(1e-4 * 0.5 / 5.0, 2)) < 1e-25);
}

TEST_CASE("phi_w and lambda: later layer wins, same file is an error") {
  ExperimentConfig cfg;
  apply_setting(cfg, "lambda", "0.3");
  apply_setting(cfg, "phi-w", "1e-10");
  CHECK_FALSE(cfg.lambda.has_value());
  CHECK(cfg.mei_phi_w() == 1e-10);
  ExperimentConfig both;
  CHECK_THROWS_AS(apply_config_text(both, "phi_w = 1e-12\nlambda = 0.1\n"), ConfigError);
}

TEST_CASE("config errors") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_setting(cfg, "colour", "red"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "steps", "ten"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "strategies", "mei,magic"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "steps 10\n"), ConfigError);
  CHECK_THROWS_AS(parse_int_list("3-1"), ConfigError);

  ExperimentConfig bad;
  bad.gamma = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.target_classes = {5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.target_classes = {5, 12};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.task = "imagenet";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config text round-trips") {
  ExperimentConfig cfg;
  apply_config_text(cfg, "task = mnist\nseeds = 4,5\nsteps = 17\nphi_w = 3e-12\nhflip = off\n");
  ExperimentConfig back;
  apply_config_text(back, to_config_text(cfg));
  CHECK(to_config_text(back) == to_config_text(cfg));
  CHECK(back.task == "mnist");
  CHECK(back.steps == 17);
  CHECK(back.phi_w == 3e-12);
  CHECK_FALSE(back.hflip);
}

TEST_CASE("CSV records round-trip bit-exactly") {
  RunRecord r;
  r.strategy = Strategy::mei_fn;
  r.seed = 12;
  r.phase = TrainPhase::warmup;
  r.report.step = 3;
  r.report.loss = std::log(5.0);
  r.report.accuracy = 0.25;
  r.report.phi_total = 0.1 + 0.2;
  r.report.e_est = 1.0 / 3.0;
  r.report.e_lab = 1.0;
  r.report.e_cross = 0.123456789012345678;
  r.report.noise_fraction_pct = std::numeric_limits<double>::quiet_NaN();
  r.report.delta_prev_energy = 1.2345e-300;
  r.report.var_xL = 4.9e-324;
  r.var_xL_probe = 0.1 + 0.7;
  r.head_weight_energy = 1e-12;
  r.wall_ms = 1.5;
  const RunRecord back = parse_csv_row(to_csv_row(r));
  CHECK(back.strategy == r.strategy);
  CHECK(back.seed == 12);
  CHECK(back.phase == TrainPhase::warmup);
  CHECK(back.step() == 3);
  CHECK(back.report.loss == r.report.loss);
  CHECK(back.report.phi_total == r.report.phi_total);
  CHECK(back.report.e_est == r.report.e_est);
  CHECK(back.report.e_cross == r.report.e_cross);
  CHECK(std::isnan(back.report.noise_fraction_pct));
  CHECK(back.report.delta_prev_energy == r.report.delta_prev_energy);
  CHECK(back.report.var_xL == r.report.var_xL);
  CHECK(back.var_xL_probe == r.var_xL_probe);
  CHECK(back.head_weight_energy == r.head_weight_energy);
  CHECK_FALSE(back.test_accuracy.has_value());

  r.test_accuracy = 0.875;
  CHECK(parse_csv_row(to_csv_row(r)).test_accuracy == 0.875);

  CHECK(csv_header() ==
        "strategy,seed,step,phase,loss,train_accuracy,phi_total,e_est,e_lab,e_cross,"
        "noise_fraction_pct,delta_prev_energy,var_xL,var_xL_probe,head_weight_energy,test_accuracy,wall_ms");
  CHECK_THROWS_AS(parse_csv_row("mei,1,2"), ParseError);
  CHECK_THROWS_AS(parse_csv_row(to_csv_row(r).replace(0, 3, "xyz")), ParseError);
}

TEST_CASE("write_records then read_records") {
  const auto dir = tlab::testing::fresh_dir("records");
  std::vector<RunRecord> rows(3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].report.step = static_cast<long>(i);
    rows[i].report.loss = 1.0 / static_cast<double>(i + 3);
  }
  write_records(dir / "runs.csv", rows);
  const auto back = read_records(dir / "runs.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i].report.loss == rows[i].report.loss);
  std::ofstream(dir / "bad.csv") << "not,a,header\n";
  CHECK_THROWS_AS(read_records(dir / "bad.csv"), ParseError);
}
