#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tlab/errors.hpp"
#include "tlab/summary.hpp"

using namespace tlab;

namespace {

std::vector<RunRecord> fake_runs(std::size_t seeds, long steps) {
  std::vector<RunRecord> out;
  for (Strategy s : {Strategy::base, Strategy::base_wu, Strategy::mei, Strategy::mei_fn}) {
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
      for (long step = 0; step <= steps; ++step) {
        RunRecord r;
        r.strategy = s;
        r.seed = seed;
        r.report.step = step;
        const double lift = 0.1 * static_cast<double>(static_cast<int>(s));
        r.test_accuracy = 0.2 + lift + 0.01 * static_cast<double>(step) +
                          0.001 * static_cast<double>(seed);
        r.var_xL_probe = 1.0 + (step == 0 ? 0.0 : 0.5 - lift);
        r.report.loss = 2.0;
        r.report.noise_fraction_pct = 25.0;
        out.push_back(r);
      }
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("two-sample interval uses the Student-t quantile") {
  CHECK(std::abs(t_quantile(0.95, 1) - 12.706204736432095) < 1e-9);
  CHECK(std::abs(t_quantile(0.95, 7) - 2.3646242515927844) < 1e-9);
  const MeanInterval mi = mean_interval({1.0, 3.0});
  CHECK(mi.mean == 2.0);
  CHECK(std::abs(mi.std - std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(mi.half_width - 12.706204736432095) < 1e-9);
  CHECK_THROWS_AS(mean_interval({1.0}), ArgumentError);
  CHECK_THROWS_AS(t_quantile(1.0, 3), ArgumentError);
}

TEST_CASE("paired t-test: known value, identical samples, constant shift") {
  // differences 1,2,3,4: mean 2.5, sd 1.2909944, t = 3.8729833, dof 3
  const PairedTTest t = paired_t_test({2, 4, 6, 8}, {1, 2, 3, 4});
  CHECK(std::abs(t.mean_diff - 2.5) < 1e-15);
  CHECK(std::abs(t.t_stat - 3.872983346207417) < 1e-12);
  CHECK(std::abs(t.p_value - 0.030466291662170977) < 1e-9);
  const PairedTTest same = paired_t_test({1, 2, 3}, {1, 2, 3});
  CHECK(same.p_value == 1.0);
  CHECK(same.t_stat == 0.0);
  const PairedTTest shift = paired_t_test({2, 3, 4}, {1, 2, 3});
  CHECK(shift.p_value == 0.0);
  CHECK_THROWS_AS(paired_t_test({1, 2}, {1}), DimensionError);
}

TEST_CASE("summarize: metrics per strategy and paired comparisons") {
  const auto runs = fake_runs(4, 12);
  const Summary s = summarize(runs);
  auto find = [&](const std::string& strategy, const std::string& metric) {
    for (const auto& r : s.rows)
      if (r.strategy == strategy && r.metric == metric) return r.stats;
    FAIL("missing row " << strategy << " " << metric);
    return MeanInterval{};
  };
  // mean over steps 1..10 of 0.2 + 0.01 step + 0.001 seed, averaged over seeds 1..4
  CHECK(std::abs(find("base", "first10_test_accuracy").mean - (0.2 + 0.055 + 0.0025)) < 1e-12);
  CHECK(std::abs(find("mei", "first10_test_accuracy").mean - (0.4 + 0.055 + 0.0025)) < 1e-12);
  CHECK(std::abs(find("base", "final_test_accuracy").mean - (0.2 + 0.12 + 0.0025)) < 1e-12);
  CHECK(std::abs(find("base", "var_xL_jump").mean - 0.5) < 1e-12);
  CHECK(find("mei", "var_xL_jump").n == 4);

  bool saw_fn_vs_wu = false;
  for (const auto& c : s.comparisons) {
    if (c.strategy == "mei_fn" && c.baseline == "base_wu" && c.metric == "first10_test_accuracy") {
      saw_fn_vs_wu = true;
      CHECK(std::abs(c.test.mean_diff - 0.2) < 1e-12);
      CHECK(c.test.p_value < 1e-6);
    }
  }
  CHECK(saw_fn_vs_wu);

  auto one_seed = fake_runs(1, 3);
  CHECK_THROWS_AS(summarize(one_seed), ArgumentError);
}

TEST_CASE("summary of records read back from CSV equals the in-memory summary") {
  const auto dir = tlab::testing::fresh_dir("summary");
  const auto runs = fake_runs(3, 11);
  write_records(dir / "runs.csv", runs);
  const Summary a = summarize(runs), b = summarize(read_records(dir / "runs.csv"));
  write_summary(a, dir / "a");
  write_summary(b, dir / "b");
  CHECK(read_file(dir / "a" / "summary.csv") == read_file(dir / "b" / "summary.csv"));
  CHECK(read_file(dir / "a" / "paired_tests.csv") == read_file(dir / "b" / "paired_tests.csv"));
  CHECK(read_file(dir / "a" / "summary.csv").rfind("strategy,metric,n,mean,std,ci95_half_width\n", 0) == 0);
  CHECK(format_summary(a) == format_summary(b));
}

TEST_CASE("plot data: one row per strategy and step, std across seeds") {
  const auto dir = tlab::testing::fresh_dir("plot");
  const auto runs = fake_runs(3, 4);
  const auto files = export_plotdata(runs, "accuracy_curve", dir, true);
  CHECK(files.size() == 2);
  std::ifstream in(dir / "accuracy_curve.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "strategy,step,n,mean,std");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4 * 5);
  CHECK(read_file(dir / "accuracy_curve.svg").find("<svg") != std::string::npos);

  // seeds 1..3 add 0.001 * seed: sample std 0.001
  std::ifstream again(dir / "accuracy_curve.csv");
  std::getline(again, line);
  std::getline(again, line);
  CHECK(line.rfind("base,0,3,", 0) == 0);
  const double sd = std::stod(line.substr(line.rfind(',') + 1));
  CHECK(std::abs(sd - 0.001) < 1e-12);

  CHECK(export_plotdata(runs, "noise_bar", dir).size() == 1);
  CHECK(export_plotdata(runs, "var_xL_curve", dir).size() == 1);
  CHECK_THROWS_AS(export_plotdata(runs, "pie", dir), ArgumentError);
}
