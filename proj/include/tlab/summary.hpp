#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tlab/records.hpp"

namespace tlab {

struct MeanInterval {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;         // sample standard deviation (n - 1)
  double half_width = 0.0;  // Student-t half-width at the requested confidence
};

// Two-sided Student-t quantile t_{(1+confidence)/2, dof}.
double t_quantile(double confidence, std::size_t dof);

MeanInterval mean_interval(const std::vector<double>& values, double confidence = 0.95);

struct PairedTTest {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double half_width = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;  // two-sided
};

// Tests mean(a - b) = 0 for paired samples.
PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                          double confidence = 0.95);

struct SummaryRow {
  std::string strategy;
  std::string metric;
  MeanInterval stats;
};

struct ComparisonRow {
  std::string strategy;
  std::string baseline;
  std::string metric;
  PairedTTest test;
};

struct Summary {
  std::vector<SummaryRow> rows;
  std::vector<ComparisonRow> comparisons;
};

// Per-seed metrics of one run, as summarized across seeds.
//   first10_test_accuracy    mean test accuracy over steps 1..10
//   final_test_accuracy      test accuracy at the last evaluated step
//   initial_noise_fraction_pct, initial_loss, initial_delta_prev_energy  at step 0
//   var_xL_jump              |Var(X^L) at step 1 - at step 0| on the probe batch
const std::vector<std::string>& summary_metrics();

// Needs at least two seeds per strategy. Comparisons pair runs by seed: every
// strategy against base on each metric, and mei_fn against base_wu.
Summary summarize(const std::vector<RunRecord>& records, double confidence = 0.95);

void write_summary(const Summary& s, const std::filesystem::path& dir);
std::string format_summary(const Summary& s);

// Kinds: "accuracy_curve", "var_xL_curve", "noise_bar". Writes <kind>.csv
// (columns strategy,step,n,mean,std) and, for curves with `svg`, <kind>.svg.
std::vector<std::filesystem::path> export_plotdata(const std::vector<RunRecord>& records,
                                                   std::string_view kind,
                                                   const std::filesystem::path& dir,
                                                   bool svg = false);

}  // namespace tlab
