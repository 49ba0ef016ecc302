#include "tlab/summary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "tlab/errors.hpp"

namespace tlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double t_quantile(double confidence, std::size_t dof) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ArgumentError("confidence must be in (0, 1)");
  if (dof < 1) throw ArgumentError("t_quantile needs at least one degree of freedom");
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
}

MeanInterval mean_interval(const std::vector<double>& values, double confidence) {
  if (values.size() < 2) throw ArgumentError("a confidence interval needs at least 2 values");
  MeanInterval m;
  m.n = values.size();
  m.mean = mean_of(values);
  m.std = sample_std(values, m.mean);
  m.half_width = t_quantile(confidence, m.n - 1) * m.std / std::sqrt(static_cast<double>(m.n));
  return m;
}

PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                          double confidence) {
  if (a.size() != b.size()) throw DimensionError("paired_t_test: unequal sample sizes");
  if (a.size() < 2) throw ArgumentError("paired_t_test needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const MeanInterval m = mean_interval(d, confidence);
  PairedTTest t;
  t.n = m.n;
  t.mean_diff = m.mean;
  t.half_width = m.half_width;
  if (m.std == 0.0) {
    t.t_stat = m.mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m.mean);
    t.p_value = m.mean == 0.0 ? 1.0 : 0.0;
    return t;
  }
  t.t_stat = m.mean / (m.std / std::sqrt(static_cast<double>(m.n)));
  boost::math::students_t dist(static_cast<double>(m.n - 1));
  t.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t.t_stat)));
  return t;
}

const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> m{
      "first10_test_accuracy", "final_test_accuracy",       "initial_noise_fraction_pct",
      "initial_loss",          "initial_delta_prev_energy", "var_xL_jump"};
  return m;
}

namespace {

using RunKey = std::pair<Strategy, std::uint64_t>;
using RunSteps = std::map<long, const RunRecord*>;

std::vector<Strategy> strategy_order(const std::vector<RunRecord>& records) {
  std::vector<Strategy> order;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);
  }
  return order;
}

std::map<std::string, double> run_metrics(const RunSteps& steps) {
  std::map<std::string, double> m;
  for (const auto& name : summary_metrics()) m[name] = kNaN;

  std::vector<double> early;
  for (const auto& [step, rec] : steps) {
    if (step >= 1 && step <= 10 && rec->test_accuracy) early.push_back(*rec->test_accuracy);
  }
  if (early.empty()) {
    if (auto it = steps.find(0); it != steps.end() && it->second->test_accuracy) {
      early.push_back(*it->second->test_accuracy);
    }
  }
  if (!early.empty()) m["first10_test_accuracy"] = mean_of(early);

  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (it->second->test_accuracy) {
      m["final_test_accuracy"] = *it->second->test_accuracy;
      break;
    }
  }
  if (auto it0 = steps.find(0); it0 != steps.end()) {
    const RunRecord& r0 = *it0->second;
    m["initial_noise_fraction_pct"] = r0.report.noise_fraction_pct;
    m["initial_loss"] = r0.report.loss;
    m["initial_delta_prev_energy"] = r0.report.delta_prev_energy;
    if (auto it1 = steps.find(1); it1 != steps.end()) {
      m["var_xL_jump"] = std::abs(it1->second->var_xL_probe - r0.var_xL_probe);
    }
  }
  return m;
}

}  // namespace

Summary summarize(const std::vector<RunRecord>& records, double confidence) {
  if (records.empty()) throw ArgumentError("summarize: no records");
  std::map<RunKey, RunSteps> runs;
  for (const auto& r : records) runs[{r.strategy, r.seed}][r.step()] = &r;

  const auto order = strategy_order(records);
  // strategy -> seed -> metric -> value
  std::map<Strategy, std::map<std::uint64_t, std::map<std::string, double>>> metrics;
  for (const auto& [key, steps] : runs) metrics[key.first][key.second] = run_metrics(steps);

  for (auto s : order) {
    if (metrics[s].size() < 2) {
      throw ArgumentError(fmt::format("summarize: strategy {} has {} seed(s); at least 2 required",
                                      strategy_name(s), metrics[s].size()));
    }
  }

  Summary out;
  for (auto s : order) {
    for (const auto& name : summary_metrics()) {
      std::vector<double> v;
      for (const auto& [seed, m] : metrics[s]) {
        if (!std::isnan(m.at(name))) v.push_back(m.at(name));
      }
      if (v.size() < 2) continue;
      out.rows.push_back({strategy_name(s), name, mean_interval(v, confidence)});
    }
  }

  auto compare = [&](Strategy a, Strategy b, const std::string& name) {
    if (!metrics.count(a) || !metrics.count(b)) return;
    std::vector<double> va, vb;
    for (const auto& [seed, m] : metrics[a]) {
      auto it = metrics[b].find(seed);
      if (it == metrics[b].end()) continue;
      const double x = m.at(name), y = it->second.at(name);
      if (std::isnan(x) || std::isnan(y)) continue;
      va.push_back(x);
      vb.push_back(y);
    }
    if (va.size() < 2) return;
    out.comparisons.push_back(
        {strategy_name(a), strategy_name(b), name, paired_t_test(va, vb, confidence)});
  };
  for (const char* name : {"first10_test_accuracy", "final_test_accuracy"}) {
    for (auto s : order) {
      if (s != Strategy::base) compare(s, Strategy::base, name);
    }
    compare(Strategy::mei_fn, Strategy::base_wu, name);
  }
  return out;
}

namespace {

std::string num(double v) { return std::isnan(v) ? "nan" : fmt::format("{:.17g}", v); }

}  // namespace

void write_summary(const Summary& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream rows(dir / "summary.csv", std::ios::trunc);
  rows << "strategy,metric,n,mean,std,ci95_half_width\n";
  for (const auto& r : s.rows) {
    rows << fmt::format("{},{},{},{},{},{}\n", r.strategy, r.metric, r.stats.n, num(r.stats.mean),
                        num(r.stats.std), num(r.stats.half_width));
  }
  std::ofstream cmp(dir / "paired_tests.csv", std::ios::trunc);
  cmp << "strategy,baseline,metric,n,mean_diff,ci95_half_width,t_stat,p_value\n";
  for (const auto& c : s.comparisons) {
    cmp << fmt::format("{},{},{},{},{},{},{},{}\n", c.strategy, c.baseline, c.metric, c.test.n,
                       num(c.test.mean_diff), num(c.test.half_width), num(c.test.t_stat),
                       num(c.test.p_value));
  }
}

std::string format_summary(const Summary& s) {
  std::string out = fmt::format("{:<8} {:<28} {:>3} {:>14} {:>12}\n", "strategy", "metric", "n",
                                "mean", "+/- (95%)");
  for (const auto& r : s.rows) {
    out += fmt::format("{:<8} {:<28} {:>3} {:>14.6g} {:>12.4g}\n", r.strategy, r.metric, r.stats.n,
                       r.stats.mean, r.stats.half_width);
  }
  out += "\npaired t-tests\n";
  for (const auto& c : s.comparisons) {
    out += fmt::format("{:<8} vs {:<8} {:<22} diff {:>10.4g} +/- {:<10.4g} t {:>9.3f} p {:.3g}\n",
                       c.strategy, c.baseline, c.metric, c.test.mean_diff, c.test.half_width,
                       c.test.t_stat, c.test.p_value);
  }
  return out;
}

namespace {

struct CurvePoint {
  long step;
  std::size_t n;
  double mean;
  double std;
};

const char* strategy_color(const std::string& s) {
  if (s == "base") return "#1f77b4";
  if (s == "base_wu") return "#ff7f0e";
  if (s == "mei") return "#2ca02c";
  if (s == "mei_fn") return "#d62728";
  return "#555555";
}

void write_svg(const std::filesystem::path& path, std::string_view title, std::string_view ylabel,
               const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves) {
  constexpr double W = 720, H = 420, L = 70, R = 130, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& [name, pts] : curves) {
    for (const auto& p : pts) {
      x0 = std::min(x0, static_cast<double>(p.step));
      x1 = std::max(x1, static_cast<double>(p.step));
      y0 = std::min(y0, p.mean - p.std);
      y1 = std::max(y1, p.mean + p.std);
    }
  }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"24\" font-size=\"14\">{}</text>\n",
      W, H, L, title);
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<line x1=\"{0}\" y1=\"{3}\" x2=\"{0}\" y2=\"{1}\" stroke=\"black\"/>\n",
      L, H - B, W - R, T);
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0, xv = x0 + (x1 - x0) * i / 4.0;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", L - 6,
                       sy(yv) + 4, yv);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.0f}</text>\n",
                       sx(xv), H - B + 18, xv);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">step</text>\n",
                     (L + W - R) / 2, H - 10);
  svg += fmt::format(
      "<text x=\"16\" y=\"{:.1f}\" transform=\"rotate(-90 16 {:.1f})\" "
      "text-anchor=\"middle\">{}</text>\n",
      (T + H - B) / 2, (T + H - B) / 2, ylabel);

  int legend = 0;
  for (const auto& [name, pts] : curves) {
    const char* color = strategy_color(name);
    std::string band, line;
    for (const auto& p : pts) band += fmt::format("{:.2f},{:.2f} ", sx(p.step), sy(p.mean + p.std));
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
      band += fmt::format("{:.2f},{:.2f} ", sx(it->step), sy(it->mean - it->std));
    }
    for (const auto& p : pts) line += fmt::format("{:.2f},{:.2f} ", sx(p.step), sy(p.mean));
    svg += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                       band, color);
    svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                       line, color);
    const double ly = T + 10 + 18 * legend++;
    svg += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" "
        "stroke-width=\"3\"/><text x=\"{4:.1f}\" y=\"{5:.1f}\">{6}</text>\n",
        W - R + 10, ly, W - R + 30, color, W - R + 36, ly + 4, name);
  }
  svg += "</svg>\n";
  std::ofstream(path, std::ios::trunc) << svg;
}

}  // namespace

std::vector<std::filesystem::path> export_plotdata(const std::vector<RunRecord>& records,
                                                   std::string_view kind,
                                                   const std::filesystem::path& dir, bool svg) {
  if (kind != "accuracy_curve" && kind != "var_xL_curve" && kind != "noise_bar") {
    throw ArgumentError("unknown plot kind '" + std::string(kind) +
                        "' (expected accuracy_curve, var_xL_curve, noise_bar)");
  }
  if (records.empty()) throw ArgumentError("export_plotdata: no records");

  std::map<std::pair<Strategy, long>, std::vector<double>> cells;
  for (const auto& r : records) {
    if (kind == "accuracy_curve") {
      if (r.test_accuracy) cells[{r.strategy, r.step()}].push_back(*r.test_accuracy);
    } else if (kind == "var_xL_curve") {
      cells[{r.strategy, r.step()}].push_back(r.var_xL_probe);
    } else if (r.step() == 0 && !std::isnan(r.report.noise_fraction_pct)) {
      cells[{r.strategy, 0}].push_back(r.report.noise_fraction_pct);
    }
  }

  std::filesystem::create_directories(dir);
  const auto csv_path = dir / (std::string(kind) + ".csv");
  std::ofstream csv(csv_path, std::ios::trunc);
  csv << "strategy,step,n,mean,std\n";
  std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
  for (auto s : strategy_order(records)) {
    std::vector<CurvePoint> pts;
    for (const auto& [key, values] : cells) {
      if (key.first != s) continue;
      const double m = mean_of(values);
      pts.push_back({key.second, values.size(), m, sample_std(values, m)});
    }
    for (const auto& p : pts) {
      csv << fmt::format("{},{},{},{},{}\n", strategy_name(s), p.step, p.n, num(p.mean), num(p.std));
    }
    curves.emplace_back(strategy_name(s), std::move(pts));
  }
  std::vector<std::filesystem::path> written{csv_path};
  if (svg && kind != "noise_bar") {
    const auto svg_path = dir / (std::string(kind) + ".svg");
    write_svg(svg_path, kind == "accuracy_curve" ? "Test accuracy" : "Variance of head input",
              kind == "accuracy_curve" ? "accuracy" : "Var(X^L)", curves);
    written.push_back(svg_path);
  }
  return written;
}

}  // namespace tlab
