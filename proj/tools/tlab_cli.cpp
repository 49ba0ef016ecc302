// tlab: pretrain backbones, fine-tune heads under each initialization
// strategy, summarize runs and export plot data.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tlab/config.hpp"
#include "tlab/errors.hpp"
#include "tlab/experiment.hpp"
#include "tlab/records.hpp"
#include "tlab/serialize.hpp"
#include "tlab/summary.hpp"

namespace {

struct ExperimentFlags {
  std::string config;
  std::optional<std::string> strategy, seeds, gamma, phi_w, lambda, batch_size, steps, out, jobs;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "key = value experiment file");
    app->add_option("--strategy", strategy, "comma list of base, base_wu, mei, mei_fn");
    app->add_option("--seeds", seeds, "seed list, e.g. 1-8 or 1,5,9");
    app->add_option("--gamma", gamma, "learning rate (default 1e-4)");
    app->add_option("--phi-w", phi_w, "MEI weight variance (default 1e-12)");
    app->add_option("--lambda", lambda, "MEI noise-proportion hyper-parameter");
    app->add_option("--batch-size", batch_size, "batch size (default 256)");
    app->add_option("--steps", steps, "fine-tuning steps");
    app->add_option("--out", out, "output directory");
    app->add_option("--jobs", jobs, "parallel runs");
    app->add_option("--set", sets, "extra key=value config override (repeatable)");
  }

  tlab::ExperimentConfig resolve() const {
    tlab::ExperimentConfig cfg;
    if (const char* dir = std::getenv("TLAB_DATA_DIR")) cfg.data_dir = dir;
    if (!config.empty()) tlab::apply_config_file(cfg, config);
    auto flag = [&](const char* key, const std::optional<std::string>& v) {
      if (v) tlab::apply_setting(cfg, key, *v);
    };
    flag("strategies", strategy);
    flag("seeds", seeds);
    flag("gamma", gamma);
    flag("phi_w", phi_w);
    flag("lambda", lambda);
    flag("batch_size", batch_size);
    flag("steps", steps);
    flag("out", out);
    flag("jobs", jobs);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw tlab::ConfigError("--set expects key=value, got '" + s + "'");
      tlab::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

int cmd_pretrain(const tlab::ExperimentConfig& cfg, bool force) {
  const tlab::TransferTask task = tlab::prepare_task(cfg);
  std::filesystem::create_directories(cfg.out);
  std::ofstream log(cfg.out / "pretrain.csv", std::ios::trunc);
  log << "seed,step,loss,train_accuracy\n";
  for (auto seed : cfg.seeds) {
    const auto path = tlab::backbone_cache_path(cfg, seed);
    if (!force && std::filesystem::exists(path)) {
      fmt::print("seed {}: cached {}\n", seed, path.string());
      continue;
    }
    std::vector<tlab::PretrainLogRow> rows;
    tlab::Network net = tlab::pretrain_backbone(cfg, task, seed, &rows);
    std::filesystem::create_directories(path.parent_path());
    tlab::save_network(path, net);
    for (const auto& r : rows) log << fmt::format("{},{},{:.17g},{:.17g}\n", seed, r.step, r.loss, r.accuracy);
    const double acc = tlab::evaluate_accuracy(net, task.source_test);
    fmt::print("seed {}: source test accuracy {:.4f} -> {}\n", seed, acc, path.string());
  }
  return 0;
}

int cmd_finetune(const tlab::ExperimentConfig& cfg) {
  const tlab::ExperimentResult res = tlab::run_experiment(cfg);
  std::size_t failed = 0;
  for (const auto& s : res.status) failed += !s.ok;
  fmt::print("{} runs, {} failed; records in {}\n", res.status.size(), failed, res.runs_csv.string());
  if (cfg.seeds.size() >= 2 && failed < res.status.size()) {
    const tlab::Summary s = tlab::summarize(res.records);
    tlab::write_summary(s, cfg.out);
    fmt::print("{}", tlab::format_summary(s));
  }
  return failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-learning head initialization lab"};
  app.require_subcommand(1);

  ExperimentFlags pre_flags, ft_flags;
  bool force = false;
  auto* pre = app.add_subcommand("pretrain", "pretrain and cache source-task backbones");
  pre_flags.attach(pre);
  pre->add_flag("--force", force, "retrain even if a cached backbone exists");
  auto* ft = app.add_subcommand("finetune", "run every strategy x seed and record telemetry");
  ft_flags.attach(ft);

  std::string runs, out_dir = ".", kind = "all";
  double confidence = 0.95;
  bool svg = false;
  auto* sum = app.add_subcommand("summarize", "confidence intervals and paired t-tests");
  sum->add_option("--runs", runs, "runs.csv")->required();
  sum->add_option("--out", out_dir, "directory for summary.csv and paired_tests.csv");
  sum->add_option("--confidence", confidence, "confidence level (default 0.95)");
  auto* plot = app.add_subcommand("plotdata", "per-step mean/std tables for plotting");
  plot->add_option("--runs", runs, "runs.csv")->required();
  plot->add_option("--out", out_dir, "output directory");
  plot->add_option("--kind", kind, "accuracy_curve, var_xL_curve, noise_bar or all");
  plot->add_flag("--svg", svg, "also write an SVG line chart per curve");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return cmd_pretrain(pre_flags.resolve(), force);
    if (ft->parsed()) return cmd_finetune(ft_flags.resolve());
    if (sum->parsed()) {
      const tlab::Summary s = tlab::summarize(tlab::read_records(runs), confidence);
      tlab::write_summary(s, out_dir);
      fmt::print("{}", tlab::format_summary(s));
      return 0;
    }
    if (plot->parsed()) {
      const auto records = tlab::read_records(runs);
      std::vector<std::string> kinds{kind};
      if (kind == "all") kinds = {"accuracy_curve", "var_xL_curve", "noise_bar"};
      for (const auto& k : kinds) {
        for (const auto& p : tlab::export_plotdata(records, k, out_dir, svg)) fmt::print("{}\n", p.string());
      }
      return 0;
    }
  } catch (const tlab::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 64;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
