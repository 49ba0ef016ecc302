#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlab/optim.hpp"

namespace tlab {

enum class Strategy { base, base_wu, mei, mei_fn };

const char* strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

inline constexpr double kDefaultPhiW = 1e-12;

// Declarative experiment description. Written as flat `key = value` lines;
// see README for the key list.
struct ExperimentConfig {
  // Tasks: "synth", "mnist", "cifar10", "cifar100".
  std::string task = "synth";
  std::vector<int> source_classes{0, 1, 2, 3, 4};
  std::vector<int> target_classes{5, 6, 7, 8, 9};
  std::string arch = "mlp";
  std::vector<Strategy> strategies{Strategy::base, Strategy::base_wu, Strategy::mei,
                                   Strategy::mei_fn};
  std::vector<std::uint64_t> seeds = default_seeds();
  double gamma = 1e-4;
  std::optional<double> phi_w;
  std::optional<double> lambda;
  std::size_t batch_size = 256;
  long steps = 200;
  long warmup_steps = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::filesystem::path out = "runs";
  std::filesystem::path cache_dir;  // empty: <out>/cache
  std::filesystem::path data_dir = "data";

  long pretrain_steps = 100;
  double pretrain_gamma = 1e-3;
  long dense_eval_steps = 10;  // test accuracy at every step up to here
  long eval_every = 10;        // then at this cadence
  std::size_t test_limit = 0;  // 0: whole target test split
  bool hflip = true;           // image tasks only
  std::size_t jobs = 1;

  std::size_t synth_classes = 10;
  std::size_t synth_dim = 64;
  std::size_t synth_per_class = 600;
  double synth_difficulty = 4.0;
  double synth_test_fraction = 0.15;
  std::uint64_t data_seed = 0;

  static std::vector<std::uint64_t> default_seeds();

  // Weight variance of an MEI head for this config's target task.
  double mei_phi_w() const;
  std::filesystem::path resolved_cache_dir() const;

  // Throws ConfigError.
  void validate() const;
};

// Applies one setting. Keys accept '-' or '_'. Setting phi_w clears lambda
// and the reverse, so the later layer (file, then flags) decides.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

// Parses `key = value` lines; '#' starts a comment. Setting both phi_w and
// lambda in one file is an error.
void apply_config_text(ExperimentConfig& cfg, std::string_view text);
void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);

std::string to_config_text(const ExperimentConfig& cfg);

// "1-4,7" -> {1,2,3,4,7}
std::vector<long long> parse_int_list(std::string_view text);

}  // namespace tlab
