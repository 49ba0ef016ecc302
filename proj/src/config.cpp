#include "tlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "tlab/errors.hpp"
#include "tlab/init.hpp"
#include "tlab/network.hpp"

namespace tlab {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::base: return "base";
    case Strategy::base_wu: return "base_wu";
    case Strategy::mei: return "mei";
    case Strategy::mei_fn: return "mei_fn";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "base") return Strategy::base;
  if (name == "base_wu") return Strategy::base_wu;
  if (name == "mei") return Strategy::mei;
  if (name == "mei_fn") return Strategy::mei_fn;
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected base, base_wu, mei, mei_fn)");
}

std::vector<std::uint64_t> ExperimentConfig::default_seeds() {
  std::vector<std::uint64_t> s(24);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i + 1;
  return s;
}

double ExperimentConfig::mei_phi_w() const {
  if (lambda) return mei_variance(gamma, *lambda, target_classes.size());
  return phi_w.value_or(kDefaultPhiW);
}

std::filesystem::path ExperimentConfig::resolved_cache_dir() const {
  return cache_dir.empty() ? out / "cache" : cache_dir;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string_view key) {
  std::string k(trim(key));
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(trim(v));
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, s));
  }
  return d;
}

long long parse_int(std::string_view key, std::string_view v) {
  v = trim(v);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  const long long n = parse_int(key, v);
  if (n < 0) throw ConfigError(fmt::format("{}: must be >= 0", key));
  return static_cast<std::size_t>(n);
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<std::string_view> split_commas(std::string_view v) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto pos = v.find(',', start);
    const auto part = trim(v.substr(start, pos == std::string_view::npos ? v.npos : pos - start));
    if (!part.empty()) parts.push_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<int> to_class_list(std::string_view key, std::string_view v) {
  std::vector<int> out;
  for (long long x : parse_int_list(v)) {
    if (x < 0) throw ConfigError(fmt::format("{}: negative class {}", key, x));
    out.push_back(static_cast<int>(x));
  }
  return out;
}

}  // namespace

std::vector<long long> parse_int_list(std::string_view text) {
  std::vector<long long> out;
  for (auto part : split_commas(text)) {
    const auto dash = part.find('-', 1);
    if (dash == std::string_view::npos) {
      out.push_back(parse_int("list", part));
    } else {
      const long long lo = parse_int("range", part.substr(0, dash));
      const long long hi = parse_int("range", part.substr(dash + 1));
      if (hi < lo) throw ConfigError(fmt::format("empty range '{}'", part));
      for (long long x = lo; x <= hi; ++x) out.push_back(x);
    }
  }
  return out;
}

void apply_setting(ExperimentConfig& cfg, std::string_view raw_key, std::string_view value) {
  const std::string key = normalize_key(raw_key);
  value = trim(value);
  if (key == "task") {
    cfg.task = std::string(value);
  } else if (key == "source_classes") {
    cfg.source_classes = to_class_list(key, value);
  } else if (key == "target_classes") {
    cfg.target_classes = to_class_list(key, value);
  } else if (key == "arch") {
    cfg.arch = std::string(value);
  } else if (key == "strategies" || key == "strategy") {
    cfg.strategies.clear();
    for (auto s : split_commas(value)) cfg.strategies.push_back(parse_strategy(s));
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (long long s : parse_int_list(value)) {
      if (s < 0) throw ConfigError("seeds must be non-negative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  } else if (key == "gamma") {
    cfg.gamma = parse_double(key, value);
  } else if (key == "phi_w") {
    cfg.phi_w = parse_double(key, value);
    cfg.lambda.reset();
  } else if (key == "lambda") {
    cfg.lambda = parse_double(key, value);
    cfg.phi_w.reset();
  } else if (key == "batch_size") {
    cfg.batch_size = parse_count(key, value);
  } else if (key == "steps") {
    cfg.steps = parse_int(key, value);
  } else if (key == "warmup_steps") {
    cfg.warmup_steps = parse_int(key, value);
  } else if (key == "optimizer") {
    if (value == "adam") {
      cfg.optimizer = OptimizerKind::adam;
    } else if (value == "sgd") {
      cfg.optimizer = OptimizerKind::sgd;
    } else {
      throw ConfigError(fmt::format("optimizer: '{}' (expected adam or sgd)", value));
    }
  } else if (key == "out") {
    cfg.out = std::string(value);
  } else if (key == "cache_dir") {
    cfg.cache_dir = std::string(value);
  } else if (key == "data_dir") {
    cfg.data_dir = std::string(value);
  } else if (key == "pretrain_steps") {
    cfg.pretrain_steps = parse_int(key, value);
  } else if (key == "pretrain_gamma") {
    cfg.pretrain_gamma = parse_double(key, value);
  } else if (key == "dense_eval_steps") {
    cfg.dense_eval_steps = parse_int(key, value);
  } else if (key == "eval_every") {
    cfg.eval_every = parse_int(key, value);
  } else if (key == "test_limit") {
    cfg.test_limit = parse_count(key, value);
  } else if (key == "hflip") {
    cfg.hflip = parse_bool(key, value);
  } else if (key == "jobs") {
    cfg.jobs = parse_count(key, value);
  } else if (key == "synth_classes") {
    cfg.synth_classes = parse_count(key, value);
  } else if (key == "synth_dim") {
    cfg.synth_dim = parse_count(key, value);
  } else if (key == "synth_per_class") {
    cfg.synth_per_class = parse_count(key, value);
  } else if (key == "synth_difficulty") {
    cfg.synth_difficulty = parse_double(key, value);
  } else if (key == "synth_test_fraction") {
    cfg.synth_test_fraction = parse_double(key, value);
  } else if (key == "data_seed") {
    cfg.data_seed = parse_count(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
  bool saw_phi = false, saw_lambda = false;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    }
    const std::string key = normalize_key(line.substr(0, eq));
    saw_phi |= key == "phi_w";
    saw_lambda |= key == "lambda";
    try {
      apply_setting(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  if (saw_phi && saw_lambda) throw ConfigError("set either phi_w or lambda, not both");
}

void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
}

void ExperimentConfig::validate() const {
  if (task != "synth" && task != "mnist" && task != "cifar10" && task != "cifar100") {
    throw ConfigError("unknown task '" + task + "'");
  }
  if (!is_known_architecture(arch)) throw ConfigError("unknown architecture '" + arch + "'");
  if (strategies.empty()) throw ConfigError("no strategies");
  if (std::set<Strategy>(strategies.begin(), strategies.end()).size() != strategies.size()) {
    throw ConfigError("duplicate strategy");
  }
  if (seeds.empty()) throw ConfigError("no seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (phi_w && !(*phi_w > 0.0)) throw ConfigError("phi_w must be > 0");
  if (lambda && !(*lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
  if (pretrain_steps < 0) throw ConfigError("pretrain_steps must be >= 0");
  if (!(pretrain_gamma > 0.0)) throw ConfigError("pretrain_gamma must be > 0");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (dense_eval_steps < 0) throw ConfigError("dense_eval_steps must be >= 0");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");

  const std::size_t universe = task == "synth" ? synth_classes : task == "cifar100" ? 100 : 10;
  auto check_classes = [&](const std::vector<int>& cls, const char* name) {
    if (cls.size() < 2) throw ConfigError(std::string(name) + ": need at least 2 classes");
    if (std::set<int>(cls.begin(), cls.end()).size() != cls.size()) {
      throw ConfigError(std::string(name) + ": repeated class");
    }
    for (int c : cls) {
      if (c < 0 || static_cast<std::size_t>(c) >= universe) {
        throw ConfigError(fmt::format("{}: class {} outside [0, {})", name, c, universe));
      }
    }
  };
  check_classes(source_classes, "source_classes");
  check_classes(target_classes, "target_classes");

  if (task == "synth") {
    if (synth_classes < 2 || synth_dim < 1 || synth_per_class < 2) {
      throw ConfigError("synthetic task dimensions too small");
    }
    if (!(synth_difficulty >= 0.0)) throw ConfigError("synth_difficulty must be >= 0");
    if (!(synth_test_fraction > 0.0 && synth_test_fraction < 1.0)) {
      throw ConfigError("synth_test_fraction must be in (0, 1)");
    }
  }
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::vector<std::string> strategies;
  for (auto s : cfg.strategies) strategies.emplace_back(strategy_name(s));
  std::string out;
  auto line = [&](std::string_view k, const std::string& v) { out += fmt::format("{} = {}\n", k, v); };
  line("task", cfg.task);
  line("source_classes", fmt::format("{}", fmt::join(cfg.source_classes, ",")));
  line("target_classes", fmt::format("{}", fmt::join(cfg.target_classes, ",")));
  line("arch", cfg.arch);
  line("strategies", fmt::format("{}", fmt::join(strategies, ",")));
  line("seeds", fmt::format("{}", fmt::join(cfg.seeds, ",")));
  line("gamma", fmt::format("{:.17g}", cfg.gamma));
  if (cfg.lambda) {
    line("lambda", fmt::format("{:.17g}", *cfg.lambda));
  } else {
    line("phi_w", fmt::format("{:.17g}", cfg.phi_w.value_or(kDefaultPhiW)));
  }
  line("batch_size", std::to_string(cfg.batch_size));
  line("steps", std::to_string(cfg.steps));
  line("warmup_steps", std::to_string(cfg.warmup_steps));
  line("optimizer", cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd");
  line("pretrain_steps", std::to_string(cfg.pretrain_steps));
  line("pretrain_gamma", fmt::format("{:.17g}", cfg.pretrain_gamma));
  line("dense_eval_steps", std::to_string(cfg.dense_eval_steps));
  line("eval_every", std::to_string(cfg.eval_every));
  line("test_limit", std::to_string(cfg.test_limit));
  line("hflip", cfg.hflip ? "true" : "false");
  line("synth_classes", std::to_string(cfg.synth_classes));
  line("synth_dim", std::to_string(cfg.synth_dim));
  line("synth_per_class", std::to_string(cfg.synth_per_class));
  line("synth_difficulty", fmt::format("{:.17g}", cfg.synth_difficulty));
  line("synth_test_fraction", fmt::format("{:.17g}", cfg.synth_test_fraction));
  line("data_seed", std::to_string(cfg.data_seed));
  return out;
}

}  // namespace tlab
