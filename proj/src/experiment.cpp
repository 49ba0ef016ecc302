#include "tlab/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "tlab/errors.hpp"
#include "tlab/optim.hpp"
#include "tlab/serialize.hpp"
#include "tlab/telemetry.hpp"

namespace tlab {

namespace {

// RNG stream ids; fixed so that every strategy of a seed sees the same batches.
enum Stream : std::uint64_t {
  kSynthData = 0,
  kSynthSplit = 1,
  kPretrainInit = 10,
  kPretrainBatches = 11,
  kPretrainAugment = 12,
  kHeadInit = 20,
  kFinetuneBatches = 21,
  kFinetuneAugment = 22,
};

std::pair<Dataset, Dataset> normalized_pair(const Dataset& train, const Dataset& test) {
  return {normalize_channels(train, train), normalize_channels(train, test)};
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

TransferTask prepare_task(const ExperimentConfig& cfg) {
  Dataset train, test;
  const auto& dir = cfg.data_dir;
  if (cfg.task == "synth") {
    SeededRng data_rng = SeededRng::derive(cfg.data_seed, kSynthData);
    const Dataset all = synth_task(data_rng, cfg.synth_classes, cfg.synth_dim,
                                   cfg.synth_classes * cfg.synth_per_class, cfg.synth_difficulty);
    SeededRng split_rng = SeededRng::derive(cfg.data_seed, kSynthSplit);
    std::tie(train, test) = split_random(all, cfg.synth_test_fraction, split_rng);
  } else if (cfg.task == "mnist") {
    train = load_idx(dir / "mnist/train-images-idx3-ubyte", dir / "mnist/train-labels-idx1-ubyte",
                     10, Split::train);
    test = load_idx(dir / "mnist/t10k-images-idx3-ubyte", dir / "mnist/t10k-labels-idx1-ubyte", 10,
                    Split::test);
  } else if (cfg.task == "cifar10") {
    std::vector<Dataset> parts;
    for (int i = 1; i <= 5; ++i) {
      parts.push_back(load_cifar_bin(dir / fmt::format("cifar10/data_batch_{}.bin", i), 10, 1));
    }
    train = concat(parts);
    test = load_cifar_bin(dir / "cifar10/test_batch.bin", 10, 1, Split::test);
  } else if (cfg.task == "cifar100") {
    train = load_cifar_bin(dir / "cifar100/train.bin", 100, 2);
    test = load_cifar_bin(dir / "cifar100/test.bin", 100, 2, Split::test);
  } else {
    throw ConfigError("unknown task '" + cfg.task + "'");
  }

  TransferTask task;
  std::tie(task.source_train, task.source_test) = normalized_pair(
      select_classes(train, cfg.source_classes), select_classes(test, cfg.source_classes));
  std::tie(task.target_train, task.target_test) = normalized_pair(
      select_classes(train, cfg.target_classes), select_classes(test, cfg.target_classes));
  task.input_width = task.source_train.sample_size();
  if (task.target_test.empty()) throw ValidationError("target test split is empty");
  return task;
}

InitSpec head_init(const ExperimentConfig& cfg, Strategy strategy) {
  const std::size_t classes = cfg.target_classes.size();
  switch (strategy) {
    case Strategy::base:
    case Strategy::base_wu:
      return InitSpec::he_fan_out(2.0);
    case Strategy::mei:
    case Strategy::mei_fn:
      if (cfg.lambda) return InitSpec::mei(cfg.gamma, *cfg.lambda, classes);
      return InitSpec::mei_for_variance(cfg.gamma, cfg.mei_phi_w(), classes);
  }
  throw ArgumentError("unknown strategy");
}

bool uses_feature_norm(Strategy strategy) { return strategy == Strategy::mei_fn; }

bool is_eval_step(const ExperimentConfig& cfg, long step) {
  return step <= cfg.dense_eval_steps || step % cfg.eval_every == 0 || step == cfg.steps;
}

double evaluate_accuracy(Network& net, const Dataset& ds, std::size_t limit) {
  const std::size_t n = limit ? std::min(limit, ds.size()) : ds.size();
  if (n == 0) throw ArgumentError("evaluate_accuracy: empty dataset");
  constexpr std::size_t kChunk = 1024;
  std::size_t hits = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(n, start + kChunk); ++i) idx.push_back(i);
    const Batch b = gather(ds, idx);
    const ForwardTrace t = forward(net, b.x, Mode::eval);
    const auto pred = argmax_rows(t.logits);
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == b.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

Network pretrain_backbone(const ExperimentConfig& cfg, const TransferTask& task, std::uint64_t seed,
                          std::vector<PretrainLogRow>* log) {
  SeededRng init_rng = SeededRng::derive(seed, kPretrainInit);
  Network net = make_architecture(cfg.arch, task.input_width, task.source_train.classes, init_rng);
  Optimizer opt(OptimizerKind::adam, cfg.pretrain_gamma);
  opt.reset(net);
  BatchSampler sampler(task.source_train.size(), cfg.batch_size,
                       SeededRng::derive(seed, kPretrainBatches));
  SeededRng aug_rng = SeededRng::derive(seed, kPretrainAugment);
  const bool flip = cfg.hflip && task.source_train.is_image();
  const ParamMask all = warmup_mask(net, TrainPhase::joint);
  for (long step = 0; step < cfg.pretrain_steps; ++step) {
    Batch b = gather(task.source_train, sampler.next());
    if (flip) b.x = augment_hflip(b.x, aug_rng);
    const ForwardTrace trace = forward(net, b.x, Mode::train);
    const BackwardTrace bt = backward(net, trace, b.y);
    if (log && (step % 10 == 0 || step + 1 == cfg.pretrain_steps)) {
      log->push_back({step, ce_loss_from_logits(trace.logits, b.y), accuracy(trace.logits, b.y)});
    }
    opt.step(net, bt, all);
  }
  return net;
}

std::filesystem::path backbone_cache_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::string key = fmt::format("arch={};task={};source={};batch={};steps={};lr={:.17g};hflip={}",
                                cfg.arch, cfg.task, fmt::join(cfg.source_classes, ","),
                                cfg.batch_size, cfg.pretrain_steps, cfg.pretrain_gamma, cfg.hflip);
  if (cfg.task == "synth") {
    key += fmt::format(";synth={},{},{},{:.17g},{:.17g},{}", cfg.synth_classes, cfg.synth_dim,
                       cfg.synth_per_class, cfg.synth_difficulty, cfg.synth_test_fraction,
                       cfg.data_seed);
  }
  return cfg.resolved_cache_dir() /
         fmt::format("backbone_{}_{:016x}_s{}.bin", cfg.arch, fnv1a(key), seed);
}

Network load_or_pretrain(const ExperimentConfig& cfg, const TransferTask& task, std::uint64_t seed) {
  const auto path = backbone_cache_path(cfg, seed);
  if (std::filesystem::exists(path)) return load_network(path);
  Network net = pretrain_backbone(cfg, task, seed);
  std::filesystem::create_directories(path.parent_path());
  save_network(path, net);
  return net;
}

void run_finetune(const ExperimentConfig& cfg, const TransferTask& task, const Network& backbone,
                  Strategy strategy, std::uint64_t seed,
                  const std::function<void(const RunRecord&)>& emit) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t classes = task.target_train.classes;
  SeededRng head_rng = SeededRng::derive(seed, kHeadInit);
  Network net =
      replace_head(backbone, classes, head_init(cfg, strategy), uses_feature_norm(strategy), head_rng);

  Optimizer opt(cfg.optimizer, cfg.gamma);
  opt.reset(net);
  BatchSampler sampler(task.target_train.size(), cfg.batch_size,
                       SeededRng::derive(seed, kFinetuneBatches));
  SeededRng aug_rng = SeededRng::derive(seed, kFinetuneAugment);
  const bool flip = cfg.hflip && task.target_train.is_image();

  std::vector<std::size_t> probe_idx(std::min(cfg.batch_size, task.target_train.size()));
  for (std::size_t i = 0; i < probe_idx.size(); ++i) probe_idx[i] = i;
  const Tensor probe = gather(task.target_train, probe_idx).x;

  for (long step = 0; step <= cfg.steps; ++step) {
    Batch b = gather(task.target_train, sampler.next());
    if (flip) b.x = augment_hflip(b.x, aug_rng);
    const ForwardTrace trace = forward(net, b.x, Mode::train);
    const BackwardTrace bt = backward(net, trace, b.y);

    RunRecord rec;
    rec.strategy = strategy;
    rec.seed = seed;
    rec.phase = strategy == Strategy::base_wu && step < cfg.warmup_steps ? TrainPhase::warmup
                                                                         : TrainPhase::joint;
    rec.report = make_energy_report(step, trace, bt, b.y);
    check_report_invariants(rec.report, classes);
    rec.head_weight_energy = mean_square(net.head().weight);
    {
      Network scratch = net;  // keeps feature_norm running statistics untouched
      rec.var_xL_probe = reduce_stats(forward(scratch, probe, Mode::train).head_input()).variance;
    }
    if (is_eval_step(cfg, step)) rec.test_accuracy = evaluate_accuracy(net, task.target_test, cfg.test_limit);
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    emit(rec);

    if (step < cfg.steps) opt.step(net, bt, warmup_mask(net, rec.phase));
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out);
  {
    std::ofstream c(cfg.out / "config.txt", std::ios::trunc);
    c << to_config_text(cfg);
  }
  const TransferTask task = prepare_task(cfg);

  std::vector<Network> backbones;
  for (auto seed : cfg.seeds) backbones.push_back(load_or_pretrain(cfg, task, seed));

  struct Job {
    Strategy strategy;
    std::size_t seed_index;
  };
  std::vector<Job> jobs;
  for (auto s : cfg.strategies)
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) jobs.push_back({s, i});

  ExperimentResult result;
  result.runs_csv = cfg.out / "runs.csv";
  RecordSink sink(result.runs_csv);
  std::vector<std::vector<RunRecord>> per_run(jobs.size());
  result.status.resize(jobs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const std::uint64_t seed = cfg.seeds[job.seed_index];
      RunStatus& st = result.status[i];
      st.strategy = job.strategy;
      st.seed = seed;
      try {
        run_finetune(cfg, task, backbones[job.seed_index], job.strategy, seed,
                     [&](const RunRecord& r) {
                       per_run[i].push_back(r);
                       sink.append(i, r);
                     });
      } catch (const std::exception& e) {
        st.ok = false;
        st.message = e.what();
        fmt::print(stderr, "run {} seed {} failed: {}\n", strategy_name(job.strategy), seed, e.what());
      }
      sink.finish_run(i);
    }
  };
  const std::size_t threads = std::min(cfg.jobs, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (auto& rows : per_run) result.records.insert(result.records.end(), rows.begin(), rows.end());

  std::ofstream st(cfg.out / "status.csv", std::ios::trunc);
  st << "strategy,seed,status,message\n";
  for (const auto& s : result.status) {
    std::string msg = s.message;
    for (char& c : msg) {
      if (c == ',' || c == '\n') c = ';';
    }
    st << strategy_name(s.strategy) << ',' << s.seed << ',' << (s.ok ? "ok" : "failed") << ','
       << msg << '\n';
  }
  return result;
}

}  // namespace tlab
