#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tlab/config.hpp"
#include "tlab/data.hpp"
#include "tlab/init.hpp"
#include "tlab/network.hpp"
#include "tlab/records.hpp"

namespace tlab {

// Source and target splits of one transfer problem, already normalized with
// their own training-split channel statistics.
struct TransferTask {
  Dataset source_train, source_test;
  Dataset target_train, target_test;
  std::size_t input_width = 0;
};

// Loads or generates the data named by cfg.task. Real datasets are read from
// cfg.data_dir: mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte,
// cifar10/{data_batch_1..5,test_batch}.bin, cifar100/{train,test}.bin.
TransferTask prepare_task(const ExperimentConfig& cfg);

// Head initialization and feature-norm flag for a strategy.
InitSpec head_init(const ExperimentConfig& cfg, Strategy strategy);
bool uses_feature_norm(Strategy strategy);

// Test-accuracy cadence: every step up to dense_eval_steps, then every eval_every.
bool is_eval_step(const ExperimentConfig& cfg, long step);

double evaluate_accuracy(Network& net, const Dataset& ds, std::size_t limit = 0);

struct PretrainLogRow {
  long step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

Network pretrain_backbone(const ExperimentConfig& cfg, const TransferTask& task, std::uint64_t seed,
                          std::vector<PretrainLogRow>* log = nullptr);

// Cache file keyed by architecture, source task, pretraining recipe and seed.
std::filesystem::path backbone_cache_path(const ExperimentConfig& cfg, std::uint64_t seed);
Network load_or_pretrain(const ExperimentConfig& cfg, const TransferTask& task, std::uint64_t seed);

// Fine-tunes one (strategy, seed) run and emits one record per step 0..steps.
// Step s is measured after s updates. Telemetry invariants are checked live.
void run_finetune(const ExperimentConfig& cfg, const TransferTask& task, const Network& backbone,
                  Strategy strategy, std::uint64_t seed,
                  const std::function<void(const RunRecord&)>& emit);

struct RunStatus {
  Strategy strategy = Strategy::base;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string message;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<RunStatus> status;
  std::filesystem::path runs_csv;
};

// Validates cfg, then runs every (strategy, seed) pair. Writes
// <out>/config.txt, <out>/runs.csv (incrementally) and <out>/status.csv. A
// failing run is recorded in the status list and does not stop the others.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace tlab
