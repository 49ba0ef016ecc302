#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tlab/config.hpp"
#include "tlab/optim.hpp"
#include "tlab/telemetry.hpp"

namespace tlab {

// One training step of one (strategy, seed) run.
struct RunRecord {
  Strategy strategy = Strategy::base;
  std::uint64_t seed = 0;
  TrainPhase phase = TrainPhase::joint;
  EnergyReport report;  // report.step is the step index
  double head_weight_energy = 0.0;
  // Var(X^L) on the run's fixed probe batch; unlike report.var_xL it does not
  // move when only the sampled batch changes.
  double var_xL_probe = 0.0;
  std::optional<double> test_accuracy;
  double wall_ms = 0.0;

  long step() const noexcept { return report.step; }
};

// Column order of runs.csv. wall_ms is last so determinism checks can drop it.
const std::vector<std::string>& record_columns();
std::string csv_header();
std::string to_csv_row(const RunRecord& r);
RunRecord parse_csv_row(const std::string& line);
std::vector<RunRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<RunRecord>& records);

// Append-only CSV sink shared by run workers. Rows of run i are written only
// after every run before i has been committed, so the file order never
// depends on scheduling. Each write is flushed.
class RecordSink {
 public:
  explicit RecordSink(const std::filesystem::path& path);

  // Streams rows of the run that is next in order; buffers the others.
  void append(std::size_t run_index, const RunRecord& record);
  void finish_run(std::size_t run_index);

 private:
  void drain();

  std::mutex mutex_;
  std::ofstream out_;
  std::size_t next_run_ = 0;
  std::map<std::size_t, std::vector<std::string>> pending_;
  std::map<std::size_t, bool> finished_;
};

}  // namespace tlab
