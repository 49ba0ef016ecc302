#include "tlab/records.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "tlab/errors.hpp"

namespace tlab {

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols{
      "strategy",  "seed",          "step",     "phase",
      "loss",      "train_accuracy", "phi_total", "e_est",
      "e_lab",     "e_cross",       "noise_fraction_pct", "delta_prev_energy",
      "var_xL",    "var_xL_probe", "head_weight_energy", "test_accuracy", "wall_ms"};
  return cols;
}

std::string csv_header() {
  std::string h;
  for (const auto& c : record_columns()) {
    if (!h.empty()) h += ',';
    h += c;
  }
  return h;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

double to_double(const std::string& s, std::size_t line_col) {
  if (s == "nan") return std::nan("");
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError("bad number '" + s + "' in column " + std::to_string(line_col), 0);
  }
  return d;
}

template <typename Int>
Int to_integer(const std::string& s, std::size_t col) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("bad integer '" + s + "' in column " + std::to_string(col), 0);
  }
  return v;
}

}  // namespace

std::string to_csv_row(const RunRecord& r) {
  const EnergyReport& e = r.report;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3f}", strategy_name(r.strategy),
                     r.seed, e.step, r.phase == TrainPhase::warmup ? "warmup" : "joint",
                     num(e.loss), num(e.accuracy), num(e.phi_total), num(e.e_est), num(e.e_lab),
                     num(e.e_cross), num(e.noise_fraction_pct), num(e.delta_prev_energy),
                     num(e.var_xL), num(r.var_xL_probe), num(r.head_weight_energy),
                     r.test_accuracy ? num(*r.test_accuracy) : std::string(), r.wall_ms);
}

RunRecord parse_csv_row(const std::string& line) {
  std::vector<std::string> f;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  if (f.size() != record_columns().size()) {
    throw ParseError("runs row has " + std::to_string(f.size()) + " fields, expected " +
                         std::to_string(record_columns().size()),
                     0);
  }
  RunRecord r;
  try {
    r.strategy = parse_strategy(f[0]);
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), 0);
  }
  r.seed = to_integer<std::uint64_t>(f[1], 1);
  r.report.step = to_integer<long>(f[2], 2);
  if (f[3] == "warmup") {
    r.phase = TrainPhase::warmup;
  } else if (f[3] == "joint") {
    r.phase = TrainPhase::joint;
  } else {
    throw ParseError("bad phase '" + f[3] + "'", 0);
  }
  r.report.loss = to_double(f[4], 4);
  r.report.accuracy = to_double(f[5], 5);
  r.report.phi_total = to_double(f[6], 6);
  r.report.e_est = to_double(f[7], 7);
  r.report.e_lab = to_double(f[8], 8);
  r.report.e_cross = to_double(f[9], 9);
  r.report.noise_fraction_pct = to_double(f[10], 10);
  r.report.delta_prev_energy = to_double(f[11], 11);
  r.report.var_xL = to_double(f[12], 12);
  r.var_xL_probe = to_double(f[13], 13);
  r.head_weight_energy = to_double(f[14], 14);
  if (!f[15].empty()) r.test_accuracy = to_double(f[15], 15);
  r.wall_ms = to_double(f[16], 16);
  return r;
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw ParseError(path.string() + ": unexpected header", 0);
  }
  std::vector<RunRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse_csv_row(line));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what(), 0);
    }
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << csv_header() << '\n';
  for (const auto& r : records) out << to_csv_row(r) << '\n';
}

RecordSink::RecordSink(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  out_ << csv_header() << '\n';
  out_.flush();
}

void RecordSink::append(std::size_t run_index, const RunRecord& record) {
  std::lock_guard lock(mutex_);
  if (run_index == next_run_) {
    out_ << to_csv_row(record) << '\n';
    out_.flush();
  } else {
    pending_[run_index].push_back(to_csv_row(record));
  }
}

void RecordSink::finish_run(std::size_t run_index) {
  std::lock_guard lock(mutex_);
  finished_[run_index] = true;
  drain();
}

void RecordSink::drain() {
  while (finished_.count(next_run_)) {
    finished_.erase(next_run_);
    ++next_run_;
    if (auto it = pending_.find(next_run_); it != pending_.end()) {
      for (const auto& row : it->second) out_ << row << '\n';
      pending_.erase(it);
    }
  }
  out_.flush();
}

}  // namespace tlab
