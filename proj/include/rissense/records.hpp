#pragma once

// Trial records and their CSV codec.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "rissense/types.hpp"

namespace rissense {

inline constexpr double kDbFloor = -400.0;
inline constexpr double kLinearFloor = 1e-40;

inline double to_db(double linear) {
  if (std::isnan(linear)) return linear;
  return linear <= kLinearFloor ? kDbFloor : 10.0 * std::log10(linear);
}

struct TrialRecord {
  std::string experiment;
  std::string solver;
  double lambda = 0.0;
  std::string arm;
  Index m = 0;
  Index n = 0;
  double snr_db = 0.0;
  double sigma_p = 0.0;
  long trial_index = 0;
  std::uint64_t seed = 0;
  double signal_level_linear = NAN;
  double signal_level_db = NAN;
  double detector_snr_db = NAN;
  double true_drift_energy = NAN;
  double approx_drift_energy = NAN;
  double error_energy = NAN;
  long matvec_count = 0;
  long inverse_count = 0;
  bool converged = false;
  std::string status = "ok";  // ok | singular | numerical | dimension | error

  // Ordering keys; not serialized.
  int solver_index = 0;
  int grid_index = 0;
  int arm_index = 0;

  bool ok() const { return status == "ok"; }

  /// Sets the linear level and the two dB columns derived from it.
  void set_signal_level(double linear) {
    signal_level_linear = linear;
    signal_level_db = to_db(linear);
    detector_snr_db = snr_db + signal_level_db;
  }
};

inline bool record_order(const TrialRecord& a, const TrialRecord& b) {
  return std::tie(a.experiment, a.solver_index, a.grid_index, a.trial_index, a.arm_index) <
         std::tie(b.experiment, b.solver_index, b.grid_index, b.trial_index, b.arm_index);
}

inline const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> header = {
      "experiment",        "solver",          "lambda",
      "arm",               "m",               "n",
      "snr_db",            "sigma_p",         "trial_index",
      "seed",              "signal_level_linear", "signal_level_db",
      "detector_snr_db",   "true_drift_energy",   "approx_drift_energy",
      "error_energy",      "matvec_count",    "inverse_count",
      "converged",         "status"};
  return header;
}

namespace detail {

inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string format_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream out;
  const auto& header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  using detail::fmt_real;
  for (const auto& r : records) {
    out << r.experiment << ',' << r.solver << ',' << fmt_real(r.lambda) << ',' << r.arm << ','
        << r.m << ',' << r.n << ',' << fmt_real(r.snr_db) << ',' << fmt_real(r.sigma_p) << ','
        << r.trial_index << ',' << r.seed << ',' << fmt_real(r.signal_level_linear) << ','
        << fmt_real(r.signal_level_db) << ',' << fmt_real(r.detector_snr_db) << ','
        << fmt_real(r.true_drift_energy) << ',' << fmt_real(r.approx_drift_energy) << ','
        << fmt_real(r.error_energy) << ',' << r.matvec_count << ',' << r.inverse_count << ','
        << (r.converged ? 1 : 0) << ',' << r.status << '\n';
  }
  return out.str();
}

inline void write_csv(const std::vector<TrialRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << format_csv(records);
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

inline std::vector<TrialRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("CSV is empty");
  const auto names = detail::split_csv_line(line);
  if (names != csv_header()) throw Error("CSV header does not match the trial record layout");
  std::vector<TrialRecord> out;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != names.size()) throw Error("CSV row " + std::to_string(row) + " has " +
                                              std::to_string(f.size()) + " fields");
    try {
      TrialRecord r;
      r.experiment = f[0];
      r.solver = f[1];
      r.lambda = std::stod(f[2]);
      r.arm = f[3];
      r.m = std::stol(f[4]);
      r.n = std::stol(f[5]);
      r.snr_db = std::stod(f[6]);
      r.sigma_p = std::stod(f[7]);
      r.trial_index = std::stol(f[8]);
      r.seed = std::stoull(f[9]);
      r.signal_level_linear = std::stod(f[10]);
      r.signal_level_db = std::stod(f[11]);
      r.detector_snr_db = std::stod(f[12]);
      r.true_drift_energy = std::stod(f[13]);
      r.approx_drift_energy = std::stod(f[14]);
      r.error_energy = std::stod(f[15]);
      r.matvec_count = std::stol(f[16]);
      r.inverse_count = std::stol(f[17]);
      r.converged = f[18] == "1";
      r.status = f[19];
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error("CSV row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<TrialRecord> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

}  // namespace rissense
