#pragma once

// Experiment configuration files.
//
// Line-oriented `key = value` text. `#` starts a comment, blank lines are
// ignored, list values are comma separated, and each `[solver]` header opens
// a solver block. Keys before the first block are experiment keys:
//
//   experiment    snr_sweep | perturb_sweep | correction | drift   (required)
//   m, n          positive integers                                (required)
//   snr_db_grid   list, default 0,5,...,30 for snr_sweep, else 20
//   sigma_p_grid  list, default 0 for snr_sweep,
//                 else 0,0.001,0.0025,0.005,0.01,0.025,0.05,0.1
//   trials        default 200
//   base_seed     default 1
//   output_path   default <experiment>.csv
//   threads       default 1
//
// Solver block keys:
//
//   method    lss | pinv | clipped_pinv | ridge | lasso_ista | pgd (required)
//   lambda    list; one solver per entry. ridge default 0.01,0.1,1;
//             lasso_ista default 0.1; rejected for the other methods
//   step      positive number or auto (default auto)
//   tol       default 1e-10
//   max_iter  default 100000
//   rank_tol  positive number or auto (default auto = max(m,n)*eps)

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rissense/solvers.hpp"
#include "rissense/types.hpp"

namespace rissense {

enum class ExperimentKind { snr_sweep, perturb_sweep, correction, drift };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::snr_sweep: return "snr_sweep";
    case ExperimentKind::perturb_sweep: return "perturb_sweep";
    case ExperimentKind::correction: return "correction";
    case ExperimentKind::drift: return "drift";
  }
  return "unknown";
}

inline std::optional<ExperimentKind> parse_experiment(std::string_view s) {
  for (auto k : {ExperimentKind::snr_sweep, ExperimentKind::perturb_sweep,
                 ExperimentKind::correction, ExperimentKind::drift})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  long line() const noexcept { return line_; }

  /// Same error, message prefixed with `context` (e.g. the file path).
  static ConfigError with_context(const std::string& context, const ConfigError& e) {
    ConfigError out(context + ": " + e.what());
    out.line_ = e.line_;
    return out;
  }

 private:
  long line_;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::snr_sweep;
  Index m = 0;
  Index n = 0;
  std::vector<double> snr_db_grid;
  std::vector<double> sigma_p_grid;
  std::vector<SolverSpec> solvers;
  long trials = 200;
  std::uint64_t base_seed = 1;
  std::string output_path;
  unsigned threads = 1;

  /// Grid the experiment sweeps: SNR for snr_sweep, sigma_p otherwise.
  const std::vector<double>& sweep_grid() const {
    return experiment == ExperimentKind::snr_sweep ? snr_db_grid : sigma_p_grid;
  }

  void validate() const {
    auto fail = [](const std::string& field, const std::string& what) {
      throw ConfigError(field + ": " + what);
    };
    if (m < 1) fail("m", "must be >= 1");
    if (n < 1) fail("n", "must be >= 1");
    if (snr_db_grid.empty()) fail("snr_db_grid", "must not be empty");
    for (double v : snr_db_grid)
      if (!std::isfinite(v)) fail("snr_db_grid", "entries must be finite");
    if (sigma_p_grid.empty()) fail("sigma_p_grid", "must not be empty");
    for (double v : sigma_p_grid)
      if (!(v >= 0.0) || !std::isfinite(v)) fail("sigma_p_grid", "entries must be finite and >= 0");
    if (trials < 1) fail("trials", "must be >= 1");
    if (trials >= (long{1} << 40)) fail("trials", "too large");
    if (threads < 1) fail("threads", "must be >= 1");
    if (solvers.empty()) fail("solvers", "at least one [solver] block is required");
    for (const auto& s : solvers) {
      try {
        s.validate();
      } catch (const ArgumentError& e) {
        fail("solver " + std::string(to_string(s.method)), e.what());
      }
      const bool correctable = s.method == SolverMethod::pinv || s.method == SolverMethod::ridge ||
                               s.method == SolverMethod::lss;
      if (experiment == ExperimentKind::correction && !correctable)
        fail("method", std::string(to_string(s.method)) +
                           " has no first-order correction (use lss, pinv or ridge)");
      if (experiment == ExperimentKind::drift && !correctable &&
          s.method != SolverMethod::lasso_ista)
        fail("method", std::string(to_string(s.method)) + " has no first-order drift formula");
    }
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view text, const std::string& key, long line) {
  const std::string s(trim(text));
  if (s.empty()) throw ConfigError(key + ": empty value", line);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw ConfigError(key + ": '" + s + "' is not a number", line);
  return v;
}

template <class Int>
Int parse_int(std::string_view text, const std::string& key, long line) {
  const std::string_view s = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(key + ": '" + std::string(s) + "' is not an integer", line);
  return v;
}

inline std::vector<double> parse_list(std::string_view text, const std::string& key, long line) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
    out.push_back(parse_double(item, key, line));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_auto(std::string_view text, const std::string& key, long line) {
  if (trim(text) == "auto") return std::nullopt;
  return parse_double(text, key, line);
}

struct SolverBlock {
  long line = 0;
  std::optional<SolverMethod> method;
  std::optional<std::vector<double>> lambdas;
  SolverSpec spec;
  std::map<std::string, long> seen;
};

}  // namespace detail

/// Parse and validate configuration text.
inline ExperimentConfig parse_config(const std::string& text) {
  using namespace detail;
  std::optional<ExperimentKind> experiment;
  std::optional<std::vector<double>> snr_grid;
  std::optional<std::vector<double>> sigma_grid;
  std::optional<std::string> output_path;
  ExperimentConfig cfg;
  std::map<std::string, long> seen_top;
  std::vector<SolverBlock> blocks;

  std::istringstream in(text);
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[solver]")
        throw ConfigError("unknown section '" + std::string(line) + "'", line_no);
      blocks.emplace_back();
      blocks.back().line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("expected 'key = value', got '" + std::string(line) + "'", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key before '='", line_no);

    if (blocks.empty()) {
      if (!seen_top.emplace(key, line_no).second)
        throw ConfigError("duplicate key '" + key + "'", line_no);
      if (key == "experiment") {
        experiment = parse_experiment(value);
        if (!experiment)
          throw ConfigError("experiment: unknown experiment '" + std::string(value) + "'", line_no);
      } else if (key == "m") {
        cfg.m = parse_int<Index>(value, key, line_no);
      } else if (key == "n") {
        cfg.n = parse_int<Index>(value, key, line_no);
      } else if (key == "snr_db_grid") {
        snr_grid = parse_list(value, key, line_no);
      } else if (key == "sigma_p_grid") {
        sigma_grid = parse_list(value, key, line_no);
      } else if (key == "trials") {
        cfg.trials = parse_int<long>(value, key, line_no);
      } else if (key == "base_seed") {
        cfg.base_seed = parse_int<std::uint64_t>(value, key, line_no);
      } else if (key == "output_path") {
        if (value.empty()) throw ConfigError("output_path: empty value", line_no);
        output_path = std::string(value);
      } else if (key == "threads") {
        cfg.threads = parse_int<unsigned>(value, key, line_no);
      } else {
        throw ConfigError("unknown key '" + key + "'", line_no);
      }
      continue;
    }

    SolverBlock& blk = blocks.back();
    if (!blk.seen.emplace(key, line_no).second)
      throw ConfigError("duplicate key '" + key + "' in [solver] block", line_no);
    if (key == "method") {
      blk.method = parse_method(value);
      if (!blk.method)
        throw ConfigError("method: unknown solver '" + std::string(value) + "'", line_no);
    } else if (key == "lambda") {
      blk.lambdas = parse_list(value, key, line_no);
    } else if (key == "step") {
      blk.spec.step = parse_auto(value, key, line_no);
    } else if (key == "tol") {
      blk.spec.tol = parse_double(value, key, line_no);
    } else if (key == "max_iter") {
      blk.spec.max_iter = parse_int<long>(value, key, line_no);
    } else if (key == "rank_tol") {
      blk.spec.rank_tol = parse_auto(value, key, line_no);
    } else {
      throw ConfigError("unknown key '" + key + "' in [solver] block", line_no);
    }
  }

  if (!experiment) throw ConfigError("experiment: required key missing");
  cfg.experiment = *experiment;
  if (!seen_top.count("m")) throw ConfigError("m: required key missing");
  if (!seen_top.count("n")) throw ConfigError("n: required key missing");

  const bool snr = cfg.experiment == ExperimentKind::snr_sweep;
  cfg.snr_db_grid = snr_grid.value_or(snr ? std::vector<double>{0, 5, 10, 15, 20, 25, 30}
                                          : std::vector<double>{20});
  cfg.sigma_p_grid =
      sigma_grid.value_or(snr ? std::vector<double>{0}
                              : std::vector<double>{0, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1});
  cfg.output_path = output_path.value_or(std::string(to_string(cfg.experiment)) + ".csv");

  for (const auto& blk : blocks) {
    if (!blk.method) throw ConfigError("method: required in [solver] block", blk.line);
    SolverSpec spec = blk.spec;
    spec.method = *blk.method;
    std::vector<double> lambdas;
    if (spec.method == SolverMethod::ridge) {
      lambdas = blk.lambdas.value_or(std::vector<double>{0.01, 0.1, 1.0});
    } else if (spec.method == SolverMethod::lasso_ista) {
      lambdas = blk.lambdas.value_or(std::vector<double>{0.1});
    } else {
      if (blk.lambdas)
        throw ConfigError("lambda: not used by method " + std::string(to_string(spec.method)),
                          blk.seen.at("lambda"));
      lambdas = {0.0};
    }
    for (double lambda : lambdas) {
      spec.lambda = lambda;
      cfg.solvers.push_back(spec);
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError::with_context(path, e);
  }
}

}  // namespace rissense
