#pragma once

// Seeded Monte Carlo experiments.
//
// Every trial t draws its nominal channels and its perturbation direction
// from seeds derived from (base_seed, stream, t), so all solvers, grid points
// and arms of a trial see the same channel realization and the sigma_p sweep
// scales one perturbation. Trials are independent; each (solver, trial) unit
// writes into preassigned record slots, so the output does not depend on the
// number of worker threads.
//
// SNR is reported with unit transmit power, SNR_dB = -10 log10(sigma^2), and
// the detector SNR after nulling is snr_db + 10 log10(S).

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <tuple>
#include <string>
#include <thread>
#include <vector>

#include "rissense/channel_model.hpp"
#include "rissense/config.hpp"
#include "rissense/records.hpp"
#include "rissense/sensitivity.hpp"
#include "rissense/solvers.hpp"

namespace rissense {

inline constexpr std::uint64_t kChannelStream = 1;
inline constexpr std::uint64_t kPerturbationStream = 2;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Injective in (stream, trial) for a fixed base as long as trial < 2^48.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t trial) {
  return splitmix64(splitmix64(base) ^ ((stream << 48) | (trial & ((1ull << 48) - 1))));
}

inline double noise_variance_from_snr_db(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

inline std::vector<std::string> arm_names(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::snr_sweep: return {"perfect"};
    case ExperimentKind::perturb_sweep: return {"stale"};
    case ExperimentKind::correction: return {"stale", "corrected", "resolved"};
    case ExperimentKind::drift: return {"drift"};
  }
  return {};
}

namespace detail {

inline std::string status_of(const std::exception& e) {
  if (dynamic_cast<const SingularityError*>(&e)) return "singular";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  return "error";
}

inline void mark_failed(TrialRecord& r, const std::exception& e) {
  r.status = status_of(e);
  r.converged = false;
  r.signal_level_linear = r.signal_level_db = r.detector_snr_db = NAN;
}

// Records of one (solver, trial) unit, laid out grid-major then arm.
class UnitWriter {
 public:
  UnitWriter(const ExperimentConfig& cfg, std::vector<TrialRecord>& out, int solver_index,
             long trial)
      : cfg_(cfg), out_(out), solver_(solver_index), trial_(trial) {}

  TrialRecord& at(int grid_index, int arm_index) {
    const auto& grid = cfg_.sweep_grid();
    const std::size_t arms = arm_names(cfg_.experiment).size();
    const std::size_t slot =
        ((static_cast<std::size_t>(solver_) * grid.size() + grid_index) * cfg_.trials + trial_) *
            arms +
        arm_index;
    TrialRecord& r = out_[slot];
    const SolverSpec& spec = cfg_.solvers[solver_];
    r.experiment = std::string(to_string(cfg_.experiment));
    r.solver = std::string(to_string(spec.method));
    r.lambda = spec.lambda;
    r.arm = arm_names(cfg_.experiment)[arm_index];
    r.m = cfg_.m;
    r.n = cfg_.n;
    const bool snr = cfg_.experiment == ExperimentKind::snr_sweep;
    r.snr_db = snr ? grid[grid_index] : cfg_.snr_db_grid.front();
    r.sigma_p = snr ? 0.0 : grid[grid_index];
    r.trial_index = trial_;
    r.seed = derive_seed(cfg_.base_seed, kChannelStream, trial_);
    r.solver_index = solver_;
    r.grid_index = grid_index;
    r.arm_index = arm_index;
    return r;
  }

  int grid_size() const { return static_cast<int>(cfg_.sweep_grid().size()); }
  int arm_count() const { return static_cast<int>(arm_names(cfg_.experiment).size()); }

  // Flags every record of the unit when the shared nominal step fails.
  void fail_all(const std::exception& e) {
    for (int g = 0; g < grid_size(); ++g)
      for (int a = 0; a < arm_count(); ++a) mark_failed(at(g, a), e);
  }

 private:
  const ExperimentConfig& cfg_;
  std::vector<TrialRecord>& out_;
  int solver_;
  long trial_;
};

inline ChannelSet trial_channels(const ExperimentConfig& cfg, long trial) {
  return gen_channels(cfg.m, cfg.n, derive_seed(cfg.base_seed, kChannelStream, trial));
}

inline Perturbation trial_perturbation(const ExperimentConfig& cfg, double sigma_p, long trial) {
  return gen_perturbation(cfg.m, cfg.n, sigma_p,
                          derive_seed(cfg.base_seed, kPerturbationStream, trial));
}

inline void snr_unit(const ExperimentConfig& cfg, const SolverSpec& spec, UnitWriter& w,
                     long trial) {
  const ChannelSet ch = trial_channels(cfg, trial);
  for (int g = 0; g < w.grid_size(); ++g) {
    TrialRecord& r = w.at(g, 0);
    try {
      MatvecCounter counter;
      const SolveResult res = solve(spec, ch, &counter);
      r.set_signal_level(signal_level(ch, res.d));
      r.converged = res.converged;
      r.inverse_count = counter.inverse_count;
    } catch (const Error& e) {
      mark_failed(r, e);
    }
  }
}

inline void perturb_unit(const ExperimentConfig& cfg, const SolverSpec& spec, UnitWriter& w,
                         long trial) {
  const ChannelSet ch = trial_channels(cfg, trial);
  SolveResult nominal;
  MatvecCounter counter;
  try {
    nominal = solve(spec, ch, &counter);
  } catch (const Error& e) {
    w.fail_all(e);
    return;
  }
  for (int g = 0; g < w.grid_size(); ++g) {
    TrialRecord& r = w.at(g, 0);
    try {
      const ChannelSet truth = apply_perturbation(ch, trial_perturbation(cfg, r.sigma_p, trial));
      r.set_signal_level(signal_level(truth, nominal.d));
      r.converged = nominal.converged;
      r.inverse_count = counter.inverse_count;
    } catch (const Error& e) {
      mark_failed(r, e);
    }
  }
}

inline void correction_unit(const ExperimentConfig& cfg, const SolverSpec& spec, UnitWriter& w,
                            long trial) {
  const ChannelSet ch = trial_channels(cfg, trial);
  CorrectionCache cache;
  MatvecCounter nominal_cost;
  try {
    cache = prepare_correction(spec, ch, &nominal_cost);
  } catch (const Error& e) {
    w.fail_all(e);
    return;
  }
  for (int g = 0; g < w.grid_size(); ++g) {
    TrialRecord& stale = w.at(g, 0);
    TrialRecord& corrected = w.at(g, 1);
    TrialRecord& resolved = w.at(g, 2);
    Perturbation p;
    ChannelSet truth;
    try {
      p = trial_perturbation(cfg, stale.sigma_p, trial);
      truth = apply_perturbation(ch, p);
      stale.set_signal_level(signal_level(truth, cache.d));
      stale.converged = true;
      stale.inverse_count = nominal_cost.inverse_count;
    } catch (const Error& e) {
      mark_failed(stale, e);
      mark_failed(corrected, e);
      mark_failed(resolved, e);
      continue;
    }
    try {
      MatvecCounter cost;
      const CVector dd = correction_delta(cache, p, cost);
      const RisVector fixed = first_order_correct(cache.d, dd, RisMode::active);
      corrected.set_signal_level(signal_level(truth, fixed));
      corrected.converged = true;
      corrected.matvec_count = cost.matvec_count;
      corrected.inverse_count = cost.inverse_count;
    } catch (const Error& e) {
      mark_failed(corrected, e);
    }
    try {
      MatvecCounter cost;
      const SolveResult res = solve(spec, truth, &cost);
      resolved.set_signal_level(signal_level(truth, res.d));
      resolved.converged = res.converged;
      resolved.inverse_count = cost.inverse_count;
    } catch (const Error& e) {
      mark_failed(resolved, e);
    }
  }
}

inline void drift_unit(const ExperimentConfig& cfg, const SolverSpec& spec, UnitWriter& w,
                       long trial) {
  const ChannelSet ch = trial_channels(cfg, trial);
  SolveResult nominal;
  MatvecCounter counter;
  try {
    nominal = solve(spec, ch, &counter);
  } catch (const Error& e) {
    w.fail_all(e);
    return;
  }
  for (int g = 0; g < w.grid_size(); ++g) {
    TrialRecord& r = w.at(g, 0);
    try {
      const Perturbation p = trial_perturbation(cfg, r.sigma_p, trial);
      const ChannelSet truth = apply_perturbation(ch, p);
      const SolveResult resolved = solve(spec, truth);
      const CVector approx = approx_drift(spec, ch, p, nominal.d);
      const DriftReport rep =
          make_drift_report(spec.method, r.sigma_p, resolved.d.d - nominal.d.d, approx);
      r.true_drift_energy = rep.true_drift_energy;
      r.approx_drift_energy = rep.approx_drift_energy;
      r.error_energy = rep.error_energy;
      r.set_signal_level(signal_level(truth, nominal.d));
      r.converged = nominal.converged && resolved.converged;
      r.inverse_count = counter.inverse_count;
    } catch (const Error& e) {
      mark_failed(r, e);
    }
  }
}

}  // namespace detail

/// Runs cfg.experiment with `threads` workers (0: cfg.threads). Returns
/// |solvers| x |grid| x trials x arms records in sorted order; failed trials
/// are kept with a non-ok status.
inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg, unsigned threads = 0) {
  cfg.validate();
  const std::size_t arms = arm_names(cfg.experiment).size();
  const std::size_t units = cfg.solvers.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<TrialRecord> records(units * cfg.sweep_grid().size() * arms);

  using UnitFn = void (*)(const ExperimentConfig&, const SolverSpec&, detail::UnitWriter&, long);
  UnitFn unit_fn = nullptr;
  switch (cfg.experiment) {
    case ExperimentKind::snr_sweep: unit_fn = detail::snr_unit; break;
    case ExperimentKind::perturb_sweep: unit_fn = detail::perturb_unit; break;
    case ExperimentKind::correction: unit_fn = detail::correction_unit; break;
    case ExperimentKind::drift: unit_fn = detail::drift_unit; break;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t u = next++; u < units; u = next++) {
      const int solver = static_cast<int>(u / cfg.trials);
      const long trial = static_cast<long>(u % cfg.trials);
      try {
        detail::UnitWriter w(cfg, records, solver, trial);
        unit_fn(cfg, cfg.solvers[solver], w, trial);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads ? threads : cfg.threads,
                                                           static_cast<unsigned>(units)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  std::stable_sort(records.begin(), records.end(), record_order);
  return records;
}

inline std::vector<TrialRecord> run_snr_sweep(const ExperimentConfig& cfg, unsigned threads = 0) {
  if (cfg.experiment != ExperimentKind::snr_sweep) throw ConfigError("experiment: expected snr_sweep");
  return run_experiment(cfg, threads);
}

inline std::vector<TrialRecord> run_perturb_sweep(const ExperimentConfig& cfg,
                                                  unsigned threads = 0) {
  if (cfg.experiment != ExperimentKind::perturb_sweep)
    throw ConfigError("experiment: expected perturb_sweep");
  return run_experiment(cfg, threads);
}

inline std::vector<TrialRecord> run_correction_experiment(const ExperimentConfig& cfg,
                                                          unsigned threads = 0) {
  if (cfg.experiment != ExperimentKind::correction)
    throw ConfigError("experiment: expected correction");
  return run_experiment(cfg, threads);
}

inline std::vector<TrialRecord> run_drift_experiment(const ExperimentConfig& cfg,
                                                     unsigned threads = 0) {
  if (cfg.experiment != ExperimentKind::drift) throw ConfigError("experiment: expected drift");
  return run_experiment(cfg, threads);
}

/// True when some (solver, grid point, arm) cell failed in every trial.
inline bool any_cell_all_failed(const std::vector<TrialRecord>& records) {
  std::map<std::tuple<int, int, int>, bool> any_ok;
  for (const auto& r : records) {
    auto& ok = any_ok[{r.solver_index, r.grid_index, r.arm_index}];
    ok = ok || r.ok();
  }
  return std::any_of(any_ok.begin(), any_ok.end(), [](const auto& kv) { return !kv.second; });
}

/// Median of `field` over the ok records matching `pred`; NaN when none.
inline double median_of(const std::vector<TrialRecord>& records,
                        const std::function<bool(const TrialRecord&)>& pred,
                        double TrialRecord::*field) {
  std::vector<double> v;
  for (const auto& r : records)
    if (r.ok() && pred(r) && !std::isnan(r.*field)) v.push_back(r.*field);
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace rissense
