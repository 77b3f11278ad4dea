// rissense command line: Monte Carlo experiments and one-shot solves.
//
//   rissense snr-sweep     --config FILE [--out CSV] [--seed N] [--trials N] [--threads N] [--plot]
//   rissense perturb-sweep ...
//   rissense correct       ...
//   rissense drift         ...
//   rissense solve --m M --n N --seed S --method METHOD [--lambda L]
//
// Exit status: 0 success, 1 configuration or validation error, 2 when every
// trial of some (solver, grid point) cell failed numerically.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rissense/rissense.hpp"

namespace {

struct ExperimentArgs {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<long> trials;
  std::optional<unsigned> threads;
  bool plot = false;
};

void add_experiment_options(CLI::App* cmd, ExperimentArgs& args) {
  cmd->add_option("--config", args.config, "experiment config file")->required();
  cmd->add_option("--out", args.out, "output CSV (overrides output_path)");
  cmd->add_option("--seed", args.seed, "base seed (overrides base_seed)");
  cmd->add_option("--trials", args.trials, "trials per grid point (overrides trials)");
  cmd->add_option("--threads", args.threads, "worker threads (overrides threads)");
  cmd->add_flag("--plot", args.plot, "also write a matplotlib script next to the CSV");
}

int run_experiment_command(rissense::ExperimentKind kind, const ExperimentArgs& args) {
  using namespace rissense;
  ExperimentConfig cfg;
  try {
    cfg = load_config(args.config);
    if (cfg.experiment != kind)
      throw ConfigError("experiment: config is '" + std::string(to_string(cfg.experiment)) +
                        "' but the command runs '" + std::string(to_string(kind)) + "'");
    if (args.out) cfg.output_path = *args.out;
    if (args.seed) cfg.base_seed = *args.seed;
    if (args.trials) cfg.trials = *args.trials;
    if (args.threads) cfg.threads = *args.threads;
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "rissense: " << e.what() << '\n';
    return 1;
  }

  const auto records = run_experiment(cfg);
  write_csv(records, cfg.output_path);
  std::cout << "wrote " << records.size() << " records to " << cfg.output_path << '\n';
  if (args.plot) {
    const std::filesystem::path script =
        std::filesystem::path(cfg.output_path).replace_extension(".py");
    std::ofstream out(script);
    if (!out) throw Error("cannot open '" + script.string() + "' for writing");
    out << emit_plot_script(cfg.output_path, kind);
    std::cout << "wrote plot script " << script.string() << '\n';
  }
  if (any_cell_all_failed(records)) {
    std::cerr << "rissense: every trial of at least one cell failed\n";
    return 2;
  }
  return 0;
}

nlohmann::json complex_array(const rissense::CVector& v) {
  auto arr = nlohmann::json::array();
  for (rissense::Index i = 0; i < v.size(); ++i) arr.push_back({v[i].real(), v[i].imag()});
  return arr;
}

struct SolveArgs {
  long m = 1;
  long n = 8;
  std::uint64_t seed = 1;
  std::string method = "pinv";
  std::optional<double> lambda;
};

int run_solve_command(const SolveArgs& args) {
  using namespace rissense;
  SolverSpec spec;
  try {
    const auto method = parse_method(args.method);
    if (!method) throw ConfigError("method: unknown solver '" + args.method + "'");
    spec.method = *method;
    if (args.lambda)
      spec.lambda = *args.lambda;
    else if (spec.method == SolverMethod::ridge || spec.method == SolverMethod::lasso_ista)
      spec.lambda = 0.1;
    spec.validate();
  } catch (const Error& e) {
    std::cerr << "rissense: " << e.what() << '\n';
    return 1;
  }

  ChannelSet ch;
  try {
    ch = gen_channels(args.m, args.n, args.seed);
  } catch (const Error& e) {
    std::cerr << "rissense: " << e.what() << '\n';
    return 1;
  }
  nlohmann::json out;
  out["m"] = args.m;
  out["n"] = args.n;
  out["seed"] = args.seed;
  out["method"] = args.method;
  out["lambda"] = spec.lambda;
  try {
    const SolveResult res = solve(spec, ch);
    const double s = signal_level(ch, res.d);
    out["status"] = "ok";
    out["d"] = complex_array(res.d.d);
    out["objective"] = res.objective;
    out["iterations"] = res.iterations;
    out["converged"] = res.converged;
    out["signal_level_linear"] = s;
    out["signal_level_db"] = to_db(s);
    out["baseline_db"] = to_db(ch.b.squaredNorm());
    std::cout << out.dump(2) << '\n';
    return 0;
  } catch (const Error& e) {
    out["status"] = "error";
    out["message"] = e.what();
    std::cout << out.dump(2) << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS nulling solvers, CSI sensitivity and Monte Carlo experiments"};
  app.require_subcommand(1);

  ExperimentArgs exp_args;
  struct Sub {
    const char* name;
    const char* help;
    rissense::ExperimentKind kind;
  };
  const Sub subs[] = {
      {"snr-sweep", "signal level vs SNR with perfect CSI", rissense::ExperimentKind::snr_sweep},
      {"perturb-sweep", "stale-solution signal level vs sigma_p",
       rissense::ExperimentKind::perturb_sweep},
      {"correct", "stale / first-order corrected / re-solved arms",
       rissense::ExperimentKind::correction},
      {"drift", "true vs first-order drift energies", rissense::ExperimentKind::drift},
  };
  std::vector<std::pair<CLI::App*, rissense::ExperimentKind>> experiment_cmds;
  for (const auto& sub : subs) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    add_experiment_options(cmd, exp_args);
    experiment_cmds.emplace_back(cmd, sub.kind);
  }

  SolveArgs solve_args;
  CLI::App* solve_cmd = app.add_subcommand("solve", "solve one seeded instance and print JSON");
  solve_cmd->add_option("--m", solve_args.m, "receive antennas")->required();
  solve_cmd->add_option("--n", solve_args.n, "RIS elements")->required();
  solve_cmd->add_option("--seed", solve_args.seed, "channel seed");
  solve_cmd->add_option("--method", solve_args.method,
                        "lss | pinv | clipped_pinv | ridge | lasso_ista | pgd");
  solve_cmd->add_option("--lambda", solve_args.lambda, "regularization weight");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve_cmd->parsed()) return run_solve_command(solve_args);
    for (const auto& [cmd, kind] : experiment_cmds)
      if (cmd->parsed()) return run_experiment_command(kind, exp_args);
  } catch (const std::exception& e) {
    std::cerr << "rissense: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
