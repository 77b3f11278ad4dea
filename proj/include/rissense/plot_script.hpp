#pragma once

// Matplotlib scripts that turn an experiment CSV into its figure. Curves are
// medians over trials per (solver, lambda[, arm]) and grid point.

#include <string>
#include <string_view>

#include "rissense/config.hpp"

namespace rissense {

namespace detail {

struct PlotAxes {
  std::string_view x;       // CSV column on the x axis
  std::string_view x_label;
  bool log_x;
  std::string_view y_columns;  // python list literal of CSV columns
  std::string_view y_label;
  bool log_y;
  bool by_arm;
  std::string_view title;
};

inline PlotAxes plot_axes(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::snr_sweep:
      return {"snr_db", "SNR (dB)", false, "[\"signal_level_db\"]", "Rx. signal level (dB)",
              false, false, "Rx. Signal level vs. SNR"};
    case ExperimentKind::perturb_sweep:
      return {"sigma_p", "sigma_p", true, "[\"signal_level_db\"]", "Rx. signal level (dB)", false,
              false, "Rx. Signal level vs. sigma_p"};
    case ExperimentKind::correction:
      return {"sigma_p", "sigma_p", true, "[\"signal_level_db\"]", "Rx. signal level (dB)", false,
              true, "Rx. Signal level vs. sigma_p with first-order correction"};
    case ExperimentKind::drift:
      return {"sigma_p", "sigma_p", true,
              "[\"true_drift_energy\", \"approx_drift_energy\", \"error_energy\"]",
              "Drift energy", true, false, "Drift energy vs. sigma_p"};
  }
  throw ConfigError("unknown experiment tag");
}

}  // namespace detail

/// Self-contained Python script plotting `csv_path`; writes a PNG next to it.
inline std::string emit_plot_script(const std::string& csv_path, ExperimentKind kind) {
  const detail::PlotAxes ax = detail::plot_axes(kind);
  std::string s;
  s += "#!/usr/bin/env python3\n";
  s += "# Generated by rissense: " + std::string(ax.title) + "\n";
  s += "import sys\n\n";
  s += "import matplotlib\n";
  s += "matplotlib.use(\"Agg\")\n";
  s += "import matplotlib.pyplot as plt\n";
  s += "import pandas as pd\n\n";
  s += "CSV = sys.argv[1] if len(sys.argv) > 1 else \"" + csv_path + "\"\n";
  s += "X = \"" + std::string(ax.x) + "\"\n";
  s += "Y_COLUMNS = " + std::string(ax.y_columns) + "\n";
  s += "GROUP = [\"solver\", \"lambda\"" + std::string(ax.by_arm ? ", \"arm\"" : "") + "]\n\n";
  s += "df = pd.read_csv(CSV)\n";
  s += "df = df[df[\"status\"] == \"ok\"]\n";
  s += "fig, axis = plt.subplots(figsize=(7, 4.5))\n";
  s += "for key, part in df.groupby(GROUP):\n";
  s += "    label = \" \".join(str(k) for k in (key if isinstance(key, tuple) else (key,)))\n";
  s += "    med = part.groupby(X)[Y_COLUMNS].median().sort_index()\n";
  s += "    for col in Y_COLUMNS:\n";
  s += "        y = med[col]\n";
  s += "        name = label if len(Y_COLUMNS) == 1 else label + \" \" + col\n";
  s += "        axis.plot(med.index, y, marker=\"o\", label=name)\n";
  if (ax.log_x) s += "axis.set_xscale(\"symlog\", linthresh=1e-3)\n";
  if (ax.log_y) s += "axis.set_yscale(\"log\")\n";
  s += "axis.set_xlabel(\"" + std::string(ax.x_label) + "\")\n";
  s += "axis.set_ylabel(\"" + std::string(ax.y_label) + "\")\n";
  s += "axis.set_title(\"" + std::string(ax.title) + "\")\n";
  s += "axis.grid(True, which=\"both\", alpha=0.3)\n";
  s += "axis.legend(fontsize=\"small\")\n";
  s += "fig.tight_layout()\n";
  s += "out = CSV.rsplit(\".\", 1)[0] + \".png\"\n";
  s += "fig.savefig(out, dpi=150)\n";
  s += "print(out)\n";
  return s;
}

inline std::string emit_plot_script(const std::string& csv_path, std::string_view experiment) {
  const auto kind = parse_experiment(experiment);
  if (!kind) throw ConfigError("unknown experiment tag '" + std::string(experiment) + "'");
  return emit_plot_script(csv_path, *kind);
}

}  // namespace rissense
