#pragma once

#include <string>
#include <vector>

#include "dslit/bohmian.hpp"
#include "dslit/config.hpp"
#include "json.hpp"

// The four data products of the command-line tool. Each command writes its
// files into config.output.directory (created if needed) and returns a JSON
// summary that embeds the effective configuration and tool version.

namespace dslit {

std::string tool_version();

// Metadata lines for CSV headers (without the leading "# ").
std::vector<std::string> metadata_lines(const RunConfig& config);
// {"tool_version": ..., "config": {...}}
nlohmann::ordered_json metadata_json(const RunConfig& config);

TwoPhotonState make_state(const RunConfig& config);
EnsembleOptions make_ensemble_options(const RunConfig& config);
nlohmann::ordered_json to_json(const EnsembleReport& report);

// pattern.csv and pattern_summary.json.
nlohmann::ordered_json cmd_pattern(const RunConfig& config);
// dbb_report.json, and dbb_trajectories.csv when dbb.dump_trajectories is set.
nlohmann::ordered_json cmd_dbb(const RunConfig& config);
// experiment_runs.jsonl, experiment_summary.csv and experiment_summary.json.
nlohmann::ordered_json cmd_experiment(const RunConfig& config);
// compare.csv and compare.json.
nlohmann::ordered_json cmd_compare(const RunConfig& config);

// Predictions for one acquisition scenario under its own calibration.
struct ScenarioPrediction {
  double sqm_rate = 0.0;   // aperture-averaged relative rate
  double peak_rate = 0.0;  // same at the peak configuration
  CalibrationScale scale;
  double peak_counts_per_run = 0.0;
  double true_rate_hz = 0.0;
  double accidental_rate_hz = 0.0;
  double expected_net = 0.0;         // whole plan
  double expected_background = 0.0;  // whole plan, delayed window
  double expected_sigma = 0.0;
  double dbb_expected_net = 0.0;     // semiplane rule: 0 for same-semiplane placements
};

ScenarioPrediction predict_scenario(const RunConfig& config, const ScenarioConfig& scenario);

// Simulates the scenario's plan once for `seed`, applying the power
// correction when run powers are configured.
CountRecord simulate_scenario(const ScenarioPrediction& prediction, const ScenarioConfig& scenario,
                              std::uint64_t seed, RunSeries* runs_out = nullptr);

}  // namespace dslit
