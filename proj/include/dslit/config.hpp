#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dslit/experiment.hpp"
#include "dslit/geometry.hpp"

// Run configuration: one JSON document with a schema_version key and one
// section per command. Every field has a default, so an empty document
// reproduces the reference setup and both acquisition scenarios.

namespace dslit {

inline constexpr int kConfigSchemaVersion = 1;

// Invalid configuration; the message starts with the offending field path.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EngineConfig {
  std::size_t fresnel_quadrature_order = 64;
  std::size_t aperture_quadrature_order = 16;
  std::string slit_profile = "rect";  // rect | gaussian
};

struct ScanRange {
  double start = -0.12;
  double stop = 0.12;
  double step = 0.002;
};

struct PatternConfig {
  DetectorPlacement fixed_detector{-0.055, 1.5, 6e-3};
  double moving_distance = 1.21;
  double lens_diameter = 6e-3;
  ScanRange scan;
  // Explicit detector-1 offsets; replaces `scan` when present.
  std::optional<std::vector<double>> offsets;

  std::vector<double> scan_offsets() const;
};

struct DbbConfig {
  std::size_t n_pairs = 10000;
  DetectorPlacement detector1{-0.017, 1.21, 6e-3};
  DetectorPlacement detector2{-0.055, 1.5, 6e-3};
  double z_start = 1e-4;
  double step = 1e-3;
  double tolerance = 1e-15;
  double min_step = 1e-12;
  std::size_t max_steps = 100000;
  double node_floor = 1e-30;
  double v_max = 10.0;
  double sampling_extent = 120e-6;
  bool sampling_one_per_side = false;
  double sampling_cell = 0.25e-6;
  std::vector<double> equivariance_planes{0.5, 1.21};
  // Writes every pair's positions at each probe plane; large.
  bool dump_trajectories = false;
};

struct ScenarioConfig {
  std::string name;
  DetectorPlacement detector1;
  DetectorPlacement detector2;
  AcquisitionPlan plan;
  // Placeholder singles rates (Hz) that set the accidental background.
  double singles_rate_1 = 0.0;
  double singles_rate_2 = 0.0;
  // Expected background-subtracted counts over the whole plan at this
  // placement; fixes the calibration scale.
  double target_net = 0.0;
  std::optional<std::vector<double>> run_powers;
  double reference_power = 1.0;
  double power_exponent = 1.0;
};

struct ExperimentConfig {
  std::vector<ScenarioConfig> scenarios;
  // Opposite-semiplane configuration at which the scale is quoted.
  DetectorPlacement peak_detector1{0.0422546, 1.21, 6e-3};
  DetectorPlacement peak_detector2{-0.055, 1.5, 6e-3};
  // Seeds simulated per scenario for the significance spread.
  std::size_t seed_repeats = 50;
  // Also integrate a trajectory ensemble for each scenario.
  bool dbb_ensemble = false;

  static ExperimentConfig reference();
};

struct NamedConfiguration {
  std::string name;
  DetectorPlacement detector1;
  DetectorPlacement detector2;
};

struct CompareConfig {
  std::vector<NamedConfiguration> configurations;
  // Scenario whose calibration and plan convert rates into counts.
  std::string calibration_scenario = "A";

  static CompareConfig reference();
};

struct OutputConfig {
  std::string directory = "out";
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 2024;
  ExperimentGeometry geometry;
  EngineConfig engine;
  PatternConfig pattern;
  DbbConfig dbb;
  ExperimentConfig experiment = ExperimentConfig::reference();
  CompareConfig compare = CompareConfig::reference();
  OutputConfig output;

  // Throws ValidationError naming the field.
  void validate() const;
  const ScenarioConfig& scenario(const std::string& name) const;
};

// Parses a JSON document; missing keys keep their defaults, unknown keys and
// wrong types are validation errors. The result is validated.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Canonical JSON text of the full effective configuration.
std::string serialize_config(const RunConfig& config, int indent = 2);

}  // namespace dslit
