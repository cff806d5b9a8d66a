#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

// Counting statistics for background-subtracted coincidence measurements.
// Raw and background counts are taken as independent Poisson variables.

namespace dslit {

struct AggregationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorrectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NetCounts {
  double net = 0.0;
  double sigma = 0.0;
};

// net = raw - bg * ratio, sigma = sqrt(raw + bg * ratio^2), where ratio is
// raw_duration / background_duration. Throws std::invalid_argument on
// negative counts or a non-positive ratio.
NetCounts subtract_background(double raw, double background, double duration_ratio);

// net / sigma. Throws std::domain_error for sigma <= 0.
double significance(double net, double sigma);

// One acquisition (or the sum of several). Counts are real so that
// power-corrected records stay representable; simulated counts are integers.
// `weight` multiplies the signal estimate and its uncertainty and is 1 unless
// a power correction was applied.
struct CountRecord {
  double raw_coincidences = 0.0;
  double background_coincidences = 0.0;
  double raw_duration = 0.0;
  double background_duration = 0.0;
  double weight = 1.0;
  double net = 0.0;
  double net_sigma = 0.0;
  double significance = 0.0;  // 0 when net_sigma is 0

  double duration_ratio() const { return raw_duration / background_duration; }
};

// Fills net, net_sigma and significance from the counts, durations and
// weight. Throws std::invalid_argument when an invariant cannot hold.
CountRecord make_record(double raw, double background, double raw_duration, double background_duration,
                        double weight = 1.0);

struct RunSeries {
  std::vector<CountRecord> runs;
  // Laser power during each run, relative units.
  std::optional<std::vector<double>> powers;

  // Throws std::invalid_argument if empty or if powers are given but do not
  // match the runs or are not finite and positive.
  void validate() const;
};

// Sums counts and durations over the runs and subtracts the background of the
// total. Weighted (power-corrected) runs contribute weight * (raw - bg ratio)
// to the net and weight^2 * (raw + bg ratio^2) to its variance; the returned
// record then carries the weighted sums with weight 1 and the propagated
// sigma. Throws AggregationError when runs differ in their raw/background
// duration ratio.
CountRecord aggregate_runs(const RunSeries& series);

// The record rescaled to a different acquisition time: counts, net and sigma
// scale by duration / raw_duration, significance is unchanged.
CountRecord per_duration(const CountRecord& record, double duration);

// Multiplies each run's weight by (reference_power / power)^exponent; the
// default exponent 1 takes the pair rate linear in pump power. Throws
// CorrectionError when powers are missing and std::invalid_argument for a
// non-positive reference.
RunSeries power_correct(const RunSeries& series, double reference_power, double exponent = 1.0);

// Kolmogorov-Smirnov distance of a sample to the standard normal and its
// asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};
KsResult ks_test_standard_normal(std::vector<double> sample);

}  // namespace dslit
