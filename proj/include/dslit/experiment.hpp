#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dslit/statistics.hpp"

// Counting-experiment model: accidental background from singles rates,
// Poisson acquisition of raw and delayed-window counts, and the single scale
// that turns relative coincidence rates into expected counts.

namespace dslit {

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AcquisitionPlan {
  std::size_t n_runs = 35;
  double run_duration = 1800.0;  // s
  double coincidence_window = 2.6e-9;
  double background_delay = 16e-9;
  // Delayed-window acquisition time relative to the undelayed one.
  double background_duration_ratio = 1.0;

  void validate() const;
  double total_time() const { return static_cast<double>(n_runs) * run_duration; }
  double background_run_duration() const { return run_duration * background_duration_ratio; }
};

// singles1 * singles2 * window. Throws std::invalid_argument on negative or
// non-finite input.
double accidental_rate(double singles1, double singles2, double window);

// Expected net counts per 30 minutes for a unit relative rate.
struct CalibrationScale {
  double counts_per_unit_rate_per_30min = 0.0;

  void validate() const;
  // Expected signal counts accumulated over `duration` seconds at `rate`.
  double expected_counts(double rate, double duration) const;
};

// Scale such that `peak_rate` yields `target_counts` expected net counts per
// run of the plan. Throws CalibrationError for a non-positive peak rate or
// target.
CalibrationScale calibrate(double peak_rate, double target_counts, const AcquisitionPlan& plan);

// One record per run; run r draws from a stream derived from (seed, r).
RunSeries simulate_runs(double true_rate, double accidental, const AcquisitionPlan& plan, std::uint64_t seed);

// Whole plan: raw ~ Poisson((true_rate + accidental) T) and background ~
// Poisson(accidental T_bg), accumulated run by run and aggregated.
CountRecord simulate_counts(double true_rate, double accidental, const AcquisitionPlan& plan, std::uint64_t seed);

// simulate_counts for each seed; element i depends only on seeds[i].
std::vector<CountRecord> simulate_batch(double true_rate, double accidental, const AcquisitionPlan& plan,
                                        const std::vector<std::uint64_t>& seeds);

// One JSON object per line: the record plus the given label and index.
void write_record_jsonl(std::ostream& out, const CountRecord& record, const std::string& label,
                        std::size_t index);
CountRecord read_record_json(const std::string& line);

// Summary table: header plus one row per labelled record.
void write_records_csv(std::ostream& out, const std::vector<std::pair<std::string, CountRecord>>& rows,
                       const std::vector<std::string>& metadata = {});

}  // namespace dslit
