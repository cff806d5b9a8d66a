#include "dslit/experiment.hpp"

#include <cmath>
#include <locale>
#include <ostream>
#include <random>

#include "json.hpp"

namespace dslit {

namespace {

constexpr double kHalfHour = 1800.0;

std::mt19937_64 run_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x636f756eu};
  return std::mt19937_64(seq);
}

double poisson(std::mt19937_64& rng, double mean) {
  if (mean <= 0) return 0.0;
  return static_cast<double>(std::poisson_distribution<std::uint64_t>(mean)(rng));
}

void check_rate(double r, const char* what) {
  if (!(r >= 0) || !std::isfinite(r)) throw std::invalid_argument(std::string(what) + " must be finite and >= 0");
}

}  // namespace

void AcquisitionPlan::validate() const {
  if (n_runs < 1) throw std::invalid_argument("plan.n_runs must be at least 1");
  if (!(run_duration > 0) || !std::isfinite(run_duration))
    throw std::invalid_argument("plan.run_duration must be positive");
  if (!(coincidence_window > 0)) throw std::invalid_argument("plan.coincidence_window must be positive");
  if (!(background_delay > coincidence_window))
    throw std::invalid_argument("plan.background_delay must exceed the coincidence window");
  if (!(background_duration_ratio > 0) || !std::isfinite(background_duration_ratio))
    throw std::invalid_argument("plan.background_duration_ratio must be positive");
}

double accidental_rate(double singles1, double singles2, double window) {
  check_rate(singles1, "singles rate 1");
  check_rate(singles2, "singles rate 2");
  check_rate(window, "coincidence window");
  return singles1 * singles2 * window;
}

void CalibrationScale::validate() const {
  if (!(counts_per_unit_rate_per_30min > 0) || !std::isfinite(counts_per_unit_rate_per_30min))
    throw CalibrationError("calibration scale must be finite and positive");
}

double CalibrationScale::expected_counts(double rate, double duration) const {
  return counts_per_unit_rate_per_30min * rate * duration / kHalfHour;
}

CalibrationScale calibrate(double peak_rate, double target_counts, const AcquisitionPlan& plan) {
  plan.validate();
  if (!(peak_rate > 0) || !std::isfinite(peak_rate)) throw CalibrationError("calibrate: peak rate must be positive");
  if (!(target_counts > 0) || !std::isfinite(target_counts))
    throw CalibrationError("calibrate: target counts must be positive");
  CalibrationScale s{target_counts / peak_rate * kHalfHour / plan.run_duration};
  s.validate();
  return s;
}

RunSeries simulate_runs(double true_rate, double accidental, const AcquisitionPlan& plan, std::uint64_t seed) {
  plan.validate();
  check_rate(true_rate, "true rate");
  check_rate(accidental, "accidental rate");
  RunSeries series;
  series.runs.reserve(plan.n_runs);
  const double t = plan.run_duration;
  const double t_bg = plan.background_run_duration();
  for (std::size_t r = 0; r < plan.n_runs; ++r) {
    auto rng = run_stream(seed, r);
    const double raw = poisson(rng, (true_rate + accidental) * t);
    const double bg = poisson(rng, accidental * t_bg);
    series.runs.push_back(make_record(raw, bg, t, t_bg));
  }
  return series;
}

CountRecord simulate_counts(double true_rate, double accidental, const AcquisitionPlan& plan, std::uint64_t seed) {
  return aggregate_runs(simulate_runs(true_rate, accidental, plan, seed));
}

std::vector<CountRecord> simulate_batch(double true_rate, double accidental, const AcquisitionPlan& plan,
                                        const std::vector<std::uint64_t>& seeds) {
  plan.validate();
  std::vector<CountRecord> out(seeds.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < seeds.size(); ++i) out[i] = simulate_counts(true_rate, accidental, plan, seeds[i]);
  return out;
}

void write_record_jsonl(std::ostream& out, const CountRecord& r, const std::string& label, std::size_t index) {
  const nlohmann::ordered_json j = {{"label", label},
                                    {"index", index},
                                    {"raw_coincidences", r.raw_coincidences},
                                    {"background_coincidences", r.background_coincidences},
                                    {"raw_duration", r.raw_duration},
                                    {"background_duration", r.background_duration},
                                    {"weight", r.weight},
                                    {"net", r.net},
                                    {"net_sigma", r.net_sigma},
                                    {"significance", r.significance}};
  out << j.dump() << '\n';
}

CountRecord read_record_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  return make_record(j.at("raw_coincidences").get<double>(), j.at("background_coincidences").get<double>(),
                     j.at("raw_duration").get<double>(), j.at("background_duration").get<double>(),
                     j.value("weight", 1.0));
}

void write_records_csv(std::ostream& out, const std::vector<std::pair<std::string, CountRecord>>& rows,
                       const std::vector<std::string>& metadata) {
  const auto old = out.imbue(std::locale::classic());
  const auto precision = out.precision(12);
  for (const auto& m : metadata) out << "# " << m << '\n';
  out << "label,raw_coincidences,background_coincidences,raw_duration_s,background_duration_s,weight,net,net_sigma,"
         "significance\n";
  for (const auto& [label, r] : rows)
    out << label << ',' << r.raw_coincidences << ',' << r.background_coincidences << ',' << r.raw_duration << ','
        << r.background_duration << ',' << r.weight << ',' << r.net << ',' << r.net_sigma << ',' << r.significance
        << '\n';
  out.precision(precision);
  out.imbue(old);
}

}  // namespace dslit
