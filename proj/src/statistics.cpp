#include "dslit/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dslit {

namespace {

void check_count(double c, const char* what) {
  if (!(c >= 0) || !std::isfinite(c)) throw std::invalid_argument(std::string(what) + " must be a finite count >= 0");
}

// Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
double kolmogorov_tail(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

NetCounts subtract_background(double raw, double background, double duration_ratio) {
  check_count(raw, "raw");
  check_count(background, "background");
  if (!(duration_ratio > 0) || !std::isfinite(duration_ratio))
    throw std::invalid_argument("duration ratio must be finite and positive");
  return {raw - background * duration_ratio, std::sqrt(raw + background * duration_ratio * duration_ratio)};
}

double significance(double net, double sigma) {
  if (!(sigma > 0)) throw std::domain_error("significance: sigma must be positive");
  return net / sigma;
}

CountRecord make_record(double raw, double background, double raw_duration, double background_duration,
                        double weight) {
  if (!(raw_duration > 0) || !(background_duration > 0) || !std::isfinite(raw_duration) ||
      !std::isfinite(background_duration))
    throw std::invalid_argument("durations must be finite and positive");
  if (!(weight > 0) || !std::isfinite(weight)) throw std::invalid_argument("weight must be finite and positive");
  CountRecord r;
  r.raw_coincidences = raw;
  r.background_coincidences = background;
  r.raw_duration = raw_duration;
  r.background_duration = background_duration;
  r.weight = weight;
  const auto [net, sigma] = subtract_background(raw, background, raw_duration / background_duration);
  r.net = weight * net;
  r.net_sigma = weight * sigma;
  r.significance = r.net_sigma > 0 ? significance(r.net, r.net_sigma) : 0.0;
  return r;
}

void RunSeries::validate() const {
  if (runs.empty()) throw std::invalid_argument("run series is empty");
  if (!powers) return;
  if (powers->size() != runs.size()) throw std::invalid_argument("run series: one power per run required");
  for (double p : *powers)
    if (!(p > 0) || !std::isfinite(p)) throw std::invalid_argument("run series: powers must be finite and positive");
}

CountRecord aggregate_runs(const RunSeries& series) {
  series.validate();
  const double ratio = series.runs.front().duration_ratio();
  double raw = 0, bg = 0, t_raw = 0, t_bg = 0, net = 0, var = 0;
  bool weighted = false;
  for (const auto& r : series.runs) {
    if (std::abs(r.duration_ratio() - ratio) > 1e-12 * ratio)
      throw AggregationError("aggregate_runs: runs have different raw/background duration ratios");
    const double w = r.weight;
    weighted = weighted || w != 1.0;
    raw += w * r.raw_coincidences;
    bg += w * r.background_coincidences;
    t_raw += r.raw_duration;
    t_bg += r.background_duration;
    net += w * (r.raw_coincidences - r.background_coincidences * ratio);
    var += w * w * (r.raw_coincidences + r.background_coincidences * ratio * ratio);
  }
  CountRecord out = make_record(raw, bg, t_raw, t_bg);
  if (weighted) {
    out.net = net;
    out.net_sigma = std::sqrt(var);
    out.significance = out.net_sigma > 0 ? significance(out.net, out.net_sigma) : 0.0;
  }
  return out;
}

CountRecord per_duration(const CountRecord& record, double duration) {
  if (!(duration > 0)) throw std::invalid_argument("per_duration: duration must be positive");
  const double f = duration / record.raw_duration;
  CountRecord r = record;
  r.raw_coincidences *= f;
  r.background_coincidences *= f;
  r.raw_duration *= f;
  r.background_duration *= f;
  r.net *= f;
  r.net_sigma *= f;
  return r;
}

RunSeries power_correct(const RunSeries& series, double reference_power, double exponent) {
  if (!series.powers) throw CorrectionError("power_correct: run powers are missing");
  series.validate();
  if (!(reference_power > 0) || !std::isfinite(reference_power))
    throw std::invalid_argument("power_correct: reference power must be finite and positive");
  RunSeries out = series;
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const auto& r = out.runs[i];
    const double f = std::pow(reference_power / (*series.powers)[i], exponent);
    out.runs[i] = make_record(r.raw_coincidences, r.background_coincidences, r.raw_duration, r.background_duration,
                              r.weight * f);
  }
  return out;
}

KsResult ks_test_standard_normal(std::vector<double> sample) {
  if (sample.empty()) throw std::invalid_argument("ks_test_standard_normal: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-sample[i] / std::sqrt(2.0));
    d = std::max({d, (i + 1) / n - cdf, cdf - i / n});
  }
  // Stephens' small-sample adjustment of the asymptotic distribution.
  const double sn = std::sqrt(n);
  return {d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)};
}

}  // namespace dslit
