#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "doctest.h"
#include "dslit/experiment.hpp"
#include "dslit/sqm_pattern.hpp"
#include "dslit/statistics.hpp"

using namespace dslit;

namespace {

std::vector<std::uint64_t> seeds(std::size_t n, std::uint64_t base = 1000) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), base);
  return s;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

std::vector<double> significances(const std::vector<CountRecord>& records) {
  std::vector<double> s;
  for (const auto& r : records) s.push_back(r.significance);
  return s;
}

}  // namespace

TEST_SUITE("virtual_experiment") {

TEST_CASE("accidental rate") {
  CHECK(accidental_rate(1e4, 1e4, 2.6e-9) == doctest::Approx(0.26).epsilon(1e-14));
  CHECK(accidental_rate(1e4, 1e4, 0.0) == 0.0);
  CHECK(accidental_rate(2e4, 1e4, 2.6e-9) == 2 * accidental_rate(1e4, 1e4, 2.6e-9));
  CHECK(accidental_rate(1e4, 2e4, 2.6e-9) == 2 * accidental_rate(1e4, 1e4, 2.6e-9));
  CHECK_THROWS_AS(accidental_rate(-1, 1, 1e-9), std::invalid_argument);
}

TEST_CASE("plan") {
  AcquisitionPlan p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.total_time() == 35 * 1800);
  p.background_delay = 1e-9;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.n_runs = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("Poisson mean and variance at lambda = 100") {
  AcquisitionPlan one{1, 1800};
  std::vector<double> counts;
  for (std::uint64_t s = 0; s < 1000; ++s) counts.push_back(simulate_runs(100.0 / 1800, 0.0, one, s).runs[0].raw_coincidences);
  const double m = mean_of(counts), v = variance_of(counts);
  CAPTURE(m);
  CAPTURE(v);
  CHECK(std::abs(m - 100) < 1);
  CHECK(std::abs(v - 100) < 5);
}

TEST_CASE("null signal") {
  AcquisitionPlan plan;
  const double acc = 100.0 / plan.total_time();
  const auto records = simulate_batch(0.0, acc, plan, seeds(200));
  const auto sig = significances(records);
  double mean_abs = 0;
  for (double s : sig) mean_abs += std::abs(s);
  mean_abs /= sig.size();
  CHECK(mean_abs < 3);
  CHECK(ks_test_standard_normal(sig).p_value > 0.01);
}

TEST_CASE("background subtraction is unbiased") {
  AcquisitionPlan plan;
  const double truth = 78.0, bg = 11.0;
  const auto records = simulate_batch(truth / plan.total_time(), bg / plan.total_time(), plan, seeds(200, 7));
  std::vector<double> net;
  for (const auto& r : records) net.push_back(r.net);
  const double t = (mean_of(net) - truth) / std::sqrt(variance_of(net) / net.size());
  const boost::math::students_t dist(net.size() - 1);
  const double p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  CAPTURE(t);
  CHECK(p > 0.01);
}

TEST_CASE("reference scenarios") {
  SUBCASE("35 x 30 min, net 78, sigma 10") {
    AcquisitionPlan plan;
    const double T = plan.total_time();
    // raw + background = 100 gives sigma 10.
    const auto records = simulate_batch(78 / T, 11 / T, plan, seeds(200, 50));
    const auto sig = significances(records);
    const double inside = std::count_if(sig.begin(), sig.end(), [](double s) { return std::abs(s - 7.8) <= 1.5; });
    CHECK(mean_of(sig) == doctest::Approx(7.8).epsilon(0.04));
    CHECK(inside / sig.size() > 0.9);
  }
  SUBCASE("17 x 1 h, net 41, sigma 14") {
    AcquisitionPlan plan{17, 3600};
    const double T = plan.total_time();
    const auto records = simulate_batch(41 / T, 77.5 / T, plan, seeds(200, 90));
    CHECK(mean_of(significances(records)) == doctest::Approx(2.9).epsilon(0.1));
  }
}

TEST_CASE("determinism and batch order independence") {
  AcquisitionPlan plan;
  const auto a = simulate_counts(1e-3, 2e-4, plan, 3);
  const auto b = simulate_counts(1e-3, 2e-4, plan, 3);
  const auto c = simulate_counts(1e-3, 2e-4, plan, 4);
  CHECK(a.raw_coincidences == b.raw_coincidences);
  CHECK(a.background_coincidences == b.background_coincidences);
  CHECK((a.raw_coincidences != c.raw_coincidences || a.background_coincidences != c.background_coincidences));
  auto s = seeds(40);
  const auto forward = simulate_batch(1e-3, 2e-4, plan, s);
  std::reverse(s.begin(), s.end());
#ifdef _OPENMP
  const int before = omp_get_max_threads();
  omp_set_num_threads(3);
#endif
  auto backward = simulate_batch(1e-3, 2e-4, plan, s);
#ifdef _OPENMP
  omp_set_num_threads(before);
#endif
  std::reverse(backward.begin(), backward.end());
  for (std::size_t i = 0; i < forward.size(); ++i) {
    CHECK(forward[i].raw_coincidences == backward[i].raw_coincidences);
    CHECK(forward[i].background_coincidences == backward[i].background_coincidences);
  }
}

TEST_CASE("calibration") {
  AcquisitionPlan plan;
  const double peak = 0.83;
  const auto scale = calibrate(peak, 15.0, plan);
  CHECK(scale.expected_counts(peak, plan.run_duration) == doctest::Approx(15.0).epsilon(1e-15));
  // Renormalizing the pattern leaves predictions unchanged.
  const double other = 0.12;
  const auto scaled = calibrate(peak * 7.5, 15.0, plan);
  CHECK(scaled.expected_counts(other * 7.5, 1800) == doctest::Approx(scale.expected_counts(other, 1800)).epsilon(1e-14));
  CHECK_THROWS_AS(calibrate(0.0, 15.0, plan), CalibrationError);
  CHECK_THROWS_AS(calibrate(1.0, 0.0, plan), CalibrationError);

  // Same-semiplane rate with the scale fixed at the +-2 degree peak.
  const ExperimentGeometry g;
  const double peak_rate = aperture_averaged_rate({0.0422546, 1.21, 6e-3}, {-0.055, 1.5, 6e-3}, g);
  const double same = aperture_averaged_rate({-0.017, 1.21, 6e-3}, {-0.055, 1.5, 6e-3}, g);
  const auto s = calibrate(peak_rate, 15.0, plan);
  const double per_run = s.expected_counts(same, 1800);
  CHECK(per_run > 0);
  CHECK(std::isfinite(per_run));
  MESSAGE("same-semiplane prediction per 30 min with 15 peak counts per run: " << per_run);
}

TEST_CASE("JSON lines and CSV") {
  const auto r = make_record(89, 11, 1800, 1800, 1.25);
  std::ostringstream out;
  write_record_jsonl(out, r, "A", 3);
  const std::string line = out.str();
  CHECK(line.back() == '\n');
  CHECK(std::count(line.begin(), line.end(), '\n') == 1);
  const auto back = read_record_json(line);
  CHECK(back.raw_coincidences == r.raw_coincidences);
  CHECK(back.weight == r.weight);
  CHECK(back.net == r.net);
  CHECK(back.net_sigma == r.net_sigma);

  std::ostringstream csv;
  write_records_csv(csv, {{"A", r}}, {"tool_version: t"});
  const std::string text = csv.str();
  CHECK(text.rfind("# tool_version: t\nlabel,raw_coincidences", 0) == 0);
}

}  // TEST_SUITE
