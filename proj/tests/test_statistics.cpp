#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "dslit/statistics.hpp"
#include "oracles.hpp"

using namespace dslit;

TEST_SUITE("statistics") {

TEST_CASE("subtract_background and significance examples") {
  auto r = subtract_background(89, 11, 1);
  CHECK(r.net == 78);
  CHECK(r.sigma == 10);
  r = subtract_background(0, 0, 1);
  CHECK(r.net == 0);
  CHECK(r.sigma == 0);
  r = subtract_background(50, 50, 1);
  CHECK(r.net == 0);
  CHECK(r.sigma == 10);
  CHECK(significance(78, 10) == doctest::Approx(7.8).epsilon(1e-15));
  CHECK(significance(41, 14) == doctest::Approx(2.93).epsilon(1e-3));
  CHECK(significance(0, 3.3) == 0);
  CHECK_THROWS_AS(significance(1, 0), std::domain_error);
  CHECK_THROWS_AS(significance(1, -2), std::domain_error);
  CHECK_THROWS_AS(subtract_background(-1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(subtract_background(1, 0, 0), std::invalid_argument);
}

TEST_CASE("property: arithmetic against long-double re-derivation") {
  oracle::Uniform gen(1);
  for (int i = 0; i < 10000; ++i) {
    const double raw = std::floor(gen(0, 1e5));
    const double bg = std::floor(gen(0, 1e5));
    const double ratio = gen(0.1, 10);
    const auto r = subtract_background(raw, bg, ratio);
    const long double net = static_cast<long double>(raw) - static_cast<long double>(bg) * ratio;
    const long double sigma = std::sqrt(static_cast<long double>(raw) + static_cast<long double>(bg) * ratio * ratio);
    REQUIRE(std::abs(r.net - static_cast<double>(net)) <= 1e-12 * std::max(1.0L, std::abs(net)));
    REQUIRE(std::abs(r.sigma - static_cast<double>(sigma)) <= 1e-12 * std::max(1.0L, sigma));
    if (sigma > 0) REQUIRE(std::abs(significance(r.net, r.sigma) - static_cast<double>(net / sigma)) <= 1e-12 * std::max(1.0L, std::abs(net / sigma)));
  }
}

TEST_CASE("records") {
  const auto r = make_record(89, 11, 1800, 1800);
  CHECK(r.net == 78);
  CHECK(r.net_sigma == 10);
  CHECK(r.significance == doctest::Approx(7.8));
  const auto u = make_record(89, 22, 1800, 3600);
  CHECK(u.net == 78);
  CHECK(u.net_sigma == doctest::Approx(std::sqrt(89 + 22 * 0.25)));
  CHECK(make_record(0, 0, 1, 1).significance == 0);
  CHECK_THROWS_AS(make_record(1, 1, 0, 1), std::invalid_argument);
}

TEST_CASE("aggregation") {
  SUBCASE("35 runs of 78/35 net aggregate to 78") {
    RunSeries s;
    for (int i = 0; i < 35; ++i) s.runs.push_back(make_record(89.0 / 35, 11.0 / 35, 1800, 1800));
    const auto a = aggregate_runs(s);
    CHECK(a.net == doctest::Approx(78).epsilon(1e-13));
    CHECK(a.net_sigma == doctest::Approx(10).epsilon(1e-13));
    CHECK(a.raw_duration == 35 * 1800);
    const auto per = per_duration(a, 1800);
    CHECK(per.net == doctest::Approx(78.0 / 35).epsilon(1e-13));
    CHECK(per.raw_duration == 1800);
  }
  SUBCASE("single run is the identity") {
    const auto r = make_record(12, 5, 3600, 3600);
    const auto a = aggregate_runs({{r}, std::nullopt});
    CHECK(a.net == r.net);
    CHECK(a.net_sigma == r.net_sigma);
    CHECK(a.significance == r.significance);
  }
  SUBCASE("property: permutation invariance and concatenation") {
    oracle::Uniform gen(2);
    for (int t = 0; t < 200; ++t) {
      RunSeries s1, s2;
      const int n1 = 1 + static_cast<int>(gen(0, 20)), n2 = 1 + static_cast<int>(gen(0, 20));
      for (int i = 0; i < n1; ++i) s1.runs.push_back(make_record(std::floor(gen(0, 100)), std::floor(gen(0, 50)), 1800, 1800));
      for (int i = 0; i < n2; ++i) s2.runs.push_back(make_record(std::floor(gen(0, 100)), std::floor(gen(0, 50)), 1800, 1800));
      RunSeries all = s1;
      all.runs.insert(all.runs.end(), s2.runs.begin(), s2.runs.end());
      const auto whole = aggregate_runs(all);
      auto shuffled = all;
      std::shuffle(shuffled.runs.begin(), shuffled.runs.end(), gen.engine());
      const auto perm = aggregate_runs(shuffled);
      REQUIRE(perm.net == whole.net);
      REQUIRE(perm.net_sigma == whole.net_sigma);
      const auto a = aggregate_runs(s1), b = aggregate_runs(s2);
      REQUIRE(a.raw_coincidences + b.raw_coincidences == whole.raw_coincidences);
      REQUIRE(a.background_coincidences + b.background_coincidences == whole.background_coincidences);
      REQUIRE(a.net + b.net == whole.net);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(aggregate_runs({}), std::invalid_argument);
    RunSeries s{{make_record(1, 1, 1800, 1800), make_record(1, 1, 1800, 3600)}, std::nullopt};
    CHECK_THROWS_AS(aggregate_runs(s), AggregationError);
  }
}

TEST_CASE("power correction") {
  RunSeries s;
  for (int i = 0; i < 4; ++i) s.runs.push_back(make_record(40 + i, 10, 1800, 1800));
  SUBCASE("reference power everywhere is the identity") {
    s.powers = std::vector<double>(4, 1.0);
    const auto c = power_correct(s, 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(c.runs[i].net == s.runs[i].net);
      CHECK(c.runs[i].net_sigma == s.runs[i].net_sigma);
    }
  }
  SUBCASE("a half-power run doubles under the linear model") {
    s.powers = std::vector<double>{1.0, 0.5, 1.0, 1.0};
    const auto c = power_correct(s, 1.0);
    CHECK(c.runs[1].net == 2 * s.runs[1].net);
    CHECK(c.runs[1].net_sigma == 2 * s.runs[1].net_sigma);
    CHECK(c.runs[1].significance == doctest::Approx(s.runs[1].significance));
    const auto sq = power_correct(s, 1.0, 2.0);
    CHECK(sq.runs[1].net == 4 * s.runs[1].net);
    const auto a = aggregate_runs(c);
    CHECK(a.net == doctest::Approx(s.runs[0].net + 2 * s.runs[1].net + s.runs[2].net + s.runs[3].net));
  }
  SUBCASE("missing or bad powers") {
    CHECK_THROWS_AS(power_correct(s, 1.0), CorrectionError);
    s.powers = std::vector<double>{1.0, 1.0};
    CHECK_THROWS_AS(power_correct(s, 1.0), std::invalid_argument);
    s.powers = std::vector<double>{1.0, 1.0, 0.0, 1.0};
    CHECK_THROWS_AS(power_correct(s, 1.0), std::invalid_argument);
  }
  SUBCASE("null signal stays standard normal after correction") {
    std::vector<double> sig;
    oracle::Uniform gen(77);
    for (int t = 0; t < 200; ++t) {
      RunSeries n;
      std::vector<double> powers;
      for (int i = 0; i < 10; ++i) {
        const double p = gen(0.8, 1.2);
        powers.push_back(p);
        std::poisson_distribution<int> bg(30);
        n.runs.push_back(make_record(bg(gen.engine()), bg(gen.engine()), 1800, 1800));
      }
      n.powers = powers;
      sig.push_back(aggregate_runs(power_correct(n, 1.0)).significance);
    }
    CHECK(ks_test_standard_normal(sig).p_value > 0.01);
  }
}

TEST_CASE("KS test") {
  // Reference: scipy kstest statistic and kstwobign survival function.
  const auto r = ks_test_standard_normal({2.2, -1.3, 0.05, -0.4, 0.9, 0.2, 1.7});
  CHECK(r.statistic == doctest::Approx(0.24451130322466907).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.7337018913130247).epsilon(1e-10));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0, 1);
  std::vector<double> good(500), shifted(500);
  for (auto& v : good) v = normal(rng);
  for (auto& v : shifted) v = normal(rng) + 0.5;
  CHECK(ks_test_standard_normal(good).p_value > 0.01);
  CHECK(ks_test_standard_normal(shifted).p_value < 1e-6);
  CHECK_THROWS_AS(ks_test_standard_normal({}), std::invalid_argument);
}

}  // TEST_SUITE
