#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

#include "doctest.h"
#include "dslit/sqm_pattern.hpp"
#include "oracles.hpp"

using namespace dslit;

namespace {

const ExperimentGeometry kGeom{};

double hp_amplitude(double theta, double theta_i, const ExperimentGeometry& g = kGeom) {
  return oracle::slit_amplitude(theta, theta_i, g.wavelength, g.slit_width);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Root of f on [lo, hi] to machine precision.
template <class F>
double bisect(F f, double lo, double hi) {
  auto r = boost::math::tools::bisect(f, lo, hi, boost::math::tools::eps_tolerance<double>(52));
  return 0.5 * (r.first + r.second);
}

}  // namespace

TEST_SUITE("sqm_pattern") {

TEST_CASE("slit amplitude examples") {
  const double ti = kGeom.incidence_angle_A;
  CHECK(slit_amplitude(ti, ti, kGeom) == 1.0);
  CHECK(slit_amplitude(0.0, 0.0, kGeom) == 1.0);

  // First zero on the right of the peak: sin(theta) - sin(theta_i) = lambda / w.
  const double analytic = std::asin(std::sin(ti) + kGeom.wavelength / kGeom.slit_width);
  const double root = bisect([&](double t) { return slit_amplitude(t, ti, kGeom); }, ti + 0.05, ti + 0.09);
  CHECK(std::abs(root - analytic) < 1e-9);
  CHECK(kGeom.wavelength / kGeom.slit_width == doctest::Approx(0.0702));

  // Value at the opposite incidence angle: u = -3.12365, g = 0.0057449 (50-digit
  // reference frozen here as well).
  const double g = slit_amplitude(-ti, ti, kGeom);
  CHECK(rel(g, hp_amplitude(-ti, ti)) < 1e-12);
  CHECK(g == doctest::Approx(0.0057448546389328796).epsilon(1e-12));
}

TEST_CASE("slit amplitude matches extended precision across the series switch") {
  const double ti = kGeom.incidence_angle_A;
  const double du_dsin = 0.5 * 2 * kPi / kGeom.wavelength * kGeom.slit_width;
  for (double u : {1e-9, 1e-6, 5e-5, 9.99e-5, 1.0001e-4, 2e-4, 1e-2, 0.7, 2.9}) {
    for (double sign : {-1.0, 1.0}) {
      const double theta = std::asin(std::sin(ti) + sign * u / du_dsin);
      CHECK(rel(slit_amplitude(theta, ti, kGeom), hp_amplitude(theta, ti)) < 1e-12);
    }
  }
}

TEST_CASE("coincidence density examples") {
  const double a = kGeom.incidence_angle_A;
  oracle::Uniform gen(3);
  for (int i = 0; i < 200; ++i) {
    const double t = gen(-0.1, 0.1);
    const double g1 = slit_amplitude(t, a, kGeom);
    const double g2 = slit_amplitude(t, -a, kGeom);
    CHECK(coincidence_density(t, t, kGeom) == doctest::Approx(4 * g1 * g1 * g2 * g2).epsilon(1e-13));
  }
  const auto t = coincidence_terms(a, -a, kGeom);
  CHECK(t.direct_ab == 1.0);
  CHECK(t.direct_ba == doctest::Approx(1.0892214295377631e-9).epsilon(1e-10));
  CHECK(std::abs(t.interference) < 2 * 0.00574486 * 0.00574486);
  CHECK(t.interference == doctest::Approx(6.180061143981818e-05).epsilon(1e-8));
}

TEST_CASE("property: nonnegativity, symmetries, factored two-path oracle") {
  oracle::Uniform gen(2024);
  const auto& g = kGeom;
  for (int i = 0; i < 10000; ++i) {
    const double t1 = gen(-0.1, 0.1);
    const double t2 = gen(-0.1, 0.1);
    const double c = coincidence_density(t1, t2, g);
    REQUIRE(c >= -1e-12);
    REQUIRE(rel(coincidence_density(t2, t1, g), c) < 1e-14);
    REQUIRE(std::abs(coincidence_density(-t1, -t2, g) - c) <= 1e-12 * std::max(c, 1e-12));
    const double ref = oracle::two_path_density(t1, t2, g.wavelength, g.slit_width, g.slit_separation,
                                                g.incidence_angle_A, g.incidence_angle_B);
    REQUIRE(std::abs(c - ref) <= 1e-12 * std::max(ref, 1e-6));
  }
}

TEST_CASE("fringe period in sin(theta1) is lambda / s") {
  // Zeros of the cosine factor of the interference term at fixed theta2.
  const double t2 = angle_from_position(-0.055, 1.5);
  auto cosine = [&](double s1) {
    const double t1 = std::asin(s1);
    const auto terms = coincidence_terms(t1, t2, kGeom);
    const double amp = slit_amplitude(t1, kGeom.incidence_angle_A, kGeom) * slit_amplitude(t2, kGeom.incidence_angle_B, kGeom) *
                       slit_amplitude(t2, kGeom.incidence_angle_A, kGeom) * slit_amplitude(t1, kGeom.incidence_angle_B, kGeom);
    return terms.interference / (2 * amp);
  };
  std::vector<double> zeros;
  const double h = 1e-4;
  for (double s = -0.03; s < 0.03; s += h)
    if ((cosine(s) < 0) != (cosine(s + h) < 0)) zeros.push_back(bisect(cosine, s, s + h));
  REQUIRE(zeros.size() >= 10);
  const double expected = kGeom.wavelength / kGeom.slit_separation;
  CHECK(expected == doctest::Approx(7.02e-3));
  for (std::size_t i = 2; i < zeros.size(); ++i) CHECK(std::abs((zeros[i] - zeros[i - 2]) - expected) < 1e-9);
}

TEST_CASE("aperture averaging") {
  const DetectorPlacement d1{-0.017, 1.21, 6e-3};
  const DetectorPlacement d2{-0.055, 1.5, 6e-3};
  SUBCASE("point detectors reduce to the density") {
    DetectorPlacement p1 = d1, p2 = d2;
    p1.lens_diameter = p2.lens_diameter = 0.0;
    CHECK(aperture_averaged_rate(p1, p2, kGeom) ==
          coincidence_density(angle_from_position(-0.017, 1.21), angle_from_position(-0.055, 1.5), kGeom));
  }
  SUBCASE("order 16 is converged on the scan") {
    for (double x = -0.12; x <= 0.12 + 1e-12; x += 0.002) {
      const DetectorPlacement m{x, 1.21, 6e-3};
      const double r16 = aperture_averaged_rate(m, d2, kGeom, 16);
      const double r32 = aperture_averaged_rate(m, d2, kGeom, 32);
      REQUIRE(std::abs(r16 - r32) <= 1e-6 * r32);
    }
  }
  SUBCASE("same-semiplane configuration is strictly positive") {
    CHECK(aperture_averaged_rate(d1, d2, kGeom) > 0.1);
  }
  SUBCASE("order below 2 is rejected") { CHECK_THROWS_AS(aperture_averaged_rate(d1, d2, kGeom, 1), std::invalid_argument); }
  SUBCASE("lens-averaged density equals a direct Gauss-Kronrod double integral") {
    using boost::math::quadrature::gauss_kronrod;
    const auto w1 = angular_acceptance(d1);
    const auto w2 = angular_acceptance(d2);
    const double ref = gauss_kronrod<double, 31>::integrate(
                           [&](double a) {
                             return gauss_kronrod<double, 31>::integrate(
                                 [&](double b) { return coincidence_density(a, b, kGeom); }, w2.lo, w2.hi, 4, 1e-14);
                           },
                           w1.lo, w1.hi, 4, 1e-14) /
                       (w1.width() * w2.width());
    CHECK(rel(aperture_averaged_rate(d1, d2, kGeom), ref) < 1e-9);
  }
}

TEST_CASE("pattern scan") {
  const DetectorPlacement fixed{-0.055, 1.5, 6e-3};
  std::vector<double> offsets;
  for (int i = -60; i <= 60; ++i) offsets.push_back(0.002 * i);
  const auto p = pattern_scan(fixed, offsets, 1.21, kGeom);

  SUBCASE("maximum at the +2 degree position, normalized to 1") {
    const double expected = 1.21 * std::tan(deg_to_rad(2.0));
    CHECK(expected == doctest::Approx(0.0423).epsilon(1e-3));
    CHECK(std::abs(p.peak().offset - expected) <= 0.002);
    CHECK(p.peak().rate == 1.0);
    CHECK(p.normalization > 0);
    for (const auto& pt : p.points) {
      CHECK(pt.rate >= 0);
      CHECK(pt.rate_err == 0);
    }
  }
  SUBCASE("mirrored scan is identical") {
    std::vector<double> mirrored;
    for (double x : offsets) mirrored.push_back(-x);
    const auto q = pattern_scan({0.055, 1.5, 6e-3}, mirrored, 1.21, kGeom);
    for (std::size_t i = 0; i < offsets.size(); ++i) CHECK(std::abs(q.points[i].rate - p.points[i].rate) < 1e-12);
  }
  SUBCASE("empty scan is rejected") { CHECK_THROWS_AS(pattern_scan(fixed, {}, 1.21, kGeom), std::invalid_argument); }
  SUBCASE("csv layout") {
    std::ostringstream out;
    write_pattern_csv(out, p, {"tool_version: x"});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "# tool_version: x");
    std::getline(in, line);
    CHECK(line == "offset_m,angle_rad,rate,rate_err");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == offsets.size());
  }
}

TEST_CASE("envelope zeros") {
  // The analytic list.
  const auto zeros = envelope_zeros(kGeom.incidence_angle_A, kGeom, -0.2, 0.2);
  REQUIRE(zeros.size() == 5);
  for (double z : zeros) CHECK(std::abs(slit_amplitude(z, kGeom.incidence_angle_A, kGeom)) < 1e-13);
  CHECK(zeros[3] == doctest::Approx(0.10529395132435878).epsilon(1e-13));

  // A geometry where zeros of g_A and g_B coincide: 2 sin(theta_i) = lambda / w.
  // With point detectors the rate along theta1 vanishes there; the minimum is
  // bracketed to 1e-9 rad around the analytic root.
  ExperimentGeometry g = kGeom;
  g.incidence_angle_A = std::asin(0.5 * g.wavelength / g.slit_width);
  g.incidence_angle_B = -g.incidence_angle_A;
  const double root = std::asin(std::sin(g.incidence_angle_A) + g.wavelength / g.slit_width);
  CHECK(std::abs(slit_amplitude(root, g.incidence_angle_A, g)) < 1e-14);
  CHECK(std::abs(slit_amplitude(root, g.incidence_angle_B, g)) < 1e-14);
  const double z = 1.5;
  const double t2 = angle_from_position(-0.03, z);
  auto rate = [&](double t1) {
    return aperture_averaged_rate({position_from_angle(t1, z), z, 0.0}, {-0.03, z, 0.0}, g);
  };
  const double at = rate(root);
  CHECK(at < 1e-25);
  CHECK(rate(root - 1e-9) > at);
  CHECK(rate(root + 1e-9) > at);
  CHECK(coincidence_density(root, t2, g) < 1e-25);
}

}  // TEST_SUITE
