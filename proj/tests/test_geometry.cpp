#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "dslit/geometry.hpp"
#include "oracles.hpp"

using namespace dslit;

TEST_SUITE("geometry") {

TEST_CASE("angle_from_position examples") {
  CHECK(angle_from_position(0.0, 1.5) == 0.0);
  // 40-digit arctangent references.
  CHECK(angle_from_position(-0.055, 1.5) == doctest::Approx(-0.036650247810411643).epsilon(1e-15));
  CHECK(rad_to_deg(angle_from_position(-0.055, 1.5)) == doctest::Approx(-2.100).epsilon(1e-3));
  CHECK(angle_from_position(-0.017, 1.21) == doctest::Approx(-0.014048662466187888).epsilon(1e-15));
  CHECK_THROWS_AS(angle_from_position(0.01, 0.0), std::domain_error);
  CHECK_THROWS_AS(angle_from_position(0.01, -1.0), std::domain_error);
  CHECK_THROWS_AS(position_from_angle(0.01, 0.0), std::domain_error);
}

TEST_CASE("angular acceptance examples") {
  const auto centered = angular_acceptance({0.0, 1.5, 6e-3});
  CHECK(0.5 * centered.width() == doctest::Approx(0.0019999973333397334).epsilon(1e-14));
  CHECK(0.5 * centered.width() == doctest::Approx(6e-3 / (2 * 1.5)).epsilon(1e-5));

  const auto point = angular_acceptance({0.013, 1.21, 0.0});
  CHECK(point.lo == point.hi);
  CHECK(point.lo == angle_from_position(0.013, 1.21));

  const auto left = angular_acceptance({-0.017, 1.21, 6e-3});
  CHECK(left.lo == doctest::Approx(-0.016527420602720798).epsilon(1e-14));
  CHECK(left.hi == doctest::Approx(-0.011569731669863197).epsilon(1e-14));
}

TEST_CASE("wavevector examples") {
  ExperimentGeometry g;
  CHECK(wavevector(g) == doctest::Approx(8950406.420483741).epsilon(1e-15));
  g.wavelength = 2 * kPi;
  CHECK(wavevector(g) == doctest::Approx(1.0).epsilon(1e-15));
  g.wavelength = 351e-9;
  CHECK(wavevector(g) == doctest::Approx(17900812.840967483).epsilon(1e-15));
}

TEST_CASE("geometry invariants") {
  ExperimentGeometry g;
  CHECK_NOTHROW(g.validate());
  CHECK(g.is_mirror_symmetric());
  CHECK(std::isfinite(wavevector(g)));
  CHECK(g.incidence_angle_A == doctest::Approx(0.0349066).epsilon(1e-6));

  auto bad = g;
  bad.slit_width = bad.slit_separation;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g;
  bad.wavelength = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g;
  bad.slit_separation = -1e-4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  DetectorPlacement p;
  CHECK_NOTHROW(p.validate());
  p.plane_distance = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.lens_diameter = 0.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("property: oddness, containment, round trip") {
  oracle::Uniform gen(11);
  for (int i = 0; i < 10000; ++i) {
    const double x = gen(-0.3, 0.3);
    const double z = gen(0.05, 3.0);
    const double d = gen(0.0, 0.09 * z);
    REQUIRE(angle_from_position(-x, z) == -angle_from_position(x, z));
    REQUIRE(semiplane(-x) == -semiplane(x));
    const auto window = angular_acceptance({x, z, d});
    REQUIRE(window.contains(angle_from_position(x, z)));
    REQUIRE(window.lo > -kPi / 2);
    REQUIRE(window.hi < kPi / 2);
    const double back = position_from_angle(angle_from_position(x, z), z);
    REQUIRE(std::abs(back - x) <= 1e-12 * std::abs(x) + 1e-300);
  }
}

}  // TEST_SUITE
