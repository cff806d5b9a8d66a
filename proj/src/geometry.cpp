#include "dslit/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dslit {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void ExperimentGeometry::validate() const {
  require(std::isfinite(wavelength) && wavelength > 0, "geometry.wavelength must be positive");
  require(std::isfinite(slit_separation) && slit_separation > 0,
          "geometry.slit_separation must be positive");
  require(std::isfinite(slit_width) && slit_width > 0, "geometry.slit_width must be positive");
  require(slit_width < slit_separation, "geometry.slit_width must be smaller than slit_separation");
  require(std::isfinite(incidence_angle_A) && std::abs(incidence_angle_A) < kPi / 2,
          "geometry.incidence_angle_A must lie in (-pi/2, pi/2)");
  require(std::isfinite(incidence_angle_B) && std::abs(incidence_angle_B) < kPi / 2,
          "geometry.incidence_angle_B must lie in (-pi/2, pi/2)");
}

void DetectorPlacement::validate() const {
  require(std::isfinite(lateral_offset), "detector.lateral_offset must be finite");
  require(std::isfinite(plane_distance) && plane_distance > 0,
          "detector.plane_distance must be positive");
  require(std::isfinite(lens_diameter) && lens_diameter >= 0,
          "detector.lens_diameter must be non-negative");
  require(lens_diameter < 0.1 * plane_distance,
          "detector.lens_diameter must be much smaller than plane_distance");
}

double angle_from_position(double offset, double distance) {
  if (!(distance > 0)) throw std::domain_error("angle_from_position: distance must be positive");
  return std::atan(offset / distance);
}

double position_from_angle(double angle, double distance) {
  if (!(distance > 0)) throw std::domain_error("position_from_angle: distance must be positive");
  return distance * std::tan(angle);
}

AngleInterval angular_acceptance(const DetectorPlacement& placement) {
  const double half = 0.5 * placement.lens_diameter;
  return {angle_from_position(placement.lateral_offset - half, placement.plane_distance),
          angle_from_position(placement.lateral_offset + half, placement.plane_distance)};
}

double wavevector(const ExperimentGeometry& geometry) { return 2.0 * kPi / geometry.wavelength; }

int semiplane(double offset) { return (offset > 0) - (offset < 0); }

}  // namespace dslit
