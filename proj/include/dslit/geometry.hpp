#pragma once

#include <numbers>

// Physical layout of the two-photon double-slit setup.
//
// Coordinates: the median symmetry axis of the slit pair is the origin of
// the transverse axis; negative offsets are to the left of the axis when
// looking toward the crystal. Longitudinal distances are measured from the
// slit plane to the detector lens plane.

namespace dslit {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct ExperimentGeometry {
  double wavelength = 702e-9;
  double slit_separation = 100e-6;
  double slit_width = 10e-6;
  // Photon through slit A heads toward +2 deg, photon through B toward -2 deg.
  double incidence_angle_A = deg_to_rad(2.0);
  double incidence_angle_B = deg_to_rad(-2.0);

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  bool is_mirror_symmetric() const { return incidence_angle_A == -incidence_angle_B; }
};

struct DetectorPlacement {
  double lateral_offset = 0.0;
  double plane_distance = 1.5;
  double lens_diameter = 6e-3;

  void validate() const;
};

struct AngleInterval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double a) const { return lo <= a && a <= hi; }
};

// arctan(offset / distance). Throws std::domain_error for distance <= 0.
double angle_from_position(double offset, double distance);

// Inverse of angle_from_position: distance * tan(angle).
double position_from_angle(double angle, double distance);

// Angles subtended by the two lens edges as seen from the slit midpoint.
AngleInterval angular_acceptance(const DetectorPlacement& placement);

// 2 pi / wavelength, in rad/m.
double wavevector(const ExperimentGeometry& geometry);

// Which side of the symmetry axis an offset lies on: -1, 0 or +1.
int semiplane(double offset);

}  // namespace dslit
