#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "dslit/geometry.hpp"

namespace dslit {

// Single-slit diffraction amplitude sin(u)/u with
// u = (k w / 2) (sin(theta) - sin(theta_incidence)).
double slit_amplitude(double theta, double theta_incidence, const ExperimentGeometry& geometry);

// The three pieces of the two-photon coincidence density. `direct_ab` is the
// amplitude for photon A reaching detector 1 and photon B detector 2,
// `direct_ba` the exchanged path, `interference` their cross term.
struct CoincidenceTerms {
  double direct_ab = 0.0;
  double direct_ba = 0.0;
  double interference = 0.0;

  double total() const { return direct_ab + direct_ba + interference; }
};

CoincidenceTerms coincidence_terms(double theta1, double theta2, const ExperimentGeometry& geometry);

// Relative coincidence rate density C(theta1, theta2). Unity at the
// direct-path maximum, non-negative.
double coincidence_density(double theta1, double theta2, const ExperimentGeometry& geometry);

// Mean of C over the two angular acceptance windows, using an
// order x order Gauss-Legendre product rule. Throws std::invalid_argument when
// order < 2.
double aperture_averaged_rate(const DetectorPlacement& placement1, const DetectorPlacement& placement2,
                              const ExperimentGeometry& geometry, std::size_t order = 16);

// Probability that a photon pair lands one photon in each aperture, i.e. C
// integrated over both acceptance windows (both photon assignments) divided
// by the integral of C over all angle pairs.
double aperture_coincidence_probability(const DetectorPlacement& placement1,
                                        const DetectorPlacement& placement2,
                                        const ExperimentGeometry& geometry, std::size_t order = 16);

// Integral of C over (-pi/2, pi/2)^2.
double total_coincidence_integral(const ExperimentGeometry& geometry);

struct PatternPoint {
  double offset = 0.0;
  double angle = 0.0;
  double rate = 0.0;
  double rate_err = 0.0;
};

struct CoincidencePattern {
  DetectorPlacement fixed_placement;
  double moving_distance = 0.0;
  double moving_lens_diameter = 0.0;
  std::vector<PatternPoint> points;
  double normalization = 0.0;

  // Point with the largest relative rate; the first one on ties.
  const PatternPoint& peak() const;
};

struct ScanOptions {
  double lens_diameter = 6e-3;
  std::size_t quadrature_order = 16;
};

// Scans the moving detector (detector 1) across `scan_offsets` at
// `moving_distance` while detector 2 stays at `fixed`. Rates are normalized
// to a maximum of 1 over the scan. Throws std::invalid_argument on an empty scan.
CoincidencePattern pattern_scan(const DetectorPlacement& fixed, const std::vector<double>& scan_offsets,
                                double moving_distance, const ExperimentGeometry& geometry,
                                const ScanOptions& options = {});

// Writes `# `-prefixed metadata lines, then the header
// offset_m,angle_rad,rate,rate_err and one row per point.
void write_pattern_csv(std::ostream& out, const CoincidencePattern& pattern,
                       const std::vector<std::string>& metadata = {});

// Angles in (-pi/2, pi/2) where the slit envelope g(theta, theta_incidence)
// vanishes, restricted to [lo, hi].
std::vector<double> envelope_zeros(double theta_incidence, const ExperimentGeometry& geometry, double lo,
                                   double hi);

}  // namespace dslit
