#include "dslit/sqm_pattern.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <locale>
#include <ostream>
#include <stdexcept>

#include "dslit/quadrature.hpp"

namespace dslit {

namespace {

double sinc(double u) {
  // Series below 1e-4: the truncation error is below u^6/5040 < 1e-27.
  if (std::abs(u) < 1e-4) {
    const double u2 = u * u;
    return 1.0 - u2 / 6.0 + u2 * u2 / 120.0;
  }
  return std::sin(u) / u;
}

// Angles at which the product rule samples an acceptance window. A zero-width
// window degenerates to its center with unit weight.
struct WindowRule {
  std::vector<double> angles;
  std::vector<double> weights;  // sum to 1
};

WindowRule window_rule(const AngleInterval& window, std::size_t order) {
  WindowRule rule;
  if (window.width() <= 0) {
    rule.angles = {window.center()};
    rule.weights = {1.0};
    return rule;
  }
  const auto& gl = gauss_legendre(order);
  const double mid = window.center();
  const double half = 0.5 * window.width();
  for (std::size_t i = 0; i < gl.order(); ++i) {
    rule.angles.push_back(mid + half * gl.nodes[i]);
    rule.weights.push_back(0.5 * gl.weights[i]);
  }
  return rule;
}

}  // namespace

double slit_amplitude(double theta, double theta_incidence, const ExperimentGeometry& geometry) {
  const double u = 0.5 * wavevector(geometry) * geometry.slit_width *
                   (std::sin(theta) - std::sin(theta_incidence));
  return sinc(u);
}

CoincidenceTerms coincidence_terms(double theta1, double theta2, const ExperimentGeometry& geometry) {
  const double g1a = slit_amplitude(theta1, geometry.incidence_angle_A, geometry);
  const double g1b = slit_amplitude(theta1, geometry.incidence_angle_B, geometry);
  const double g2a = slit_amplitude(theta2, geometry.incidence_angle_A, geometry);
  const double g2b = slit_amplitude(theta2, geometry.incidence_angle_B, geometry);
  const double phase = wavevector(geometry) * geometry.slit_separation * (std::sin(theta1) - std::sin(theta2));
  CoincidenceTerms t;
  t.direct_ab = g1a * g1a * g2b * g2b;
  t.direct_ba = g2a * g2a * g1b * g1b;
  t.interference = 2.0 * ((g1a * g2b) * (g2a * g1b)) * std::cos(phase);
  return t;
}

double coincidence_density(double theta1, double theta2, const ExperimentGeometry& geometry) {
  return coincidence_terms(theta1, theta2, geometry).total();
}

double aperture_averaged_rate(const DetectorPlacement& placement1, const DetectorPlacement& placement2,
                              const ExperimentGeometry& geometry, std::size_t order) {
  if (order < 2) throw std::invalid_argument("quadrature order must be at least 2");
  const auto r1 = window_rule(angular_acceptance(placement1), order);
  const auto r2 = window_rule(angular_acceptance(placement2), order);
  double sum = 0.0;
  for (std::size_t i = 0; i < r1.angles.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < r2.angles.size(); ++j)
      row += r2.weights[j] * coincidence_density(r1.angles[i], r2.angles[j], geometry);
    sum += r1.weights[i] * row;
  }
  return sum;
}

double total_coincidence_integral(const ExperimentGeometry& geometry) {
  // C separates: 2 G_A G_B + 2 |H|^2 with G_l = int g_l^2 and
  // H = int g_A g_B exp(i k s sin(theta)).
  const auto& gl = gauss_legendre(16);
  const int panels = 4000;
  const double lo = -kPi / 2;
  const double width = kPi / panels;
  const double ks = wavevector(geometry) * geometry.slit_separation;
  double ga = 0.0;
  double gb = 0.0;
  std::complex<double> h = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    for (std::size_t i = 0; i < gl.order(); ++i) {
      const double th = mid + 0.5 * width * gl.nodes[i];
      const double w = 0.5 * width * gl.weights[i];
      const double a = slit_amplitude(th, geometry.incidence_angle_A, geometry);
      const double b = slit_amplitude(th, geometry.incidence_angle_B, geometry);
      ga += w * a * a;
      gb += w * b * b;
      h += w * a * b * std::polar(1.0, ks * std::sin(th));
    }
  }
  return 2.0 * ga * gb + 2.0 * std::norm(h);
}

double aperture_coincidence_probability(const DetectorPlacement& placement1,
                                        const DetectorPlacement& placement2,
                                        const ExperimentGeometry& geometry, std::size_t order) {
  const double mean = aperture_averaged_rate(placement1, placement2, geometry, order);
  const double area = angular_acceptance(placement1).width() * angular_acceptance(placement2).width();
  return 2.0 * mean * area / total_coincidence_integral(geometry);
}

const PatternPoint& CoincidencePattern::peak() const {
  if (points.empty()) throw std::logic_error("peak() of an empty pattern");
  return *std::max_element(points.begin(), points.end(),
                           [](const PatternPoint& a, const PatternPoint& b) { return a.rate < b.rate; });
}

CoincidencePattern pattern_scan(const DetectorPlacement& fixed, const std::vector<double>& scan_offsets,
                                double moving_distance, const ExperimentGeometry& geometry,
                                const ScanOptions& options) {
  if (scan_offsets.empty()) throw std::invalid_argument("pattern_scan: scan_offsets is empty");
  CoincidencePattern pattern;
  pattern.fixed_placement = fixed;
  pattern.moving_distance = moving_distance;
  pattern.moving_lens_diameter = options.lens_diameter;
  pattern.points.resize(scan_offsets.size());

  for (std::size_t i = 0; i < scan_offsets.size(); ++i) {
    const DetectorPlacement moving{scan_offsets[i], moving_distance, options.lens_diameter};
    auto& pt = pattern.points[i];
    pt.offset = scan_offsets[i];
    pt.angle = angle_from_position(scan_offsets[i], moving_distance);
    pt.rate = aperture_averaged_rate(moving, fixed, geometry, options.quadrature_order);
  }

  double norm = 0.0;
  for (const auto& pt : pattern.points) norm = std::max(norm, pt.rate);
  pattern.normalization = norm;
  if (norm > 0)
    for (auto& pt : pattern.points) pt.rate /= norm;
  return pattern;
}

void write_pattern_csv(std::ostream& out, const CoincidencePattern& pattern,
                       const std::vector<std::string>& metadata) {
  out.imbue(std::locale::classic());
  for (const auto& line : metadata) out << "# " << line << '\n';
  out << "offset_m,angle_rad,rate,rate_err\n";
  out << std::setprecision(12);
  for (const auto& pt : pattern.points)
    out << pt.offset << ',' << pt.angle << ',' << pt.rate << ',' << pt.rate_err << '\n';
}

std::vector<double> envelope_zeros(double theta_incidence, const ExperimentGeometry& geometry, double lo,
                                   double hi) {
  // sin(theta) = sin(theta_i) + m lambda / w for nonzero integer m.
  std::vector<double> zeros;
  const double step = geometry.wavelength / geometry.slit_width;
  const double base = std::sin(theta_incidence);
  const int mmax = static_cast<int>(std::ceil(2.0 / step)) + 1;
  for (int m = -mmax; m <= mmax; ++m) {
    if (m == 0) continue;
    const double s = base + m * step;
    if (std::abs(s) >= 1.0) continue;
    const double th = std::asin(s);
    if (th >= lo && th <= hi) zeros.push_back(th);
  }
  return zeros;
}

}  // namespace dslit
