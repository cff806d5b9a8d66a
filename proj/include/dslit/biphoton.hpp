#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "dslit/geometry.hpp"

// Paraxial two-photon field behind the slit pair. The longitudinal distance z
// from the slit plane plays the role of time: each slit mode obeys
// i dpsi/dz = -(1/2k) d2psi/dx2 and is obtained from its transmission
// function by the Fresnel integral.

namespace dslit {

struct GaussLegendre;

using cplx = std::complex<double>;

enum class SlitProfile { rect, gaussian };

inline constexpr std::size_t kMaxQuadratureOrder = 1024;

struct SlitMode {
  double center = 0.0;
  double width = 0.0;
  double tilt = 0.0;  // incidence angle; imprints exp(i k sin(tilt) x')
  SlitProfile profile = SlitProfile::rect;

  // Real transmission amplitude. The gaussian profile is
  // exp(-(x - c)^2 / (2 sigma^2)) with sigma = w / sqrt(pi), which transmits
  // the same power as the rect of width w.
  double transmission(double x) const;
  double gaussian_sigma() const;
  SlitMode mirrored() const { return {-center, width, -tilt, profile}; }
};

struct TwoPhotonState {
  SlitMode mode_A;
  SlitMode mode_B;
  double wavevector = 0.0;
  std::size_t quadrature_order = 64;

  // Slit A is the left slit (center -s/2) and carries incidence angle A: the
  // beams converge through the slits. B is its mirror image under the
  // default symmetric geometry.
  static TwoPhotonState from_geometry(const ExperimentGeometry& geometry,
                                      SlitProfile profile = SlitProfile::rect,
                                      std::size_t quadrature_order = 64);

  bool mirror_symmetric() const;
  // Transmitted power of one mode, int |T|^2 dx'.
  double mode_power(const SlitMode& mode) const;
};

struct ModeValue {
  cplx value;
  cplx derivative;  // d/dx
};

struct Velocity {
  double v1 = 0.0;
  double v2 = 0.0;
  double density = 0.0;  // |psi|^2
  bool regularized = false;
};

struct VelocityOptions {
  // Node threshold relative to reference_density(z).
  double node_floor = 1e-30;
  // Clamp applied to regularized velocities.
  double v_max = 10.0;
};

// Both slit modes at a fixed plane z. Building a plane fixes the per-node
// phase factors; evaluations at different x are then cheap and the object is
// read-only, so one plane may be shared across threads.
class FieldPlane {
 public:
  FieldPlane(const TwoPhotonState& state, double z);

  double z() const { return z_; }
  // Re-targets the plane to another z, reusing its buffers.
  void move_to(double z);

  std::pair<ModeValue, ModeValue> modes(double x) const;
  cplx amplitude(double x1, double x2) const;
  double density(double x1, double x2) const { return std::norm(amplitude(x1, x2)); }

  // Guidance slopes dx_j/dz = Im(d_j psi / psi) / k.
  Velocity velocity(double x1, double x2, const VelocityOptions& options = {}) const;

  // Scale of |psi|^2 used for the node threshold: the square of the peak
  // single-mode intensity, min(1, P / (lambda z)) with P the mode power.
  double reference_density() const;

 private:
  void eval_rect(double x, ModeValue& a, ModeValue& b) const;

  const TwoPhotonState* state_;
  double z_ = 0.0;
  double k_;
  cplx prefactor_;  // sqrt(k / (2 pi i z))
  // rect: per-node coefficients a_n and a_n x'_n for each mode, combined
  // over conjugate node pairs (see detail::pair_sums), plus the middle node
  // of odd orders.
  std::vector<double> coef_;
  std::array<cplx, 4> middle_{};
  const GaussLegendre* gl_ = nullptr;
  struct NodeTable {
    std::vector<double> xp, xp2, linear_phase, weight;
  };
  std::array<NodeTable, 2> nodes_;  // slit modes A and B
  std::vector<double> arg_, cos_, sin_;  // move_to scratch
  double half_width_ = 0.0;
};

// Fresnel-propagated single slit mode psi_l(x, z). Throws std::domain_error
// for z <= 0.
cplx propagate_mode(const SlitMode& mode, double wavevector, double x, double z,
                    std::size_t quadrature_order = 64);

// [psi_A(x1) psi_B(x2) + psi_B(x1) psi_A(x2)] / sqrt(2).
cplx two_photon_amplitude(const TwoPhotonState& state, double x1, double x2, double z);

Velocity velocity_field(const TwoPhotonState& state, double x1, double x2, double z,
                        const VelocityOptions& options = {});

}  // namespace dslit
