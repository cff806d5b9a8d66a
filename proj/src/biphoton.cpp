#include "dslit/biphoton.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dslit/quadrature.hpp"
#include "phase_kernel.hpp"

namespace dslit {

namespace {

constexpr cplx kI{0.0, 1.0};

cplx fresnel_prefactor(double k, double z) { return std::sqrt(k / (2.0 * kPi * z * kI)); }

// Closed-form Fresnel propagation of the gaussian transmission
// exp(-(x'-c)^2/(2 sigma^2)) with tilt phase exp(i beta x').
ModeValue gaussian_mode(const SlitMode& mode, double k, double x, double z) {
  const double sigma = mode.gaussian_sigma();
  const double q = k / (2.0 * z);
  const double beta = k * std::sin(mode.tilt);
  const cplx a = 1.0 / (2.0 * sigma * sigma) - kI * q;
  const cplx b = mode.center / (sigma * sigma) + kI * beta - 2.0 * kI * q * x;
  const cplx c = -mode.center * mode.center / (2.0 * sigma * sigma) + kI * q * x * x;
  const cplx value = fresnel_prefactor(k, z) * std::sqrt(kPi / a) * std::exp(b * b / (4.0 * a) + c);
  const cplx dlog = -kI * q * b / a + 2.0 * kI * q * x;
  return {value, value * dlog};
}

// Plain Gauss-Legendre evaluation of the Fresnel integral of a rect slit,
// including d/dx under the integral sign.
ModeValue rect_mode_direct(const SlitMode& mode, double k, double x, double z, std::size_t order) {
  const auto& gl = gauss_legendre(order);
  const double half = 0.5 * mode.width;
  const double beta = k * std::sin(mode.tilt);
  cplx sum = 0.0;
  cplx dsum = 0.0;
  for (std::size_t n = 0; n < gl.order(); ++n) {
    const double xp = mode.center + half * gl.nodes[n];
    const double dx = x - xp;
    const cplx e = std::polar(half * gl.weights[n], beta * xp + k * dx * dx / (2.0 * z));
    sum += e;
    dsum += e * (kI * k * dx / z);
  }
  const cplx pre = fresnel_prefactor(k, z);
  return {pre * sum, pre * dsum};
}

}  // namespace

double SlitMode::gaussian_sigma() const { return width / std::sqrt(kPi); }

double SlitMode::transmission(double x) const {
  if (profile == SlitProfile::rect) return std::abs(x - center) <= 0.5 * width ? 1.0 : 0.0;
  const double d = (x - center) / gaussian_sigma();
  return std::exp(-0.5 * d * d);
}

TwoPhotonState TwoPhotonState::from_geometry(const ExperimentGeometry& geometry, SlitProfile profile,
                                             std::size_t quadrature_order) {
  geometry.validate();
  if (quadrature_order < 2 || quadrature_order > kMaxQuadratureOrder)
    throw std::invalid_argument("Fresnel quadrature order must be in [2, 1024]");
  TwoPhotonState state;
  const double c = 0.5 * geometry.slit_separation;
  state.mode_A = {-c, geometry.slit_width, geometry.incidence_angle_A, profile};
  state.mode_B = {c, geometry.slit_width, geometry.incidence_angle_B, profile};
  state.wavevector = dslit::wavevector(geometry);
  state.quadrature_order = quadrature_order;
  return state;
}

bool TwoPhotonState::mirror_symmetric() const {
  const auto m = mode_A.mirrored();
  return m.center == mode_B.center && m.width == mode_B.width && m.tilt == mode_B.tilt &&
         m.profile == mode_B.profile;
}

double TwoPhotonState::mode_power(const SlitMode& mode) const {
  // Both profiles are normalized to transmit w.
  return mode.width;
}

cplx propagate_mode(const SlitMode& mode, double wavevector, double x, double z, std::size_t quadrature_order) {
  if (!(z > 0)) throw std::domain_error("propagate_mode: z must be positive");
  if (mode.profile == SlitProfile::gaussian) return gaussian_mode(mode, wavevector, x, z).value;
  return rect_mode_direct(mode, wavevector, x, z, quadrature_order).value;
}

FieldPlane::FieldPlane(const TwoPhotonState& state, double z) : state_(&state), k_(state.wavevector) {
  if (state.mode_A.profile == SlitProfile::rect) {
    if (state.mode_B.profile != SlitProfile::rect || state.mode_A.width != state.mode_B.width)
      throw std::invalid_argument("FieldPlane: rect modes must share profile and width");
    if (state.quadrature_order < 2 || state.quadrature_order > kMaxQuadratureOrder)
      throw std::invalid_argument("FieldPlane: quadrature order must be in [2, 1024]");
    gl_ = &gauss_legendre(state.quadrature_order);
    half_width_ = 0.5 * state.mode_A.width;
    const std::size_t n = gl_->order();
    coef_.resize(16 * (n / 2));
    arg_.resize(n);
    const SlitMode* modes[2] = {&state.mode_A, &state.mode_B};
    for (std::size_t m = 0; m < 2; ++m) {
      const double beta = k_ * std::sin(modes[m]->tilt);
      auto& table = nodes_[m];
      for (std::size_t i = 0; i < n; ++i) {
        const double xp = modes[m]->center + half_width_ * gl_->nodes[i];
        table.xp.push_back(xp);
        table.xp2.push_back(xp * xp);
        table.linear_phase.push_back(beta * xp);
        table.weight.push_back(half_width_ * gl_->weights[i]);
      }
    }
    cos_.resize(n);
    sin_.resize(n);
  }
  move_to(z);
}

void FieldPlane::move_to(double z) {
  if (!(z > 0)) throw std::domain_error("FieldPlane: z must be positive");
  z_ = z;
  prefactor_ = fresnel_prefactor(k_, z_);
  if (!gl_) return;
  const std::size_t n = gl_->order();
  double* arg = arg_.data();
  double* c = cos_.data();
  double* sn = sin_.data();
  const std::size_t half = n / 2;
  const double curvature = k_ / (2.0 * z_);
  // Quantities of the node sums: a_n and a_n x'_n for mode A, then mode B.
  for (std::size_t m = 0; m < 2; ++m) {
    const NodeTable& nodes = nodes_[m];
    for (std::size_t i = 0; i < n; ++i) arg[i] = nodes.linear_phase[i] + curvature * nodes.xp2[i];
    detail::unit_phases(arg, n, c, sn);
    double* a_p_re = coef_.data() + 8 * m * half;
    double* a_p_im = a_p_re + half;
    double* a_m_re = a_p_im + half;
    double* a_m_im = a_m_re + half;
    double* b_p_re = a_m_im + half;
    double* b_p_im = b_p_re + half;
    double* b_m_re = b_p_im + half;
    double* b_m_im = b_m_re + half;
    for (std::size_t i = 0; i < half; ++i) {
      const std::size_t j = n - 1 - i;
      const double ur = nodes.weight[i] * c[i], ui = nodes.weight[i] * sn[i];
      const double vr = nodes.weight[j] * c[j], vi = nodes.weight[j] * sn[j];
      a_p_re[i] = ur + vr;
      a_p_im[i] = ui + vi;
      a_m_re[i] = ur - vr;
      a_m_im[i] = ui - vi;
      const double xu = nodes.xp[i], xv = nodes.xp[j];
      b_p_re[i] = ur * xu + vr * xv;
      b_p_im[i] = ui * xu + vi * xv;
      b_m_re[i] = ur * xu - vr * xv;
      b_m_im[i] = ui * xu - vi * xv;
    }
    if (n % 2 == 1) {
      const cplx mid = nodes.weight[half] * cplx(c[half], sn[half]);
      middle_[2 * m] = mid;
      middle_[2 * m + 1] = mid * nodes.xp[half];
    }
  }
}

void FieldPlane::eval_rect(double x, ModeValue& va, ModeValue& vb) const {
  // exp(i k (x - x')^2 / 2z) = exp(i k x^2/2z) exp(-i k x c/z) exp(-i k x h t/z) exp(i k x'^2/2z);
  // the last factor lives in a_/b_, and exp(-i k x h t_n / z) is shared by both
  // modes and conjugate-symmetric in n.
  constexpr std::size_t kMaxHalf = kMaxQuadratureOrder / 2;
  const auto& t = gl_->nodes;
  const std::size_t n = t.size();
  const std::size_t half = n / 2;
  const double kappa = -k_ * half_width_ * x / z_;
  const double quad = k_ * x * x / (2.0 * z_);
  double arg[kMaxHalf + 2], c[kMaxHalf + 2], s[kMaxHalf + 2];
  for (std::size_t i = 0; i < half; ++i) arg[i] = kappa * t[i];
  arg[half] = quad - k_ * x * state_->mode_A.center / z_;
  arg[half + 1] = quad - k_ * x * state_->mode_B.center / z_;
  detail::unit_phases(arg, half + 2, c, s);

  double sums[8];
  detail::pair_sums(c, s, half, coef_.data(), 4, sums);
  const cplx sa = cplx(sums[0], sums[1]) + middle_[0];
  const cplx ta = cplx(sums[2], sums[3]) + middle_[1];
  const cplx sb = cplx(sums[4], sums[5]) + middle_[2];
  const cplx tb = cplx(sums[6], sums[7]) + middle_[3];
  const cplx pa = prefactor_ * cplx(c[half], s[half]);
  const cplx pb = prefactor_ * cplx(c[half + 1], s[half + 1]);
  const cplx ikz = kI * (k_ / z_);
  va.value = pa * sa;
  va.derivative = pa * ikz * (x * sa - ta);
  vb.value = pb * sb;
  vb.derivative = pb * ikz * (x * sb - tb);
}

std::pair<ModeValue, ModeValue> FieldPlane::modes(double x) const {
  std::pair<ModeValue, ModeValue> out;
  if (state_->mode_A.profile == SlitProfile::rect) {
    eval_rect(x, out.first, out.second);
  } else {
    out.first = gaussian_mode(state_->mode_A, k_, x, z_);
    out.second = gaussian_mode(state_->mode_B, k_, x, z_);
  }
  return out;
}

cplx FieldPlane::amplitude(double x1, double x2) const {
  const auto [a1, b1] = modes(x1);
  const auto [a2, b2] = modes(x2);
  return (a1.value * b2.value + b1.value * a2.value) / std::sqrt(2.0);
}

double FieldPlane::reference_density() const {
  const double lambda = 2.0 * kPi / k_;
  const double peak = std::min(1.0, state_->mode_power(state_->mode_A) * state_->mode_A.width / (lambda * z_));
  return peak * peak;
}

Velocity FieldPlane::velocity(double x1, double x2, const VelocityOptions& options) const {
  const auto [a1, b1] = modes(x1);
  const auto [a2, b2] = modes(x2);
  // Written so that swapping (x1, x2) swaps (v1, v2) bit for bit.
  const cplx psi = a1.value * b2.value + b1.value * a2.value;
  const cplx d1 = a1.derivative * b2.value + b1.derivative * a2.value;
  const cplx d2 = a1.value * b2.derivative + b1.value * a2.derivative;

  Velocity v;
  v.density = 0.5 * std::norm(psi);
  v.v1 = std::imag(d1 / psi) / k_;
  v.v2 = std::imag(d2 / psi) / k_;
  if (v.density < options.node_floor * reference_density() || !std::isfinite(v.v1) || !std::isfinite(v.v2)) {
    v.regularized = true;
    auto clamp = [&](double u) { return std::isfinite(u) ? std::clamp(u, -options.v_max, options.v_max) : 0.0; };
    v.v1 = clamp(v.v1);
    v.v2 = clamp(v.v2);
  }
  return v;
}

cplx two_photon_amplitude(const TwoPhotonState& state, double x1, double x2, double z) {
  if (!(z > 0)) throw std::domain_error("two_photon_amplitude: z must be positive");
  return FieldPlane(state, z).amplitude(x1, x2);
}

Velocity velocity_field(const TwoPhotonState& state, double x1, double x2, double z,
                        const VelocityOptions& options) {
  if (!(z > 0)) throw std::domain_error("velocity_field: z must be positive");
  return FieldPlane(state, z).velocity(x1, x2, options);
}

}  // namespace dslit
