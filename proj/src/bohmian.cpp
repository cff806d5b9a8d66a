#include "dslit/bohmian.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <exception>
#include <limits>
#include <random>

#include <boost/numeric/odeint.hpp>

#include "dslit/quadrature.hpp"

namespace dslit {

namespace {

// Side of the axis a slit sits on (-1 or +1).
int slit_side(const SlitMode& mode) { return mode.center < 0 ? -1 : 1; }

std::mt19937_64 pair_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double single_intensity(const FieldPlane& plane, double x) {
  const auto [a, b] = plane.modes(x);
  return std::norm(a.value) + std::norm(b.value);
}

// Piecewise-constant upper envelope of the single-particle intensity
// |psi_A|^2 + |psi_B|^2 over [lo, hi].
struct Envelope {
  double lo = 0.0;
  double cell = 0.0;
  std::vector<double> bound;
  std::vector<double> cdf;

  Envelope(const FieldPlane& plane, double lo_, double hi, double cell_width) : lo(lo_) {
    const auto cells = static_cast<std::size_t>(std::ceil((hi - lo) / cell_width));
    cell = (hi - lo) / static_cast<double>(cells);
    bound.resize(cells);
    cdf.resize(cells);
    double acc = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      double m = 0.0;
      for (int s = 0; s <= 8; ++s) m = std::max(m, single_intensity(plane, lo + (c + s / 8.0) * cell));
      bound[c] = 1.3 * m;
      acc += bound[c];
      cdf[c] = acc;
    }
  }

  // Proposal draw and the envelope height there.
  std::pair<double, double> propose(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double target = u(rng) * cdf.back();
    const auto c = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    const std::size_t idx = std::min(c, cdf.size() - 1);
    return {lo + (static_cast<double>(idx) + u(rng)) * cell, bound[idx]};
  }
};

std::pair<double, double> side_range(int side, double extent) {
  return side < 0 ? std::pair{-extent, 0.0} : std::pair{0.0, extent};
}

struct BinIntegrals {
  std::vector<double> alpha;  // int |psi_A|^2
  std::vector<double> beta;   // int |psi_B|^2
  std::vector<cplx> gamma;    // int psi_A conj(psi_B)
};

BinIntegrals bin_integrals(const FieldPlane& plane, const std::vector<double>& edges, std::size_t sub_panels) {
  const auto& gl = gauss_legendre(8);
  BinIntegrals out;
  const std::size_t bins = edges.size() - 1;
  out.alpha.assign(bins, 0.0);
  out.beta.assign(bins, 0.0);
  out.gamma.assign(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    const double width = (edges[b + 1] - edges[b]) / static_cast<double>(sub_panels);
    for (std::size_t p = 0; p < sub_panels; ++p) {
      const double mid = edges[b] + (p + 0.5) * width;
      for (std::size_t i = 0; i < gl.order(); ++i) {
        const double w = 0.5 * width * gl.weights[i];
        const auto [ma, mb] = plane.modes(mid + 0.5 * width * gl.nodes[i]);
        out.alpha[b] += w * std::norm(ma.value);
        out.beta[b] += w * std::norm(mb.value);
        out.gamma[b] += w * ma.value * std::conj(mb.value);
      }
    }
  }
  return out;
}

GoodnessOfFit chi_square(const std::vector<double>& observed, const std::vector<double>& expected, double n,
                         double min_expected) {
  // The last entry of both vectors is the overflow bin; it always joins the pool.
  GoodnessOfFit fit;
  double pool_obs = observed.back();
  double pool_exp = expected.back();
  std::size_t used = 0;
  for (std::size_t i = 0; i + 1 < observed.size(); ++i) {
    fit.sup_norm = std::max(fit.sup_norm, std::abs(observed[i] - expected[i]) / n);
    if (expected[i] < min_expected) {
      pool_obs += observed[i];
      pool_exp += expected[i];
      continue;
    }
    const double d = observed[i] - expected[i];
    fit.chi2 += d * d / expected[i];
    ++used;
  }
  fit.sup_norm = std::max(fit.sup_norm, std::abs(observed.back() - expected.back()) / n);
  if (pool_exp > 0) {
    const double d = pool_obs - pool_exp;
    fit.chi2 += d * d / pool_exp;
    ++used;
  }
  fit.bins_used = used;
  fit.dof = used > 1 ? used - 1 : 1;
  fit.chi2_per_dof = fit.chi2 / static_cast<double>(fit.dof);
  return fit;
}

int sign_of(double v) { return (v > 0) - (v < 0); }

using State = std::array<double, 2>;

// Drives the embedded Dormand-Prince 5(4) pair from z_start to the last stop,
// landing exactly on every stop. on_step(z, x, flagged) is called after each
// accepted step; stages of rejected steps do not count towards the flag.
template <typename OnStep>
void drive(const TwoPhotonState& state, const PositionPair& initial, const std::vector<double>& stops,
           const TrajectoryOptions& options, std::size_t& rejected, OnStep&& on_step) {
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_controlled(options.tolerance, 0.0, ode::runge_kutta_dopri5<State>());
  ode::runge_kutta_dopri5<State> fallback;
  bool stage_flag = false;
  FieldPlane plane(state, options.z_start);
  auto system = [&](const State& x, State& dxdz, double z) {
    plane.move_to(z);
    const Velocity v = plane.velocity(x[0], x[1], options.velocity);
    stage_flag = stage_flag || v.regularized;
    dxdz[0] = options.velocity_scale * v.v1;
    dxdz[1] = options.velocity_scale * v.v2;
  };

  State x{initial.first, initial.second};
  double z = options.z_start;
  double dz = std::min(options.initial_step, options.step);
  std::size_t steps = 0;
  for (double stop : stops) {
    while (z < stop) {
      if (++steps > options.max_steps) throw StepBudgetExceeded("integration step budget exhausted", z);
      const double remaining = stop - z;
      // Land exactly on the stop rather than leave a sliver step behind it.
      const bool last = dz * 1.01 >= remaining;
      double trial = last ? remaining : std::min(dz, options.step);
      stage_flag = false;
      if (stepper.try_step(system, x, z, trial) != ode::success) {
        ++rejected;
        if (trial >= options.min_step) {
          dz = trial;
          continue;
        }
        // The controller gave up on this region: take an unchecked minimum
        // step and flag the pair.
        trial = last ? remaining : options.min_step;
        stage_flag = true;
        fallback.do_step(system, x, z, trial);
        z += trial;
        dz = options.min_step;
        if (last) z = stop;
        if (!std::isfinite(x[0]) || !std::isfinite(x[1])) throw IntegrationError("non-finite position", z);
        on_step(z, x, stage_flag);
        continue;
      }
      if (last) z = stop;
      dz = std::min(trial, options.step);
      if (!std::isfinite(x[0]) || !std::isfinite(x[1])) throw IntegrationError("non-finite position", z);
      on_step(z, x, stage_flag);
    }
  }
}

std::vector<double> integration_stops(const TrajectoryOptions& options, double z_final,
                                      const std::vector<double>& probes) {
  options.validate();
  if (!(z_final > options.z_start)) throw std::invalid_argument("z_final must exceed z_start");
  std::vector<double> stops;
  for (double p : probes)
    if (p > options.z_start && p < z_final) stops.push_back(p);
  stops.push_back(z_final);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  return stops;
}

}  // namespace

std::vector<PositionPair> sample_initial_pairs(const TwoPhotonState& state, std::size_t n, std::uint64_t seed,
                                               const SamplingOptions& options) {
  if (n < 1) throw std::invalid_argument("sample_initial_pairs: n must be at least 1");
  if (!(options.extent > 0) || !(options.cell_width > 0) || !(options.z_start > 0))
    throw std::invalid_argument("sample_initial_pairs: invalid sampling options");
  const FieldPlane plane(state, options.z_start);
  auto range = [&](const SlitMode& m) {
    return options.one_per_side ? side_range(slit_side(m), options.extent) : std::pair{-options.extent, options.extent};
  };
  const auto [alo, ahi] = range(state.mode_A);
  const auto [blo, bhi] = range(state.mode_B);
  const Envelope env_a(plane, alo, ahi, options.cell_width);
  const Envelope env_b = options.one_per_side ? Envelope(plane, blo, bhi, options.cell_width) : env_a;

  std::vector<PositionPair> pairs(n);
  bool failed = false;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < n; ++i) {
    if (failed) continue;
    auto rng = pair_stream(seed, i);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](const Envelope& env, std::size_t& trials) {
      for (;;) {
        ++trials;
        const auto [x, height] = env.propose(rng);
        if (u(rng) * height < single_intensity(plane, x)) return x;
        if (trials > options.max_trials_per_pair) return std::nan("");
      }
    };
    std::size_t trials = 0;
    bool done = false;
    while (!done && trials <= options.max_trials_per_pair) {
      const double x1 = draw(env_a, trials);
      const double x2 = draw(env_b, trials);
      if (std::isnan(x1) || std::isnan(x2)) break;
      const auto [a1, b1] = plane.modes(x1);
      const auto [a2, b2] = plane.modes(x2);
      const double f1 = std::norm(a1.value) + std::norm(b1.value);
      const double f2 = std::norm(a2.value) + std::norm(b2.value);
      // |a1 b2 + b1 a2|^2 <= f1 f2 by Cauchy-Schwarz.
      const double ratio = std::norm(a1.value * b2.value + b1.value * a2.value) / (f1 * f2);
      if (u(rng) < ratio) {
        pairs[i] = u(rng) < 0.5 ? PositionPair{x1, x2} : PositionPair{x2, x1};
        done = true;
      }
    }
    if (!done) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) throw SamplingError("sample_initial_pairs: rejection efficiency below 1e-6; check the geometry");
  return pairs;
}

double sampled_mass_fraction(const TwoPhotonState& state, const SamplingOptions& options) {
  const FieldPlane plane(state, options.z_start);
  auto region = [&](std::pair<double, double> r) {
    const auto panels = static_cast<std::size_t>(std::ceil((r.second - r.first) / options.cell_width));
    std::vector<double> edges{r.first, r.second};
    return bin_integrals(plane, edges, panels);
  };
  if (!options.one_per_side) {
    const auto r = region({-options.extent, options.extent});
    return (r.alpha[0] * r.beta[0] + std::norm(r.gamma[0])) /
           (state.mode_power(state.mode_A) * state.mode_power(state.mode_B));
  }
  auto side = [&](int s) { return region(side_range(s, options.extent)); };
  const auto ra = side(slit_side(state.mode_A));
  const auto rb = side(slit_side(state.mode_B));
  const double mass = ra.alpha[0] * rb.beta[0] + ra.beta[0] * rb.alpha[0] +
                      2.0 * std::real(ra.gamma[0] * std::conj(rb.gamma[0]));
  return mass / (state.mode_power(state.mode_A) * state.mode_power(state.mode_B));
}

void TrajectoryOptions::validate() const {
  if (!(z_start > 0)) throw std::invalid_argument("z_start must be positive");
  if (!(step > 0)) throw std::invalid_argument("integration step must be positive");
  if (!(tolerance > 0)) throw std::invalid_argument("integration tolerance must be positive");
  if (!(initial_step > 0)) throw std::invalid_argument("initial step must be positive");
  if (!(min_step > 0) || min_step > step) throw std::invalid_argument("min_step must be in (0, step]");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
}

SlitAssignment slit_assignment(const TwoPhotonState& state, const PositionPair& initial) {
  const bool a_first = sign_of(initial.first) == slit_side(state.mode_A) &&
                       sign_of(initial.second) == slit_side(state.mode_B);
  return a_first ? SlitAssignment::A_left_B_right : SlitAssignment::other;
}

TrajectoryPair integrate_pair(const TwoPhotonState& state, const PositionPair& initial, double z_final,
                              double step, const TrajectoryOptions& options) {
  TrajectoryOptions opts = options;
  opts.step = step;
  const auto stops = integration_stops(opts, z_final, {});
  TrajectoryPair out;
  out.initial_slit_assignment = slit_assignment(state, initial);
  out.samples.push_back({opts.z_start, initial.first, initial.second});
  std::size_t rejected = 0;
  drive(state, initial, stops, opts, rejected, [&](double z, const State& x, bool flagged) {
    out.samples.push_back({z, x[0], x[1]});
    out.node_flag = out.node_flag || flagged;
  });
  return out;
}

const std::vector<PositionPair>& EnsembleTrajectories::at(double z) const {
  for (std::size_t p = 0; p < probe_z.size(); ++p)
    if (probe_z[p] == z) return positions[p];
  throw std::out_of_range("EnsembleTrajectories: no probe at requested z");
}

EnsembleTrajectories integrate_ensemble(const TwoPhotonState& state, const std::vector<PositionPair>& initial,
                                        std::vector<double> probes, const TrajectoryOptions& options) {
  if (probes.empty()) throw std::invalid_argument("integrate_ensemble: no probe planes");
  std::sort(probes.begin(), probes.end());
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());
  const auto stops = integration_stops(options, probes.back(), probes);
  const std::size_t n = initial.size();
  const bool mirror = state.mirror_symmetric();
  const double w = state.mode_A.width;

  EnsembleTrajectories run;
  run.initial = initial;
  run.probe_z = probes;
  run.positions.assign(probes.size(), std::vector<PositionPair>(n));
  run.outcomes.assign(n, {});
  for (std::size_t p = 0; p < probes.size(); ++p)
    if (probes[p] <= options.z_start) run.positions[p] = initial;

  // Exceptions may not leave an OpenMP region; the first one is rethrown.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n; ++i) {
    if (failure) continue;
    try {
      auto& out = run.outcomes[i];
      const auto [a, b] = initial[i];
      const int exch0 = sign_of(a - b);
      const int mirr0 = sign_of(a + b);
      double last1 = a, last2 = b;
      std::size_t next_probe = 0;
      while (next_probe < probes.size() && probes[next_probe] <= options.z_start) ++next_probe;
      try {
        drive(state, initial[i], stops, options, out.rejected, [&](double z, const State& x, bool flagged) {
          ++out.steps;
          out.flagged = out.flagged || flagged;
          if (sign_of(x[0] - x[1]) != exch0) out.exchange_violation = true;
          if (mirror && sign_of(x[0] + x[1]) != mirr0) out.mirror_violation = true;
          if (next_probe < probes.size() && z == probes[next_probe]) run.positions[next_probe++][i] = {x[0], x[1]};
          last1 = x[0];
          last2 = x[1];
        });
        out.crossed_axis = sign_of(a) * last1 < -w || sign_of(b) * last2 < -w;
      } catch (const StepBudgetExceeded&) {
        out.abandoned = true;
        out.flagged = true;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (; next_probe < probes.size(); ++next_probe) run.positions[next_probe][i] = {nan, nan};
      }
    } catch (...) {
#pragma omp critical(dslit_ensemble_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return run;
}

HistogramSpec default_histogram(const TwoPhotonState& state, double z) {
  const double lambda = 2.0 * kPi / state.wavevector;
  const double tilt = std::max(std::abs(std::tan(state.mode_A.tilt)), std::abs(std::tan(state.mode_B.tilt)));
  const double reach = z * (tilt + 2.0 * lambda / state.mode_A.width) + 0.5 * std::abs(state.mode_A.center - state.mode_B.center);
  return {-reach, reach, 50, 5.0};
}

EquivarianceReport equivariance_check(const TwoPhotonState& state, const std::vector<PositionPair>& ensemble,
                                      double z_probe, const HistogramSpec& spec, double mass_fraction) {
  if (ensemble.empty()) throw std::invalid_argument("equivariance_check: empty ensemble");
  if (spec.bins < 1 || !(spec.hi > spec.lo)) throw std::invalid_argument("equivariance_check: bad histogram");
  const std::size_t nb = spec.bins;
  const double n = static_cast<double>(ensemble.size());
  const double width = (spec.hi - spec.lo) / static_cast<double>(nb);
  std::vector<double> edges(nb + 1);
  for (std::size_t b = 0; b <= nb; ++b) edges[b] = spec.lo + width * static_cast<double>(b);

  const FieldPlane plane(state, z_probe);
  const auto I = bin_integrals(plane, edges, 4);
  const double pa = state.mode_power(state.mode_A);
  const double pb = state.mode_power(state.mode_B);
  const double norm = pa * pb * mass_fraction;

  auto bin_of = [&](double x) -> std::size_t {
    if (!(x >= spec.lo && x < spec.hi)) return nb;
    return std::min(nb - 1, static_cast<std::size_t>((x - spec.lo) / width));
  };

  // Marginals: the other particle integrated over the whole line, where the
  // cross term vanishes because the slit modes are orthogonal.
  std::vector<double> exp_m(nb + 1, 0.0);
  double inside = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    exp_m[b] = n * 0.5 * (I.alpha[b] * pb + I.beta[b] * pa) / norm;
    inside += exp_m[b];
  }
  exp_m[nb] = std::max(0.0, n - inside);

  std::vector<double> obs1(nb + 1, 0.0), obs2(nb + 1, 0.0), obsj((nb * nb) + 1, 0.0);
  for (const auto& [a, b] : ensemble) {
    const auto i = bin_of(a);
    const auto j = bin_of(b);
    obs1[i] += 1;
    obs2[j] += 1;
    obsj[(i == nb || j == nb) ? nb * nb : i * nb + j] += 1;
  }

  std::vector<double> exp_j(nb * nb + 1, 0.0);
  inside = 0.0;
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      const double p = 0.5 * (I.alpha[i] * I.beta[j] + I.beta[i] * I.alpha[j] +
                               2.0 * std::real(I.gamma[i] * std::conj(I.gamma[j])));
      exp_j[i * nb + j] = n * p / norm;
      inside += exp_j[i * nb + j];
    }
  exp_j[nb * nb] = std::max(0.0, n - inside);

  EquivarianceReport report;
  report.z = z_probe;
  report.histogram = spec;
  report.marginal_x1 = chi_square(obs1, exp_m, n, spec.min_expected);
  report.marginal_x2 = chi_square(obs2, exp_m, n, spec.min_expected);
  report.joint = chi_square(obsj, exp_j, n, spec.min_expected);
  return report;
}

CoincidenceCount count_coincidences(const EnsembleTrajectories& run, const DetectorPlacement& d1,
                                    const DetectorPlacement& d2) {
  const auto& at1 = run.at(d1.plane_distance);
  const auto& at2 = run.at(d2.plane_distance);
  auto inside = [](const DetectorPlacement& d, double x) {
    return std::abs(x - d.lateral_offset) <= 0.5 * d.lens_diameter;
  };
  CoincidenceCount c{d1, d2};
  std::size_t unflagged = 0;
  for (std::size_t i = 0; i < run.initial.size(); ++i) {
    const bool hit = (inside(d1, at1[i].first) && inside(d2, at2[i].second)) ||
                     (inside(d1, at1[i].second) && inside(d2, at2[i].first));
    const bool flagged = run.outcomes[i].flagged;
    if (!flagged) ++unflagged;
    if (!hit) continue;
    ++c.coincidences;
    if (!flagged) ++c.coincidences_unflagged;
  }
  c.fraction = static_cast<double>(c.coincidences) / static_cast<double>(run.initial.size());
  c.fraction_unflagged = unflagged ? static_cast<double>(c.coincidences_unflagged) / static_cast<double>(unflagged) : 0.0;
  return c;
}

EnsembleReport summarize_ensemble(const TwoPhotonState& state, const EnsembleTrajectories& run,
                                  const std::pair<DetectorPlacement, DetectorPlacement>& placements,
                                  const std::vector<double>& equivariance_planes, double mass_fraction) {
  EnsembleReport r;
  r.n_pairs = run.initial.size();
  r.sampled_mass_fraction = mass_fraction;
  std::size_t crossed = 0;
  std::size_t unflagged = 0;
  for (const auto& o : run.outcomes) {
    if (o.flagged) {
      ++r.n_flagged;
      if (o.exchange_violation || o.mirror_violation) ++r.flagged_violations;
      continue;
    }
    ++unflagged;
    if (o.exchange_violation) ++r.exchange_violations;
    if (o.mirror_violation) ++r.mirror_violations;
    if (o.exchange_violation || o.mirror_violation) ++r.crossing_violations;
    if (o.crossed_axis) ++crossed;
  }
  r.semiplane_penetration_fraction = unflagged ? static_cast<double>(crossed) / static_cast<double>(unflagged) : 0.0;

  const auto& [d1, d2] = placements;
  DetectorPlacement d1m = d1;
  d1m.lateral_offset = -d1.lateral_offset;
  const auto given = count_coincidences(run, d1, d2);
  const auto mirrored = count_coincidences(run, d1m, d2);
  const bool given_same = semiplane(d1.lateral_offset) == semiplane(d2.lateral_offset);
  const auto& same = given_same ? given : mirrored;
  const auto& opposite = given_same ? mirrored : given;
  r.same_semiplane_coincidence_fraction = same.fraction;
  r.same_semiplane_coincidence_fraction_unflagged = same.fraction_unflagged;
  r.opposite_semiplane_coincidence_fraction = opposite.fraction;
  r.opposite_semiplane_coincidence_fraction_unflagged = opposite.fraction_unflagged;
  r.configurations = {given, mirrored};

  for (double z : equivariance_planes)
    r.equivariance.push_back(equivariance_check(state, run.at(z), z, default_histogram(state, z), mass_fraction));
  return r;
}

EnsembleReport ensemble_coincidence_rate(const TwoPhotonState& state,
                                         const std::pair<DetectorPlacement, DetectorPlacement>& placements,
                                         std::size_t n, std::uint64_t seed, const EnsembleOptions& options,
                                         EnsembleTrajectories* trajectories_out) {
  placements.first.validate();
  placements.second.validate();
  SamplingOptions sampling = options.sampling;
  sampling.z_start = options.trajectory.z_start;
  const auto initial = sample_initial_pairs(state, n, seed, sampling);
  std::vector<double> probes = options.equivariance_planes;
  probes.push_back(placements.first.plane_distance);
  probes.push_back(placements.second.plane_distance);
  auto run = integrate_ensemble(state, initial, probes, options.trajectory);
  const double mass = sampled_mass_fraction(state, sampling);
  auto report = summarize_ensemble(state, run, placements, options.equivariance_planes, mass);
  if (trajectories_out) *trajectories_out = std::move(run);
  return report;
}

}  // namespace dslit
