#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dslit/biphoton.hpp"
#include "dslit/geometry.hpp"

namespace dslit {

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntegrationError : std::runtime_error {
  IntegrationError(const std::string& what, double z) : std::runtime_error(what), z(z) {}
  double z;
};

// A trajectory needed more than TrajectoryOptions::max_steps steps; in
// practice it is circling a node of a field that is not an exact solution.
struct StepBudgetExceeded : IntegrationError {
  using IntegrationError::IntegrationError;
};

using PositionPair = std::pair<double, double>;

struct SamplingOptions {
  double z_start = 1e-4;
  // Positions are drawn within this distance of the axis.
  double extent = 120e-6;
  // Restrict to one particle on each slit's side of the axis. The restricted
  // ensemble is not |psi|^2-distributed: about 2.5% of the mass at 1e-4 m
  // has both particles on one side.
  bool one_per_side = false;
  // Envelope cell width for the single-particle proposal.
  double cell_width = 0.25e-6;
  std::size_t max_trials_per_pair = 10'000'000;
};

// Draws n pairs from |psi(x1, x2, z_start)|^2 on [-extent, extent]^2, or on
// the one-per-side part of it with labels swapped with probability 1/2.
// Pair i depends only on (seed, i). Throws SamplingError when the acceptance
// rate drops below 1e-6.
std::vector<PositionPair> sample_initial_pairs(const TwoPhotonState& state, std::size_t n, std::uint64_t seed,
                                               const SamplingOptions& options = {});

// Fraction of the total |psi|^2 norm lying in the sampling region at z_start.
double sampled_mass_fraction(const TwoPhotonState& state, const SamplingOptions& options = {});

struct TrajectoryOptions {
  double z_start = 1e-4;
  // Largest step the controller may take (m).
  double step = 1e-3;
  // Absolute local error allowed per step (m) for the embedded
  // Dormand-Prince 5(4) estimate.
  double tolerance = 1e-15;
  double initial_step = 1e-6;
  // Below this step the controller stops refining; such steps are taken
  // unchecked and the pair is flagged like a node crossing.
  double min_step = 1e-12;
  std::size_t max_steps = 100'000;
  VelocityOptions velocity;
  // Multiplies every guidance velocity; 1 except in negative-control runs.
  double velocity_scale = 1.0;

  void validate() const;
};

enum class SlitAssignment { A_left_B_right, other };

struct TrajectorySample {
  double z;
  double x1;
  double x2;
};

struct TrajectoryPair {
  std::vector<TrajectorySample> samples;
  bool node_flag = false;
  SlitAssignment initial_slit_assignment = SlitAssignment::other;
};

// Which slit side each particle starts on; A_left_B_right when particle 1 is
// on slit A's side and particle 2 on slit B's.
SlitAssignment slit_assignment(const TwoPhotonState& state, const PositionPair& initial);

// Integrates dx_j/dz = v_j from z_start to z_final with an error-controlled
// Dormand-Prince 5(4) stepper, steps capped at `step`; records every accepted
// step. Throws std::invalid_argument on bad step/z_final and IntegrationError
// when the state stops being finite or the step budget runs out.
TrajectoryPair integrate_pair(const TwoPhotonState& state, const PositionPair& initial, double z_final,
                              double step, const TrajectoryOptions& options = {});

// Per-pair outcome of an ensemble integration.
struct PairOutcome {
  bool flagged = false;
  bool exchange_violation = false;  // sign(x1 - x2) changed
  bool mirror_violation = false;    // sign(x1 + x2) changed (mirror setups only)
  bool crossed_axis = false;        // a particle ended more than w beyond the axis from its starting side
  std::size_t steps = 0;            // accepted steps
  std::size_t rejected = 0;         // steps retried with a smaller size
  bool abandoned = false;           // step budget exhausted; later positions are NaN
};

struct EnsembleTrajectories {
  std::vector<PositionPair> initial;
  std::vector<double> probe_z;
  // positions[p][i]: pair i at probe_z[p].
  std::vector<std::vector<PositionPair>> positions;
  std::vector<PairOutcome> outcomes;

  const std::vector<PositionPair>& at(double z) const;
};

// Integrates every pair to the largest probe, landing exactly on each probe
// plane. Pairs are independent, so results do not depend on the number of
// threads. A pair exceeding the step budget is abandoned and flagged, with
// NaN positions at the probes it did not reach.
EnsembleTrajectories integrate_ensemble(const TwoPhotonState& state, const std::vector<PositionPair>& initial,
                                        std::vector<double> probes, const TrajectoryOptions& options = {});

struct GoodnessOfFit {
  double chi2 = 0.0;
  std::size_t dof = 0;
  double chi2_per_dof = 0.0;
  double sup_norm = 0.0;  // max |observed - expected| bin probability
  std::size_t bins_used = 0;
};

struct HistogramSpec {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t bins = 50;
  // Bins expecting fewer counts are pooled with the overflow.
  double min_expected = 5.0;
};

struct EquivarianceReport {
  double z = 0.0;
  HistogramSpec histogram;
  GoodnessOfFit marginal_x1;
  GoodnessOfFit marginal_x2;
  GoodnessOfFit joint;
};

// Default histogram range at z: both incidence directions plus two envelope
// lobes on either side.
HistogramSpec default_histogram(const TwoPhotonState& state, double z);

// Compares the ensemble at z_probe with |psi|^2 integrated over the
// histogram bins. `mass_fraction` is the share of the norm the ensemble
// represents (see sampled_mass_fraction).
EquivarianceReport equivariance_check(const TwoPhotonState& state, const std::vector<PositionPair>& ensemble,
                                      double z_probe, const HistogramSpec& histogram, double mass_fraction = 1.0);

struct CoincidenceCount {
  DetectorPlacement detector1;
  DetectorPlacement detector2;
  std::size_t coincidences = 0;
  std::size_t coincidences_unflagged = 0;
  double fraction = 0.0;            // over all pairs
  double fraction_unflagged = 0.0;  // over non-flagged pairs
};

// A coincidence is one particle inside lens 1 at plane 1 and the other inside
// lens 2 at plane 2, trying both labelings.
CoincidenceCount count_coincidences(const EnsembleTrajectories& run, const DetectorPlacement& detector1,
                                    const DetectorPlacement& detector2);

struct EnsembleReport {
  std::size_t n_pairs = 0;
  std::size_t n_flagged = 0;
  double same_semiplane_coincidence_fraction = 0.0;
  double same_semiplane_coincidence_fraction_unflagged = 0.0;
  double opposite_semiplane_coincidence_fraction = 0.0;
  double opposite_semiplane_coincidence_fraction_unflagged = 0.0;
  std::size_t crossing_violations = 0;  // non-flagged pairs, either invariant
  std::size_t exchange_violations = 0;
  std::size_t mirror_violations = 0;
  std::size_t flagged_violations = 0;
  double semiplane_penetration_fraction = 0.0;
  double sampled_mass_fraction = 0.0;
  std::vector<CoincidenceCount> configurations;
  std::vector<EquivarianceReport> equivariance;
};

struct EnsembleOptions {
  SamplingOptions sampling;
  TrajectoryOptions trajectory;
  std::vector<double> equivariance_planes;
};

// Samples n pairs, integrates them to the farther detector plane and counts
// coincidences for the given placements and for detector 1 mirrored across
// the axis; whichever of the two is on detector 2's side supplies the
// same-semiplane fraction.
EnsembleReport ensemble_coincidence_rate(const TwoPhotonState& state,
                                         const std::pair<DetectorPlacement, DetectorPlacement>& placements,
                                         std::size_t n, std::uint64_t seed, const EnsembleOptions& options = {},
                                         EnsembleTrajectories* trajectories_out = nullptr);

// Builds the report from an already integrated ensemble.
EnsembleReport summarize_ensemble(const TwoPhotonState& state, const EnsembleTrajectories& run,
                                  const std::pair<DetectorPlacement, DetectorPlacement>& placements,
                                  const std::vector<double>& equivariance_planes, double mass_fraction);

}  // namespace dslit
