#include "dslit/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <locale>
#include <set>
#include <sstream>

#include "dslit/sqm_pattern.hpp"

namespace dslit {

namespace {

using json = nlohmann::ordered_json;

std::filesystem::path output_dir(const RunConfig& config) {
  const std::filesystem::path dir(config.output.directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ValidationError("output.directory: cannot create " + dir.string());
  return dir;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.imbue(std::locale::classic());
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

json placement_json(const DetectorPlacement& p) {
  return {{"lateral_offset", p.lateral_offset}, {"plane_distance", p.plane_distance},
          {"lens_diameter", p.lens_diameter}};
}

json fit_json(const GoodnessOfFit& f) {
  return {{"chi2", f.chi2}, {"dof", f.dof}, {"chi2_per_dof", f.chi2_per_dof}, {"sup_norm", f.sup_norm},
          {"bins_used", f.bins_used}};
}

json record_json(const CountRecord& r) {
  return {{"raw_coincidences", r.raw_coincidences},
          {"background_coincidences", r.background_coincidences},
          {"raw_duration", r.raw_duration},
          {"background_duration", r.background_duration},
          {"weight", r.weight},
          {"net", r.net},
          {"net_sigma", r.net_sigma},
          {"significance", r.significance}};
}

bool same_semiplane(const DetectorPlacement& a, const DetectorPlacement& b) {
  return semiplane(a.lateral_offset) == semiplane(b.lateral_offset);
}

std::uint64_t scenario_seed(std::uint64_t seed, std::size_t scenario, std::size_t repeat) {
  // Distinct streams per (scenario, repeat); the run streams hash these again.
  return seed + 0x9e3779b97f4a7c15ull * (scenario + 1) + 0xbf58476d1ce4e5b9ull * repeat;
}

}  // namespace

std::string tool_version() { return std::string("dslit ") + DSLIT_VERSION; }

std::vector<std::string> metadata_lines(const RunConfig& config) {
  return {"tool_version: " + tool_version(), "config: " + serialize_config(config, -1)};
}

json metadata_json(const RunConfig& config) {
  return {{"tool_version", tool_version()}, {"config", json::parse(serialize_config(config, -1))}};
}

TwoPhotonState make_state(const RunConfig& config) {
  const auto profile = config.engine.slit_profile == "gaussian" ? SlitProfile::gaussian : SlitProfile::rect;
  return TwoPhotonState::from_geometry(config.geometry, profile, config.engine.fresnel_quadrature_order);
}

EnsembleOptions make_ensemble_options(const RunConfig& config) {
  const auto& d = config.dbb;
  EnsembleOptions o;
  o.sampling.z_start = d.z_start;
  o.sampling.extent = d.sampling_extent;
  o.sampling.one_per_side = d.sampling_one_per_side;
  o.sampling.cell_width = d.sampling_cell;
  o.trajectory.z_start = d.z_start;
  o.trajectory.step = d.step;
  o.trajectory.tolerance = d.tolerance;
  o.trajectory.min_step = d.min_step;
  o.trajectory.max_steps = d.max_steps;
  o.trajectory.velocity.node_floor = d.node_floor;
  o.trajectory.velocity.v_max = d.v_max;
  o.equivariance_planes = d.equivariance_planes;
  return o;
}

json to_json(const EnsembleReport& r) {
  json configs = json::array();
  for (const auto& c : r.configurations)
    configs.push_back({{"detector1", placement_json(c.detector1)},
                       {"detector2", placement_json(c.detector2)},
                       {"coincidences", c.coincidences},
                       {"coincidences_unflagged", c.coincidences_unflagged},
                       {"fraction", c.fraction},
                       {"fraction_unflagged", c.fraction_unflagged}});
  json equiv = json::array();
  for (const auto& e : r.equivariance)
    equiv.push_back({{"z", e.z},
                     {"histogram", {{"lo", e.histogram.lo}, {"hi", e.histogram.hi}, {"bins", e.histogram.bins}}},
                     {"marginal_x1", fit_json(e.marginal_x1)},
                     {"marginal_x2", fit_json(e.marginal_x2)},
                     {"joint", fit_json(e.joint)}});
  return {{"n_pairs", r.n_pairs},
          {"n_flagged", r.n_flagged},
          {"same_semiplane_coincidence_fraction", r.same_semiplane_coincidence_fraction},
          {"same_semiplane_coincidence_fraction_unflagged", r.same_semiplane_coincidence_fraction_unflagged},
          {"opposite_semiplane_coincidence_fraction", r.opposite_semiplane_coincidence_fraction},
          {"opposite_semiplane_coincidence_fraction_unflagged", r.opposite_semiplane_coincidence_fraction_unflagged},
          {"crossing_violations", r.crossing_violations},
          {"exchange_violations", r.exchange_violations},
          {"mirror_violations", r.mirror_violations},
          {"flagged_violations", r.flagged_violations},
          {"semiplane_penetration_fraction", r.semiplane_penetration_fraction},
          {"sampled_mass_fraction", r.sampled_mass_fraction},
          {"configurations", configs},
          {"equivariance", equiv}};
}

json cmd_pattern(const RunConfig& config) {
  config.validate();
  const auto dir = output_dir(config);
  const auto& p = config.pattern;
  ScanOptions options;
  options.lens_diameter = p.lens_diameter;
  options.quadrature_order = config.engine.aperture_quadrature_order;
  const auto pattern = pattern_scan(p.fixed_detector, p.scan_offsets(), p.moving_distance, config.geometry, options);

  {
    auto out = open_output(dir / "pattern.csv");
    write_pattern_csv(out, pattern, metadata_lines(config));
  }

  const auto& g = config.geometry;
  const auto& peak = pattern.peak();
  // Interference maxima inside the scan, from the sampled rates.
  std::vector<double> maxima;
  for (std::size_t i = 1; i + 1 < pattern.points.size(); ++i) {
    const auto& pts = pattern.points;
    if (pts[i].rate > pts[i - 1].rate && pts[i].rate >= pts[i + 1].rate && pts[i].rate > 0.01) maxima.push_back(pts[i].offset);
  }
  const double lo = pattern.points.front().angle;
  const double hi = pattern.points.back().angle;
  json zeros = json::array();
  for (double z : envelope_zeros(g.incidence_angle_A, g, std::min(lo, hi), std::max(lo, hi)))
    zeros.push_back({{"angle_rad", z}, {"offset_m", position_from_angle(z, p.moving_distance)}});
  const double period_sin = g.wavelength / g.slit_separation;
  const double period_offset = p.moving_distance * period_sin / std::pow(std::cos(peak.angle), 3);

  json summary = metadata_json(config);
  summary["command"] = "pattern";
  summary["points"] = pattern.points.size();
  summary["normalization"] = pattern.normalization;
  summary["peak"] = {{"offset_m", peak.offset}, {"angle_rad", peak.angle}, {"rate", peak.rate}};
  summary["expected_peak_offset_m"] = position_from_angle(g.incidence_angle_A, p.moving_distance);
  summary["fringe_period"] = {{"sin_theta", period_sin}, {"offset_at_peak_m", period_offset}};
  summary["local_maxima_offsets_m"] = maxima;
  summary["envelope_zeros"] = zeros;
  write_json(dir / "pattern_summary.json", summary);
  return summary;
}

json cmd_dbb(const RunConfig& config) {
  config.validate();
  const auto dir = output_dir(config);
  const auto state = make_state(config);
  const auto options = make_ensemble_options(config);
  EnsembleTrajectories run;
  const auto report = ensemble_coincidence_rate(state, {config.dbb.detector1, config.dbb.detector2},
                                                config.dbb.n_pairs, config.seed, options, &run);
  json summary = metadata_json(config);
  summary["command"] = "dbb";
  summary["seed"] = config.seed;
  summary["report"] = to_json(report);
  std::size_t abandoned = 0, steps = 0;
  for (const auto& o : run.outcomes) {
    abandoned += o.abandoned;
    steps += o.steps;
  }
  summary["abandoned_pairs"] = abandoned;
  summary["mean_steps_per_pair"] = static_cast<double>(steps) / static_cast<double>(run.outcomes.size());
  write_json(dir / "dbb_report.json", summary);

  if (config.dbb.dump_trajectories) {
    auto out = open_output(dir / "dbb_trajectories.csv");
    out.precision(17);
    for (const auto& m : metadata_lines(config)) out << "# " << m << '\n';
    out << "pair,z,x1,x2,flagged\n";
    for (std::size_t i = 0; i < run.initial.size(); ++i) {
      const int flagged = run.outcomes[i].flagged ? 1 : 0;
      out << i << ',' << config.dbb.z_start << ',' << run.initial[i].first << ',' << run.initial[i].second << ','
          << flagged << '\n';
      for (std::size_t p = 0; p < run.probe_z.size(); ++p)
        out << i << ',' << run.probe_z[p] << ',' << run.positions[p][i].first << ',' << run.positions[p][i].second
            << ',' << flagged << '\n';
    }
  }
  return summary;
}

ScenarioPrediction predict_scenario(const RunConfig& config, const ScenarioConfig& sc) {
  const auto& g = config.geometry;
  const std::size_t order = config.engine.aperture_quadrature_order;
  ScenarioPrediction p;
  p.sqm_rate = aperture_averaged_rate(sc.detector1, sc.detector2, g, order);
  p.peak_rate = aperture_averaged_rate(config.experiment.peak_detector1, config.experiment.peak_detector2, g, order);
  if (!(p.sqm_rate > 0)) throw CalibrationError("scenario " + sc.name + ": zero SQM rate at the scenario placement");
  // Peak counts per run that make the scenario placement expect target_net
  // over the whole plan.
  const double n = static_cast<double>(sc.plan.n_runs);
  p.peak_counts_per_run = sc.target_net * p.peak_rate / (p.sqm_rate * n);
  p.scale = calibrate(p.peak_rate, p.peak_counts_per_run, sc.plan);
  p.true_rate_hz = p.scale.expected_counts(p.sqm_rate, 1.0);
  p.accidental_rate_hz = accidental_rate(sc.singles_rate_1, sc.singles_rate_2, sc.plan.coincidence_window);
  const double total = sc.plan.total_time();
  const double ratio = 1.0 / sc.plan.background_duration_ratio;
  p.expected_net = p.true_rate_hz * total;
  p.expected_background = p.accidental_rate_hz * total * sc.plan.background_duration_ratio;
  p.expected_sigma = std::sqrt(p.expected_net + p.accidental_rate_hz * total + p.expected_background * ratio * ratio);
  p.dbb_expected_net = same_semiplane(sc.detector1, sc.detector2) ? 0.0 : p.expected_net;
  return p;
}

CountRecord simulate_scenario(const ScenarioPrediction& p, const ScenarioConfig& sc, std::uint64_t seed,
                              RunSeries* runs_out) {
  RunSeries runs = simulate_runs(p.true_rate_hz, p.accidental_rate_hz, sc.plan, seed);
  if (sc.run_powers) {
    // A run at relative power P collects P^exponent times the signal.
    runs.powers = sc.run_powers;
    for (std::size_t i = 0; i < runs.runs.size(); ++i) {
      const double f = std::pow((*sc.run_powers)[i] / sc.reference_power, sc.power_exponent);
      const auto& r = runs.runs[i];
      RunSeries one;
      one.runs = simulate_runs(p.true_rate_hz * f, p.accidental_rate_hz, {1, r.raw_duration, sc.plan.coincidence_window,
                                                                         sc.plan.background_delay,
                                                                         sc.plan.background_duration_ratio},
                               seed ^ (0xd1b54a32d192ed03ull * (i + 1)))
                     .runs;
      runs.runs[i] = one.runs.front();
    }
    runs = power_correct(runs, sc.reference_power, sc.power_exponent);
  }
  if (runs_out) *runs_out = runs;
  return aggregate_runs(runs);
}

json cmd_experiment(const RunConfig& config) {
  config.validate();
  const auto dir = output_dir(config);
  auto runs_out = open_output(dir / "experiment_runs.jsonl");

  json scenarios = json::array();
  std::vector<std::pair<std::string, CountRecord>> rows;
  const auto state = make_state(config);
  for (std::size_t s = 0; s < config.experiment.scenarios.size(); ++s) {
    const auto& sc = config.experiment.scenarios[s];
    const auto p = predict_scenario(config, sc);
    RunSeries runs;
    const auto record = simulate_scenario(p, sc, scenario_seed(config.seed, s, 0), &runs);
    for (std::size_t r = 0; r < runs.runs.size(); ++r) write_record_jsonl(runs_out, runs.runs[r], sc.name, r);
    rows.emplace_back(sc.name, record);

    std::vector<double> sig(config.experiment.seed_repeats);
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < sig.size(); ++k)
      sig[k] = simulate_scenario(p, sc, scenario_seed(config.seed, s, k), nullptr).significance;
    double mean = 0, var = 0;
    for (double v : sig) mean += v;
    mean /= static_cast<double>(sig.size());
    for (double v : sig) var += (v - mean) * (v - mean);
    const double sd = sig.size() > 1 ? std::sqrt(var / static_cast<double>(sig.size() - 1)) : 0.0;

    json entry = {{"name", sc.name},
                  {"detector1", placement_json(sc.detector1)},
                  {"detector2", placement_json(sc.detector2)},
                  {"same_semiplane", same_semiplane(sc.detector1, sc.detector2)},
                  {"sqm_rate", p.sqm_rate},
                  {"peak_rate", p.peak_rate},
                  {"counts_per_unit_rate_per_30min", p.scale.counts_per_unit_rate_per_30min},
                  {"peak_counts_per_run", p.peak_counts_per_run},
                  {"true_rate_hz", p.true_rate_hz},
                  {"accidental_rate_hz", p.accidental_rate_hz},
                  {"expected_net", p.expected_net},
                  {"expected_background", p.expected_background},
                  {"expected_sigma", p.expected_sigma},
                  {"expected_significance", p.expected_net / p.expected_sigma},
                  {"simulated", record_json(record)},
                  {"significance_over_seeds",
                   {{"repeats", sig.size()}, {"mean", mean}, {"sd", sd},
                    {"min", *std::min_element(sig.begin(), sig.end())},
                    {"max", *std::max_element(sig.begin(), sig.end())}}},
                  {"dbb_expected_net", p.dbb_expected_net}};
    if (config.experiment.dbb_ensemble) {
      const auto report = ensemble_coincidence_rate(state, {sc.detector1, sc.detector2}, config.dbb.n_pairs,
                                                    config.seed, make_ensemble_options(config));
      const double f = same_semiplane(sc.detector1, sc.detector2) ? report.same_semiplane_coincidence_fraction
                                                                  : report.opposite_semiplane_coincidence_fraction;
      const double p_sqm = aperture_coincidence_probability(sc.detector1, sc.detector2, config.geometry,
                                                            config.engine.aperture_quadrature_order);
      entry["dbb_ensemble"] = {{"fraction", f},
                               {"sqm_probability", p_sqm},
                               {"expected_net", p.expected_net * f / p_sqm},
                               {"report", to_json(report)}};
    }
    scenarios.push_back(entry);
  }

  {
    auto out = open_output(dir / "experiment_summary.csv");
    out.precision(12);
    for (const auto& m : metadata_lines(config)) out << "# " << m << '\n';
    out << "scenario,same_semiplane,sqm_expected_net,dbb_expected_net,expected_sigma,raw_coincidences,"
           "background_coincidences,net,net_sigma,significance,mean_significance_over_seeds\n";
    for (std::size_t s = 0; s < rows.size(); ++s) {
      const auto& e = scenarios[s];
      const auto& r = rows[s].second;
      out << rows[s].first << ',' << (e["same_semiplane"].get<bool>() ? 1 : 0) << ','
          << e["expected_net"].get<double>() << ',' << e["dbb_expected_net"].get<double>() << ','
          << e["expected_sigma"].get<double>() << ',' << r.raw_coincidences << ',' << r.background_coincidences
          << ',' << r.net << ',' << r.net_sigma << ',' << r.significance << ','
          << e["significance_over_seeds"]["mean"].get<double>() << '\n';
    }
  }

  json summary = metadata_json(config);
  summary["command"] = "experiment";
  summary["scenarios"] = scenarios;
  write_json(dir / "experiment_summary.json", summary);
  return summary;
}

json cmd_compare(const RunConfig& config) {
  config.validate();
  const auto dir = output_dir(config);
  const auto& g = config.geometry;
  const std::size_t order = config.engine.aperture_quadrature_order;
  const auto& sc = config.scenario(config.compare.calibration_scenario);
  const auto p = predict_scenario(config, sc);
  const double total = sc.plan.total_time();
  const double bg = p.accidental_rate_hz * total;
  const double ratio = 1.0 / sc.plan.background_duration_ratio;

  // One ensemble serves every configuration: probes at all detector planes.
  const auto state = make_state(config);
  auto options = make_ensemble_options(config);
  const auto initial = sample_initial_pairs(state, config.dbb.n_pairs, config.seed, options.sampling);
  std::vector<double> probes = options.equivariance_planes;
  for (const auto& c : config.compare.configurations) {
    probes.push_back(c.detector1.plane_distance);
    probes.push_back(c.detector2.plane_distance);
  }
  probes.push_back(config.experiment.peak_detector1.plane_distance);
  probes.push_back(config.experiment.peak_detector2.plane_distance);
  const auto run = integrate_ensemble(state, initial, probes, options.trajectory);
  const double n = static_cast<double>(run.initial.size());

  // Counts per unit probability, fixed at the peak configuration.
  const auto& pk1 = config.experiment.peak_detector1;
  const auto& pk2 = config.experiment.peak_detector2;
  const double peak_counts = p.scale.expected_counts(p.peak_rate, total);
  const double per_probability = peak_counts / aperture_coincidence_probability(pk1, pk2, g, order);

  auto out = open_output(dir / "compare.csv");
  out.precision(12);
  for (const auto& m : metadata_lines(config)) out << "# " << m << '\n';
  out << "configuration,detector1_offset_m,detector1_distance_m,detector2_offset_m,detector2_distance_m,"
         "same_semiplane,sqm_rate,sqm_probability,dbb_fraction,dbb_fraction_err,dbb_fraction_unflagged,"
         "sqm_expected_net,dbb_ensemble_expected_net,dbb_ensemble_expected_net_err,dbb_rule_expected_net,"
         "expected_sigma,discriminating_statistic\n";
  json rows = json::array();
  for (const auto& c : config.compare.configurations) {
    const double rate = aperture_averaged_rate(c.detector1, c.detector2, g, order);
    const double prob = aperture_coincidence_probability(c.detector1, c.detector2, g, order);
    const auto count = count_coincidences(run, c.detector1, c.detector2);
    const double f = count.fraction;
    const double f_err = std::sqrt(std::max(f, 1.0 / n) * (1.0 - f) / n);
    const bool same = same_semiplane(c.detector1, c.detector2);
    const double sqm_net = p.scale.expected_counts(rate, total);
    const double dbb_rule = same ? 0.0 : sqm_net;
    const double sigma = std::sqrt(sqm_net + bg + bg * ratio * ratio);
    const double statistic = (sqm_net - dbb_rule) / sigma;
    out << c.name << ',' << c.detector1.lateral_offset << ',' << c.detector1.plane_distance << ','
        << c.detector2.lateral_offset << ',' << c.detector2.plane_distance << ',' << (same ? 1 : 0) << ',' << rate
        << ',' << prob << ',' << f << ',' << f_err << ',' << count.fraction_unflagged << ',' << sqm_net << ','
        << per_probability * f << ',' << per_probability * f_err << ',' << dbb_rule << ',' << sigma << ','
        << statistic << '\n';
    rows.push_back({{"configuration", c.name},
                    {"same_semiplane", same},
                    {"sqm_rate", rate},
                    {"sqm_probability", prob},
                    {"dbb_fraction", f},
                    {"dbb_fraction_err", f_err},
                    {"sqm_expected_net", sqm_net},
                    {"dbb_ensemble_expected_net", per_probability * f},
                    {"dbb_ensemble_expected_net_err", per_probability * f_err},
                    {"dbb_rule_expected_net", dbb_rule},
                    {"discriminating_statistic", statistic}});
  }
  json summary = metadata_json(config);
  summary["command"] = "compare";
  summary["calibration_scenario"] = sc.name;
  summary["rows"] = rows;
  write_json(dir / "compare.json", summary);
  return summary;
}

}  // namespace dslit
