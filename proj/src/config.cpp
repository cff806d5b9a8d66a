#include "dslit/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dslit/biphoton.hpp"
#include "json.hpp"

namespace dslit {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ValidationError(path + ": " + message);
}

// Reads the keys of one JSON object, remembering which were used so that
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void read(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number()) fail(path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_unsigned()) fail(path(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, int& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer()) fail(path(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) fail(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) fail(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (const auto* v = find(key)) {
      if (!v->is_array()) fail(path(key), "expected an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) fail(path(key), "expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }
  void read(const std::string& key, std::optional<std::vector<double>>& out) {
    if (j_.contains(key)) {
      std::vector<double> v;
      read(key, v);
      out = std::move(v);
    }
  }
  void read_size(const std::string& key, std::size_t& out) {
    std::uint64_t v = out;
    read(key, v);
    out = static_cast<std::size_t>(v);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) fail(path(item.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_placement(Section& parent, const std::string& key, DetectorPlacement& p) {
  const json* v = parent.find(key);
  if (!v) return;
  Section s(*v, parent.path(key));
  s.read("lateral_offset", p.lateral_offset);
  s.read("plane_distance", p.plane_distance);
  s.read("lens_diameter", p.lens_diameter);
  s.finish();
}

json write_placement(const DetectorPlacement& p) {
  return {{"lateral_offset", p.lateral_offset}, {"plane_distance", p.plane_distance},
          {"lens_diameter", p.lens_diameter}};
}

void read_plan(Section& parent, const std::string& key, AcquisitionPlan& plan) {
  const json* v = parent.find(key);
  if (!v) return;
  Section s(*v, parent.path(key));
  s.read_size("n_runs", plan.n_runs);
  s.read("run_duration", plan.run_duration);
  s.read("coincidence_window", plan.coincidence_window);
  s.read("background_delay", plan.background_delay);
  s.read("background_duration_ratio", plan.background_duration_ratio);
  s.finish();
}

json write_plan(const AcquisitionPlan& p) {
  return {{"n_runs", p.n_runs},
          {"run_duration", p.run_duration},
          {"coincidence_window", p.coincidence_window},
          {"background_delay", p.background_delay},
          {"background_duration_ratio", p.background_duration_ratio}};
}

ScenarioConfig read_scenario(const json& j, const std::string& path) {
  ScenarioConfig sc;
  Section s(j, path);
  s.read("name", sc.name);
  read_placement(s, "detector1", sc.detector1);
  read_placement(s, "detector2", sc.detector2);
  read_plan(s, "plan", sc.plan);
  s.read("singles_rate_1", sc.singles_rate_1);
  s.read("singles_rate_2", sc.singles_rate_2);
  s.read("target_net", sc.target_net);
  s.read("run_powers", sc.run_powers);
  s.read("reference_power", sc.reference_power);
  s.read("power_exponent", sc.power_exponent);
  s.finish();
  return sc;
}

json write_scenario(const ScenarioConfig& sc) {
  json j = {{"name", sc.name},
            {"detector1", write_placement(sc.detector1)},
            {"detector2", write_placement(sc.detector2)},
            {"plan", write_plan(sc.plan)},
            {"singles_rate_1", sc.singles_rate_1},
            {"singles_rate_2", sc.singles_rate_2},
            {"target_net", sc.target_net}};
  if (sc.run_powers) j["run_powers"] = *sc.run_powers;
  j["reference_power"] = sc.reference_power;
  j["power_exponent"] = sc.power_exponent;
  return j;
}

template <typename Check>
void check(const std::string& path, Check&& ok, const std::string& message) {
  if (!ok()) fail(path, message);
}

void check_positive(const std::string& path, double v) {
  if (!(v > 0) || !std::isfinite(v)) fail(path, "must be finite and positive");
}

void check_placement(const std::string& path, const DetectorPlacement& p) {
  try {
    p.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

}  // namespace

std::vector<double> PatternConfig::scan_offsets() const {
  if (offsets) return *offsets;
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((scan.stop - scan.start) / scan.step + 1e-9)) + 1;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(scan.start + static_cast<double>(i) * scan.step);
  return out;
}

ExperimentConfig ExperimentConfig::reference() {
  ExperimentConfig e;
  // Same-semiplane placements. Singles rates are placeholders chosen so that
  // the expected accidental counts are 11 (A) and 77.5 (B), which with the
  // target nets give sigma = 10 and 14.
  ScenarioConfig a;
  a.name = "A";
  a.detector1 = {-0.017, 1.21, 6e-3};
  a.detector2 = {-0.055, 1.5, 6e-3};
  a.plan = {35, 1800.0, 2.6e-9, 16e-9, 1.0};
  a.singles_rate_1 = a.singles_rate_2 = 259.14;
  a.target_net = 78.0;
  ScenarioConfig b;
  b.name = "B";
  b.detector1 = {-0.0444, 1.21, 6e-3};
  b.detector2 = {-0.117, 1.5, 6e-3};
  b.plan = {17, 3600.0, 2.6e-9, 16e-9, 1.0};
  b.singles_rate_1 = b.singles_rate_2 = 697.89;
  b.target_net = 41.0;
  e.scenarios = {a, b};
  return e;
}

CompareConfig CompareConfig::reference() {
  CompareConfig c;
  c.configurations = {
      {"same_A", {-0.017, 1.21, 6e-3}, {-0.055, 1.5, 6e-3}},
      {"same_B", {-0.0444, 1.21, 6e-3}, {-0.117, 1.5, 6e-3}},
      {"opposite_A", {0.017, 1.21, 6e-3}, {-0.055, 1.5, 6e-3}},
      {"opposite_B", {0.0444, 1.21, 6e-3}, {-0.117, 1.5, 6e-3}},
      {"opposite_peak", {0.0422546, 1.21, 6e-3}, {-0.055, 1.5, 6e-3}},
  };
  return c;
}

void RunConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    fail("schema_version", "unsupported version " + std::to_string(schema_version) + " (expected " +
                               std::to_string(kConfigSchemaVersion) + ")");
  try {
    geometry.validate();
  } catch (const std::exception& e) {
    fail("geometry", e.what());
  }

  check("engine.fresnel_quadrature_order",
        [&] { return engine.fresnel_quadrature_order >= 2 && engine.fresnel_quadrature_order <= kMaxQuadratureOrder; },
        "must be in [2, 1024]");
  check("engine.aperture_quadrature_order",
        [&] { return engine.aperture_quadrature_order >= 2 && engine.aperture_quadrature_order <= 1024; },
        "must be in [2, 1024]");
  check("engine.slit_profile", [&] { return engine.slit_profile == "rect" || engine.slit_profile == "gaussian"; },
        "must be \"rect\" or \"gaussian\"");

  check_placement("pattern.fixed_detector", pattern.fixed_detector);
  check_positive("pattern.moving_distance", pattern.moving_distance);
  check_positive("pattern.lens_diameter", pattern.lens_diameter);
  check_placement("pattern.lens_diameter", {0.0, pattern.moving_distance, pattern.lens_diameter});
  if (pattern.offsets) {
    if (pattern.offsets->empty()) fail("pattern.offsets", "must not be empty");
    for (double o : *pattern.offsets)
      if (!std::isfinite(o)) fail("pattern.offsets", "must be finite");
  } else {
    check_positive("pattern.scan.step", pattern.scan.step);
    check("pattern.scan", [&] { return std::isfinite(pattern.scan.start) && pattern.scan.stop >= pattern.scan.start; },
          "stop must not be below start");
    check("pattern.scan", [&] { return (pattern.scan.stop - pattern.scan.start) / pattern.scan.step < 1e6; },
          "more than 10^6 scan points");
  }

  check("dbb.n_pairs", [&] { return dbb.n_pairs >= 1; }, "must be at least 1");
  check_placement("dbb.detector1", dbb.detector1);
  check_placement("dbb.detector2", dbb.detector2);
  check_positive("dbb.z_start", dbb.z_start);
  check_positive("dbb.step", dbb.step);
  check_positive("dbb.tolerance", dbb.tolerance);
  check("dbb.min_step", [&] { return dbb.min_step > 0 && dbb.min_step <= dbb.step; }, "must be in (0, dbb.step]");
  check("dbb.max_steps", [&] { return dbb.max_steps >= 1; }, "must be at least 1");
  check_positive("dbb.node_floor", dbb.node_floor);
  check_positive("dbb.v_max", dbb.v_max);
  check_positive("dbb.sampling_extent", dbb.sampling_extent);
  check("dbb.sampling_cell", [&] { return dbb.sampling_cell > 0 && dbb.sampling_cell < dbb.sampling_extent; },
        "must be positive and below dbb.sampling_extent");
  for (double z : dbb.equivariance_planes)
    check("dbb.equivariance_planes", [&] { return std::isfinite(z) && z > dbb.z_start; }, "planes must lie beyond z_start");
  for (const auto* d : {&dbb.detector1, &dbb.detector2})
    check("dbb", [&] { return d->plane_distance > dbb.z_start; }, "detector planes must lie beyond z_start");

  check("experiment.scenarios", [&] { return !experiment.scenarios.empty(); }, "must not be empty");
  std::set<std::string> names;
  for (std::size_t i = 0; i < experiment.scenarios.size(); ++i) {
    const auto& sc = experiment.scenarios[i];
    const std::string p = "experiment.scenarios[" + std::to_string(i) + "]";
    check(p + ".name", [&] { return !sc.name.empty() && names.insert(sc.name).second; }, "must be unique and non-empty");
    check_placement(p + ".detector1", sc.detector1);
    check_placement(p + ".detector2", sc.detector2);
    try {
      sc.plan.validate();
    } catch (const std::exception& e) {
      fail(p + ".plan", e.what());
    }
    check(p + ".singles_rate_1", [&] { return sc.singles_rate_1 >= 0 && std::isfinite(sc.singles_rate_1); }, "must be >= 0");
    check(p + ".singles_rate_2", [&] { return sc.singles_rate_2 >= 0 && std::isfinite(sc.singles_rate_2); }, "must be >= 0");
    check_positive(p + ".target_net", sc.target_net);
    check_positive(p + ".reference_power", sc.reference_power);
    check(p + ".power_exponent", [&] { return std::isfinite(sc.power_exponent); }, "must be finite");
    if (sc.run_powers) {
      check(p + ".run_powers", [&] { return sc.run_powers->size() == sc.plan.n_runs; }, "needs one entry per run");
      for (double w : *sc.run_powers) check_positive(p + ".run_powers", w);
    }
  }
  check_placement("experiment.peak_detector1", experiment.peak_detector1);
  check_placement("experiment.peak_detector2", experiment.peak_detector2);
  check("experiment.seed_repeats", [&] { return experiment.seed_repeats >= 1; }, "must be at least 1");

  check("compare.configurations", [&] { return !compare.configurations.empty(); }, "must not be empty");
  for (std::size_t i = 0; i < compare.configurations.size(); ++i) {
    const auto& c = compare.configurations[i];
    const std::string p = "compare.configurations[" + std::to_string(i) + "]";
    check(p + ".name", [&] { return !c.name.empty(); }, "must not be empty");
    check_placement(p + ".detector1", c.detector1);
    check_placement(p + ".detector2", c.detector2);
  }
  check("compare.calibration_scenario", [&] { return names.count(compare.calibration_scenario) == 1; },
        "must name one of experiment.scenarios");
  check("output.directory", [&] { return !output.directory.empty(); }, "must not be empty");
}

const ScenarioConfig& RunConfig::scenario(const std::string& name) const {
  for (const auto& sc : experiment.scenarios)
    if (sc.name == name) return sc;
  throw ValidationError("experiment.scenarios: no scenario named \"" + name + "\"");
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: not valid JSON (") + e.what() + ")");
  }
  RunConfig c;
  Section top(root, "");
  top.read("schema_version", c.schema_version);
  if (!root.contains("schema_version")) fail("schema_version", "missing");
  if (c.schema_version != kConfigSchemaVersion)
    fail("schema_version", "unsupported version " + std::to_string(c.schema_version));
  top.read("seed", c.seed);

  if (const json* g = top.find("geometry")) {
    Section s(*g, "geometry");
    s.read("wavelength", c.geometry.wavelength);
    s.read("slit_separation", c.geometry.slit_separation);
    s.read("slit_width", c.geometry.slit_width);
    s.read("incidence_angle_A", c.geometry.incidence_angle_A);
    s.read("incidence_angle_B", c.geometry.incidence_angle_B);
    s.finish();
  }
  if (const json* e = top.find("engine")) {
    Section s(*e, "engine");
    s.read_size("fresnel_quadrature_order", c.engine.fresnel_quadrature_order);
    s.read_size("aperture_quadrature_order", c.engine.aperture_quadrature_order);
    s.read("slit_profile", c.engine.slit_profile);
    s.finish();
  }
  if (const json* p = top.find("pattern")) {
    Section s(*p, "pattern");
    read_placement(s, "fixed_detector", c.pattern.fixed_detector);
    s.read("moving_distance", c.pattern.moving_distance);
    s.read("lens_diameter", c.pattern.lens_diameter);
    if (const json* scan = s.find("scan")) {
      Section r(*scan, "pattern.scan");
      r.read("start", c.pattern.scan.start);
      r.read("stop", c.pattern.scan.stop);
      r.read("step", c.pattern.scan.step);
      r.finish();
    }
    s.read("offsets", c.pattern.offsets);
    s.finish();
  }
  if (const json* d = top.find("dbb")) {
    Section s(*d, "dbb");
    s.read_size("n_pairs", c.dbb.n_pairs);
    read_placement(s, "detector1", c.dbb.detector1);
    read_placement(s, "detector2", c.dbb.detector2);
    s.read("z_start", c.dbb.z_start);
    s.read("step", c.dbb.step);
    s.read("tolerance", c.dbb.tolerance);
    s.read("min_step", c.dbb.min_step);
    s.read_size("max_steps", c.dbb.max_steps);
    s.read("node_floor", c.dbb.node_floor);
    s.read("v_max", c.dbb.v_max);
    s.read("sampling_extent", c.dbb.sampling_extent);
    s.read("sampling_one_per_side", c.dbb.sampling_one_per_side);
    s.read("sampling_cell", c.dbb.sampling_cell);
    s.read("equivariance_planes", c.dbb.equivariance_planes);
    s.read("dump_trajectories", c.dbb.dump_trajectories);
    s.finish();
  }
  if (const json* e = top.find("experiment")) {
    Section s(*e, "experiment");
    if (const json* list = s.find("scenarios")) {
      if (!list->is_array()) fail("experiment.scenarios", "expected an array");
      c.experiment.scenarios.clear();
      for (std::size_t i = 0; i < list->size(); ++i)
        c.experiment.scenarios.push_back(read_scenario((*list)[i], "experiment.scenarios[" + std::to_string(i) + "]"));
    }
    read_placement(s, "peak_detector1", c.experiment.peak_detector1);
    read_placement(s, "peak_detector2", c.experiment.peak_detector2);
    s.read_size("seed_repeats", c.experiment.seed_repeats);
    s.read("dbb_ensemble", c.experiment.dbb_ensemble);
    s.finish();
  }
  if (const json* cmp = top.find("compare")) {
    Section s(*cmp, "compare");
    if (const json* list = s.find("configurations")) {
      if (!list->is_array()) fail("compare.configurations", "expected an array");
      c.compare.configurations.clear();
      for (std::size_t i = 0; i < list->size(); ++i) {
        const std::string p = "compare.configurations[" + std::to_string(i) + "]";
        Section r((*list)[i], p);
        NamedConfiguration nc;
        r.read("name", nc.name);
        read_placement(r, "detector1", nc.detector1);
        read_placement(r, "detector2", nc.detector2);
        r.finish();
        c.compare.configurations.push_back(nc);
      }
    }
    s.read("calibration_scenario", c.compare.calibration_scenario);
    s.finish();
  }
  if (const json* o = top.find("output")) {
    Section s(*o, "output");
    s.read("directory", c.output.directory);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("--config: cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const RunConfig& c, int indent) {
  json pattern = {{"fixed_detector", write_placement(c.pattern.fixed_detector)},
                  {"moving_distance", c.pattern.moving_distance},
                  {"lens_diameter", c.pattern.lens_diameter},
                  {"scan", {{"start", c.pattern.scan.start}, {"stop", c.pattern.scan.stop}, {"step", c.pattern.scan.step}}}};
  if (c.pattern.offsets) pattern["offsets"] = *c.pattern.offsets;

  json scenarios = json::array();
  for (const auto& sc : c.experiment.scenarios) scenarios.push_back(write_scenario(sc));
  json configurations = json::array();
  for (const auto& nc : c.compare.configurations)
    configurations.push_back({{"name", nc.name},
                              {"detector1", write_placement(nc.detector1)},
                              {"detector2", write_placement(nc.detector2)}});

  const json root = {
      {"schema_version", c.schema_version},
      {"seed", c.seed},
      {"geometry",
       {{"wavelength", c.geometry.wavelength},
        {"slit_separation", c.geometry.slit_separation},
        {"slit_width", c.geometry.slit_width},
        {"incidence_angle_A", c.geometry.incidence_angle_A},
        {"incidence_angle_B", c.geometry.incidence_angle_B}}},
      {"engine",
       {{"fresnel_quadrature_order", c.engine.fresnel_quadrature_order},
        {"aperture_quadrature_order", c.engine.aperture_quadrature_order},
        {"slit_profile", c.engine.slit_profile}}},
      {"pattern", pattern},
      {"dbb",
       {{"n_pairs", c.dbb.n_pairs},
        {"detector1", write_placement(c.dbb.detector1)},
        {"detector2", write_placement(c.dbb.detector2)},
        {"z_start", c.dbb.z_start},
        {"step", c.dbb.step},
        {"tolerance", c.dbb.tolerance},
        {"min_step", c.dbb.min_step},
        {"max_steps", c.dbb.max_steps},
        {"node_floor", c.dbb.node_floor},
        {"v_max", c.dbb.v_max},
        {"sampling_extent", c.dbb.sampling_extent},
        {"sampling_one_per_side", c.dbb.sampling_one_per_side},
        {"sampling_cell", c.dbb.sampling_cell},
        {"equivariance_planes", c.dbb.equivariance_planes},
        {"dump_trajectories", c.dbb.dump_trajectories}}},
      {"experiment",
       {{"scenarios", scenarios},
        {"peak_detector1", write_placement(c.experiment.peak_detector1)},
        {"peak_detector2", write_placement(c.experiment.peak_detector2)},
        {"seed_repeats", c.experiment.seed_repeats},
        {"dbb_ensemble", c.experiment.dbb_ensemble}}},
      {"compare", {{"configurations", configurations}, {"calibration_scenario", c.compare.calibration_scenario}}},
      {"output", {{"directory", c.output.directory}}},
  };
  return root.dump(indent);
}

}  // namespace dslit
