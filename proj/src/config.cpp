#include "tomornn/config.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace tomornn {

namespace {

void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  check_keys(j,
             {"seed", "output_dir", "geometry", "grid", "simulation", "training",
              "detection", "sweep", "crlb"},
             "document root");
  c.seed = j.value("seed", c.seed);
  c.output_dir = j.value("output_dir", c.output_dir);

  if (j.contains("geometry")) {
    check_keys(j["geometry"],
               {"baselines", "freq_scale", "rayleigh_resolution", "count", "span"},
               "geometry");
    c.geometry = AcquisitionGeometry::from_json(j["geometry"]);
  }
  if (j.contains("grid")) {
    check_keys(j["grid"], {"s_min", "s_max", "spacing"}, "grid");
    c.grid = ElevationGrid::from_json(j["grid"]);
  }
  if (j.contains("simulation")) {
    const auto& s = j["simulation"];
    check_keys(s,
               {"count", "single_fraction", "amplitude_min", "amplitude_max",
                "snr_set_db"},
               "simulation");
    c.simulation.count = s.value("count", c.simulation.count);
    c.simulation.single_fraction =
        s.value("single_fraction", c.simulation.single_fraction);
    c.simulation.params.amplitude_min =
        s.value("amplitude_min", c.simulation.params.amplitude_min);
    c.simulation.params.amplitude_max =
        s.value("amplitude_max", c.simulation.params.amplitude_max);
    if (s.contains("snr_set_db"))
      c.simulation.params.snr_set_db = s["snr_set_db"].get<std::vector<double>>();
    if (c.simulation.params.snr_set_db.empty())
      throw ConfigError("config: simulation.snr_set_db must be nonempty");
    if (c.simulation.single_fraction < 0.0 || c.simulation.single_fraction > 1.0)
      throw ConfigError("config: simulation.single_fraction must be in [0, 1]");
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    check_keys(t,
               {"architecture", "depth", "epochs", "batch_size", "lr_initial",
                "lr_schedule", "lambda", "gate_std", "dt_scale", "step_scale",
                "w1_scale", "pwl_gain", "clip_norm", "validation_samples",
                "seed"},
               "training");
    if (t.contains("architecture"))
      c.training.arch = architecture_from_string(t["architecture"].get<std::string>());
    c.training.depth = t.value("depth", c.training.depth);
    c.training.epochs = t.value("epochs", c.training.epochs);
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.lr_initial = t.value("lr_initial", c.training.lr_initial);
    c.training.lambda = t.value("lambda", c.training.lambda);
    c.training.gate_std = t.value("gate_std", c.training.gate_std);
    c.training.dt_scale = t.value("dt_scale", c.training.dt_scale);
    c.training.step_scale = t.value("step_scale", c.training.step_scale);
    c.training.w1_scale = t.value("w1_scale", c.training.w1_scale);
    c.training.pwl_gain = t.value("pwl_gain", c.training.pwl_gain);
    c.training.clip_norm = t.value("clip_norm", c.training.clip_norm);
    c.training.validation_samples =
        t.value("validation_samples", c.training.validation_samples);
    c.training.seed = t.value("seed", c.seed);
    if (t.contains("lr_schedule")) {
      const auto& ls = t["lr_schedule"];
      check_keys(ls, {"policy", "factor", "every_epochs"}, "training.lr_schedule");
      c.training.lr_schedule.policy =
          ls.value("policy", c.training.lr_schedule.policy);
      c.training.lr_schedule.factor =
          ls.value("factor", c.training.lr_schedule.factor);
      c.training.lr_schedule.every_epochs =
          ls.value("every_epochs", c.training.lr_schedule.every_epochs);
    }
    c.training.validate();
  } else {
    c.training.seed = c.seed;
  }
  if (j.contains("detection")) {
    const auto& d = j["detection"];
    check_keys(d, {"max_order", "min_peak_fraction", "merge_radius", "order_penalty"},
               "detection");
    c.detection.max_order = d.value("max_order", c.detection.max_order);
    c.detection.min_peak_fraction =
        d.value("min_peak_fraction", c.detection.min_peak_fraction);
    c.detection.merge_radius = d.value("merge_radius", c.detection.merge_radius);
    c.detection.order_penalty = d.value("order_penalty", c.detection.order_penalty);
    if (c.detection.max_order < 1)
      throw ConfigError("config: detection.max_order must be >= 1");
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s,
               {"variable", "values", "trials", "snr_db", "alpha", "amp_ratio",
                "delta_phi", "s_ref", "perturb_geometries", "perturb_width",
                "scatter_samples", "alpha_min", "alpha_max", "force"},
               "sweep");
    if (s.contains("variable"))
      c.sweep.config.variable =
          sweep_variable_from_string(s["variable"].get<std::string>());
    if (s.contains("values"))
      c.sweep.config.values = s["values"].get<std::vector<double>>();
    c.sweep.config.trials = s.value("trials", c.sweep.config.trials);
    c.sweep.config.snr_db = s.value("snr_db", c.sweep.config.snr_db);
    c.sweep.config.alpha = s.value("alpha", c.sweep.config.alpha);
    c.sweep.config.amp_ratio = s.value("amp_ratio", c.sweep.config.amp_ratio);
    c.sweep.config.delta_phi = s.value("delta_phi", c.sweep.config.delta_phi);
    c.sweep.config.s_ref = s.value("s_ref", c.sweep.config.s_ref);
    c.sweep.config.perturb_geometries =
        s.value("perturb_geometries", c.sweep.config.perturb_geometries);
    c.sweep.config.perturb_width =
        s.value("perturb_width", c.sweep.config.perturb_width);
    c.sweep.scatter_samples = s.value("scatter_samples", c.sweep.scatter_samples);
    c.sweep.alpha_min = s.value("alpha_min", c.sweep.alpha_min);
    c.sweep.alpha_max = s.value("alpha_max", c.sweep.alpha_max);
    c.sweep.force = s.value("force", c.sweep.force);
  }
  if (j.contains("crlb")) {
    const auto& s = j["crlb"];
    check_keys(s, {"snr_db", "elevations", "subset_sizes"}, "crlb");
    if (s.contains("snr_db")) c.crlb.snr_db = s["snr_db"].get<std::vector<double>>();
    if (s.contains("elevations"))
      c.crlb.elevations = s["elevations"].get<std::vector<double>>();
    if (s.contains("subset_sizes"))
      c.crlb.subset_sizes = s["subset_sizes"].get<std::vector<int>>();
  }
  c.sweep.config.seed = c.seed;
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["geometry"] = geometry.to_json();
  j["grid"] = grid.to_json();
  j["simulation"] = {{"count", simulation.count},
                     {"single_fraction", simulation.single_fraction},
                     {"amplitude_min", simulation.params.amplitude_min},
                     {"amplitude_max", simulation.params.amplitude_max},
                     {"snr_set_db", simulation.params.snr_set_db}};
  j["training"] = {{"architecture", to_string(training.arch)},
                   {"depth", training.depth},
                   {"epochs", training.epochs},
                   {"batch_size", training.batch_size},
                   {"lr_initial", training.lr_initial},
                   {"lr_schedule",
                    {{"policy", training.lr_schedule.policy},
                     {"factor", training.lr_schedule.factor},
                     {"every_epochs", training.lr_schedule.every_epochs}}},
                   {"lambda", training.lambda},
                   {"gate_std", training.gate_std},
                   {"dt_scale", training.dt_scale},
                   {"step_scale", training.step_scale},
                   {"w1_scale", training.w1_scale},
                   {"pwl_gain", training.pwl_gain},
                   {"clip_norm", training.clip_norm},
                   {"validation_samples", training.validation_samples},
                   {"seed", training.seed}};
  j["detection"] = {{"max_order", detection.max_order},
                    {"min_peak_fraction", detection.min_peak_fraction},
                    {"merge_radius", detection.merge_radius},
                    {"order_penalty", detection.order_penalty}};
  j["sweep"] = {{"variable", to_string(sweep.config.variable)},
                {"values", sweep.config.values},
                {"trials", sweep.config.trials},
                {"snr_db", sweep.config.snr_db},
                {"alpha", sweep.config.alpha},
                {"amp_ratio", sweep.config.amp_ratio},
                {"delta_phi", sweep.config.delta_phi},
                {"s_ref", sweep.config.s_ref},
                {"perturb_geometries", sweep.config.perturb_geometries},
                {"perturb_width", sweep.config.perturb_width},
                {"scatter_samples", sweep.scatter_samples},
                {"alpha_min", sweep.alpha_min},
                {"alpha_max", sweep.alpha_max},
                {"force", sweep.force}};
  j["crlb"] = {{"snr_db", crlb.snr_db},
               {"elevations", crlb.elevations},
               {"subset_sizes", crlb.subset_sizes}};
  return j;
}

void ExperimentConfig::apply_desk_scale() {
  simulation.count = std::max<std::uint64_t>(1, simulation.count / 20);
  sweep.config.trials = std::max(1, sweep.config.trials / 20);
  sweep.config.perturb_geometries =
      std::max(1, sweep.config.perturb_geometries / 5);
}

}  // namespace tomornn
