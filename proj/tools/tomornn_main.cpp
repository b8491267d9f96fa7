// Command-line front end: simulate / train / sweep / scatter / crlb / inspect.
//
// Exit codes: 0 success, 2 config error, 3 numeric or I/O failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tomornn/config.hpp"
#include "tomornn/evaluation.hpp"
#include "tomornn/geometry.hpp"
#include "tomornn/networks.hpp"
#include "tomornn/simulation.hpp"
#include "tomornn/training.hpp"

namespace fs = std::filesystem;
using namespace tomornn;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  bool desk_scale = false;
};

ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig cfg;
  if (!g.config_path.empty()) cfg = ExperimentConfig::load(g.config_path);
  if (g.seed_given) {
    cfg.seed = g.seed;
    cfg.training.seed = g.seed;
    cfg.sweep.config.seed = g.seed;
  }
  cfg.sweep.config.threads = g.threads;
  if (g.desk_scale) cfg.apply_desk_scale();
  cfg.output_dir = g.output_dir;
  return cfg;
}

void echo_config(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(fs::path(cfg.output_dir) / "config_echo.json");
  out << cfg.to_json().dump(2) << "\n";
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

int cmd_simulate(const GlobalOptions& g) {
  ExperimentConfig cfg = resolve_config(g);
  echo_config(cfg);
  DatasetConfig dc;
  dc.count = cfg.simulation.count;
  dc.single_fraction = cfg.simulation.single_fraction;
  dc.master_seed = cfg.seed;
  dc.sim = cfg.simulation.params;
  const std::string path = (fs::path(cfg.output_dir) / "dataset.tsds").string();
  build_dataset(dc, cfg.geometry, cfg.grid, path);
  std::printf("wrote %s (%llu samples, N=%d, L=%d)\n", path.c_str(),
              static_cast<unsigned long long>(dc.count), cfg.geometry.count(),
              cfg.grid.size());
  return 0;
}

int cmd_train(const GlobalOptions& g, const std::string& dataset_path) {
  ExperimentConfig cfg = resolve_config(g);
  echo_config(cfg);
  const Dataset dataset = load_dataset(dataset_path);

  const std::string loss_path = (fs::path(cfg.output_dir) / "loss_history.csv").string();
  std::ofstream loss_csv(loss_path, std::ios::trunc);
  loss_csv << "epoch,train_mse,train_mse_db,val_nmse_db,lr\n";
  auto on_epoch = [&](int epoch, double mse, double val_db) {
    const double lr = cfg.training.learning_rate(epoch);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g\n", epoch, mse,
                  10.0 * std::log10(mse), val_db, lr);
    loss_csv << buf;
    loss_csv.flush();
    std::printf("epoch %4d  train_mse %.6g  val_nmse %.3f dB  lr %.3g\n", epoch,
                mse, val_db, lr);
    std::fflush(stdout);
  };

  const Checkpoint ckpt = train(cfg.training, dataset, cfg.geometry, cfg.grid, on_epoch);
  const std::string ckpt_path = (fs::path(cfg.output_dir) / "checkpoint.tsck").string();
  save_checkpoint(ckpt, ckpt_path);
  std::printf("wrote %s\n", ckpt_path.c_str());
  return 0;
}

std::vector<NamedCheckpoint> load_named_checkpoints(
    const std::vector<std::string>& specs) {
  std::vector<NamedCheckpoint> out;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    std::string name = eq == std::string::npos ? fs::path(spec).stem().string()
                                               : spec.substr(0, eq);
    std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    out.emplace_back(std::move(name), load_checkpoint(path));
  }
  return out;
}

std::vector<double> default_sweep_values(SweepVariable v) {
  switch (v) {
    case SweepVariable::Distance: {
      std::vector<double> a;
      for (int i = 0; i <= 22; ++i) a.push_back(0.1 + 0.05 * i);
      return a;
    }
    case SweepVariable::AmplitudeRatio: return {1.0, 2.0, 4.0};
    case SweepVariable::PhaseDifference: {
      std::vector<double> a;
      for (int i = 0; i <= 6; ++i) a.push_back(kPi * i / 6.0);
      return a;
    }
    case SweepVariable::BaselinePerturbation: return {0.0, 5.0};
    case SweepVariable::TrainingSetSize: return {};
  }
  return {};
}

int cmd_sweep(const GlobalOptions& g, const std::vector<std::string>& ckpt_specs,
              bool force_flag) {
  ExperimentConfig cfg = resolve_config(g);
  if (cfg.sweep.config.values.empty())
    cfg.sweep.config.values = default_sweep_values(cfg.sweep.config.variable);
  echo_config(cfg);
  auto checkpoints = load_named_checkpoints(ckpt_specs);

  const bool force = force_flag || cfg.sweep.force;
  if (force) {
    // Re-stamp so run_sweep's fingerprint check passes; the caller takes
    // responsibility for geometry compatibility.
    for (auto& [name, ckpt] : checkpoints)
      ckpt.geometry_fingerprint = cfg.geometry.fingerprint();
  }

  const auto rows =
      run_sweep(cfg.sweep.config, checkpoints, cfg.geometry, cfg.grid, cfg.detection);
  const std::string csv_path = (fs::path(cfg.output_dir) / "sweep.csv").string();
  write_sweep_csv(rows, csv_path);

  nlohmann::json summary;
  summary["config"] = cfg.to_json();
  nlohmann::json fps = nlohmann::json::object();
  for (const auto& spec : ckpt_specs) {
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    fps[path] = to_hex(file_fingerprint(path));
  }
  summary["checkpoint_fingerprints"] = fps;
  std::ofstream sj(fs::path(cfg.output_dir) / "summary.json");
  sj << summary.dump(2) << "\n";

  std::printf("wrote %s (%zu rows)\n", csv_path.c_str(), rows.size());
  return 0;
}

int cmd_scatter(const GlobalOptions& g, const std::string& ckpt_path) {
  ExperimentConfig cfg = resolve_config(g);
  echo_config(cfg);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.geometry_fingerprint != cfg.geometry.fingerprint() && !cfg.sweep.force)
    throw ConfigError("scatter: checkpoint geometry fingerprint mismatch");
  const auto points = scatter_plot_data(
      ckpt, cfg.geometry, cfg.grid, cfg.detection, cfg.sweep.scatter_samples,
      cfg.sweep.config.snr_db, cfg.sweep.alpha_min, cfg.sweep.alpha_max, cfg.seed);
  const std::string path = (fs::path(cfg.output_dir) / "scatter.csv").string();
  write_scatter_csv(points, path);
  std::printf("wrote %s (%zu points)\n", path.c_str(), points.size());
  return 0;
}

int cmd_crlb(const GlobalOptions& g) {
  ExperimentConfig cfg = resolve_config(g);
  echo_config(cfg);
  const std::string path = (fs::path(cfg.output_dir) / "crlb.csv").string();
  std::ofstream out(path, std::ios::trunc);
  out << "snr_db,elevation_m,n_acquisitions,crlb_m\n";
  std::vector<int> sizes = cfg.crlb.subset_sizes;
  if (sizes.empty()) sizes = {cfg.geometry.count()};
  char buf[160];
  for (double snr : cfg.crlb.snr_db) {
    for (double s : cfg.crlb.elevations) {
      for (int n : sizes) {
        if (n < 2 || n > cfg.geometry.count())
          throw ConfigError("crlb: subset size out of range");
        AcquisitionGeometry sub = cfg.geometry;
        sub.baselines.resize(static_cast<std::size_t>(n));
        const double c = crlb_elevation(sub, snr, s);
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%d,%.10g\n", snr, s, n, c);
        out << buf;
      }
    }
  }
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_inspect(const GlobalOptions& g, const std::string& ckpt_path,
                const std::string& dataset_path, std::int64_t sample_index,
                double alpha, double snr_db) {
  ExperimentConfig cfg = resolve_config(g);
  echo_config(cfg);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);

  CVector measurement;
  if (!dataset_path.empty()) {
    const Dataset d = load_dataset(dataset_path);
    if (sample_index < 0 || static_cast<std::size_t>(sample_index) >= d.size())
      throw ConfigError("inspect: sample index out of range");
    measurement = d.samples[static_cast<std::size_t>(sample_index)].g;
  } else {
    const double rho_s = rayleigh_resolution(cfg.geometry);
    const GroundTruth truth =
        benchmark_truth(alpha, snr_db, 1.0, 0.0, cfg.grid, rho_s, 0.0);
    Rng rng = Rng::stream(cfg.seed, 0x1A5);
    measurement = synthesize(cfg.geometry, truth, rng);
  }

  const CMatrix r = build_steering_matrix(cfg.geometry, cfg.grid);
  const auto [gamma_hat, trace] = network_forward(ckpt.weights, measurement, r);

  nlohmann::json doc;
  doc["architecture"] = to_string(ckpt.arch);
  doc["depth"] = ckpt.depth;
  nlohmann::json layers = nlohmann::json::array();
  for (int t = 0; t < trace.depth(); ++t) {
    nlohmann::json layer;
    layer["unit"] = t;
    std::vector<double> mags(static_cast<std::size_t>(trace.output[static_cast<std::size_t>(t)].size()));
    for (Eigen::Index i = 0; i < trace.output[static_cast<std::size_t>(t)].size(); ++i)
      mags[static_cast<std::size_t>(i)] =
          std::abs(trace.output[static_cast<std::size_t>(t)](i));
    layer["output_magnitude"] = mags;
    layers.push_back(std::move(layer));
  }
  doc["layers"] = layers;
  std::vector<double> final_mags(static_cast<std::size_t>(gamma_hat.size()));
  for (Eigen::Index i = 0; i < gamma_hat.size(); ++i)
    final_mags[static_cast<std::size_t>(i)] = std::abs(gamma_hat(i));
  doc["gamma_hat_magnitude"] = final_mags;

  const std::string path = (fs::path(cfg.output_dir) / "trace.json").string();
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << "\n";
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-valued unrolled RNNs and ISTA for super-resolving "
               "SAR tomography"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("-c,--config", g.config_path, "experiment config (JSON)");
  app.add_option("-o,--out", g.output_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed override");
  app.add_option("--threads", g.threads, "worker threads for Monte-Carlo trials");
  app.add_flag("--desk-scale", g.desk_scale,
               "divide dataset/trial counts by the desk-scale factors");

  auto* sim = app.add_subcommand("simulate", "generate a training dataset");

  std::string dataset_path;
  auto* tr = app.add_subcommand("train", "train a network on a dataset");
  tr->add_option("-d,--dataset", dataset_path, "dataset file (.tsds)")->required();

  std::vector<std::string> ckpt_specs;
  bool force = false;
  auto* sw = app.add_subcommand("sweep", "Monte-Carlo detection-rate sweep");
  sw->add_option("-k,--checkpoint", ckpt_specs, "name=path checkpoint specs")
      ->required();
  sw->add_flag("--force", force, "ignore geometry fingerprint mismatches");

  std::string scatter_ckpt;
  auto* sc = app.add_subcommand("scatter", "Fig-5 style estimate point cloud");
  sc->add_option("-k,--checkpoint", scatter_ckpt, "checkpoint path")->required();

  auto* cr = app.add_subcommand("crlb", "CRLB tables vs SNR and elevation");

  std::string inspect_ckpt, inspect_dataset;
  std::int64_t inspect_index = -1;
  double inspect_alpha = 0.6, inspect_snr = 6.0;
  auto* in = app.add_subcommand("inspect", "per-layer trace dump");
  in->add_option("-k,--checkpoint", inspect_ckpt, "checkpoint path")->required();
  in->add_option("-d,--dataset", inspect_dataset, "take the sample from a dataset");
  in->add_option("-i,--index", inspect_index, "sample index in the dataset");
  in->add_option("--alpha", inspect_alpha, "synthesized benchmark alpha");
  in->add_option("--snr", inspect_snr, "synthesized benchmark SNR (dB)");

  try {
    app.parse(argc, argv);
    g.seed_given = seed_opt->count() > 0;
    if (sim->parsed()) return cmd_simulate(g);
    if (tr->parsed()) return cmd_train(g, dataset_path);
    if (sw->parsed()) return cmd_sweep(g, ckpt_specs, force);
    if (sc->parsed()) return cmd_scatter(g, scatter_ckpt);
    if (cr->parsed()) return cmd_crlb(g);
    if (in->parsed())
      return cmd_inspect(g, inspect_ckpt, inspect_dataset, inspect_index,
                         inspect_alpha, inspect_snr);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
