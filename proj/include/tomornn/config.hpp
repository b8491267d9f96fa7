#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "tomornn/evaluation.hpp"
#include "tomornn/geometry.hpp"
#include "tomornn/simulation.hpp"
#include "tomornn/training.hpp"

namespace tomornn {

/// One JSON experiment document with sections geometry, grid, simulation,
/// training, detection and sweep. Every key is schema-checked; unknown keys
/// are rejected. Missing sections fall back to the reference setup, so an
/// empty document reproduces the paper-scale defaults.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = ".";

  AcquisitionGeometry geometry = AcquisitionGeometry::reference();
  ElevationGrid grid = ElevationGrid::reference();

  struct Simulation {
    std::uint64_t count = 4000000;
    double single_fraction = 0.5;
    SimulationParams params;
  } simulation;

  TrainConfig training;
  DetectionParams detection;

  struct Sweep {
    SweepConfig config;
    int scatter_samples = 2000;
    double alpha_min = 0.1;
    double alpha_max = 1.2;
    bool force = false;
  } sweep;

  struct Crlb {
    std::vector<double> snr_db = {0, 2, 4, 6, 8, 10};
    std::vector<double> elevations = {0.0, 50.0, 100.0};
    std::vector<int> subset_sizes = {};  // leading-N studies; empty = full N
  } crlb;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);

  /// Fully resolved document (defaults filled in), used for the echo file.
  nlohmann::json to_json() const;

  /// Divides dataset and trial counts by the desk-scale factors
  /// (dataset count /20, sweep trials /20, perturbation geometries /5).
  void apply_desk_scale();
};

}  // namespace tomornn
