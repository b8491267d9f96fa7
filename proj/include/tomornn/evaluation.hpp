#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tomornn/geometry.hpp"
#include "tomornn/simulation.hpp"
#include "tomornn/training.hpp"

namespace tomornn {

/// 10 log10 of (1/T) sum ||est - truth||^2 / ||truth||^2. Perfect estimates
/// return -inf. Zero-norm truths are an error.
double nmse_db(const std::vector<CVector>& estimates,
               const std::vector<CVector>& truths);
double nmse_linear(const std::vector<CVector>& estimates,
                   const std::vector<CVector>& truths);

struct DetectionParams {
  int max_order = 2;
  double min_peak_fraction = 0.05;
  int merge_radius = 1;       // grid bins
  double order_penalty = 1.0;  // BIC-style weight
};

struct DetectedScatterer {
  double elevation = 0.0;
  Complex amplitude{0.0, 0.0};
  int bin = -1;
};

struct Extraction {
  std::vector<DetectedScatterer> scatterers;
  int order = 0;
};

/// Peak picking on |gamma_hat| (local maxima above min_peak_fraction of the
/// global max, merged within merge_radius), then BIC-style model-order
/// selection over k = 0..max_order with least-squares amplitude debiasing of
/// g on the selected steering columns.
Extraction extract_scatterers(const CVector& gamma_hat, const ElevationGrid& grid,
                              const DetectionParams& params, const CVector& g,
                              const CMatrix& r);

/// The three-criterion test for a double-scatterer trial: decided order 2,
/// both matched elevations within +-3 crlb and +-0.5 d_s of their truths.
/// Estimates are matched greedily to truths by nearest elevation w/o reuse.
bool effective_detection(const Extraction& estimate, const GroundTruth& truth,
                         double crlb_m, double d_s_m);

struct TrialRecord {
  GroundTruth truth;
  Extraction estimate;
  bool effective = false;
  std::uint64_t seed_index = 0;
};

// ---------------------------------------------------------------------------
// Monte-Carlo sweeps

enum class SweepVariable {
  Distance,             // alpha = d_s / rho_s
  AmplitudeRatio,
  PhaseDifference,      // radians
  BaselinePerturbation, // value = min shift in meters (0 = unperturbed)
  TrainingSetSize       // value i pairs with checkpoint i
};

std::string to_string(SweepVariable v);
SweepVariable sweep_variable_from_string(const std::string& s);

struct SweepConfig {
  SweepVariable variable = SweepVariable::Distance;
  std::vector<double> values;
  int trials = 200000;
  double snr_db = 6.0;
  double alpha = 0.6;       // fixed alpha for non-distance sweeps
  double amp_ratio = 1.0;
  double delta_phi = 0.0;
  double s_ref = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;
  int perturb_geometries = 100;  // geometry draws per perturbation value
  double perturb_width = 5.0;    // shift range is [value, value + width]
};

struct SweepRow {
  std::string variable;
  double value = 0.0;
  std::string network;
  long trials = 0;
  long detections = 0;
  double p_d = 0.0;
  double bias_m = 0.0;  // matched elevation-estimate errors (order-2 trials)
  double std_m = 0.0;
};

using NamedCheckpoint = std::pair<std::string, Checkpoint>;

/// Runs `trials` Monte-Carlo trials per (value, network) with per-trial RNG
/// streams derived from (seed, value index, trial index); aggregation is
/// order-independent, so results do not depend on `threads`.
std::vector<SweepRow> run_sweep(const SweepConfig& config,
                                const std::vector<NamedCheckpoint>& checkpoints,
                                const AcquisitionGeometry& geom,
                                const ElevationGrid& grid,
                                const DetectionParams& detection);

/// Fig-5-style point cloud: double scatterers with alpha ramped over
/// [alpha_min, alpha_max], one row per returned estimate.
struct ScatterPoint {
  double alpha = 0.0;
  double est_norm_elev = 0.0;
  int order = 0;
};

std::vector<ScatterPoint> scatter_plot_data(const Checkpoint& checkpoint,
                                            const AcquisitionGeometry& geom,
                                            const ElevationGrid& grid,
                                            const DetectionParams& detection,
                                            int samples, double snr_db,
                                            double alpha_min, double alpha_max,
                                            std::uint64_t seed);

/// Elevation spread of matched single-scatterer estimates at one SNR,
/// against the numerical CRLB (criterion-8 style study).
struct SingleScattererSpread {
  long trials = 0;
  long matched = 0;
  double bias_m = 0.0;
  double std_m = 0.0;
  double crlb_m = 0.0;
};

SingleScattererSpread single_scatterer_spread(
    const Checkpoint& checkpoint, const AcquisitionGeometry& geom,
    const ElevationGrid& grid, const DetectionParams& detection, double snr_db,
    double s_true, long trials, std::uint64_t seed, int threads = 1);

/// Wilson 95% score interval for a binomial proportion.
std::pair<double, double> wilson_interval(long successes, long trials,
                                          double z = 1.959963984540054);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
void write_scatter_csv(const std::vector<ScatterPoint>& points,
                       const std::string& path);

}  // namespace tomornn
