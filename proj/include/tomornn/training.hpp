#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tomornn/geometry.hpp"
#include "tomornn/networks.hpp"
#include "tomornn/simulation.hpp"

namespace tomornn {

struct LrSchedule {
  std::string policy = "step";  // "step" or "constant"
  double factor = 0.5;
  int every_epochs = 100;
};

struct TrainConfig {
  Architecture arch = Architecture::CvSmgu;
  int depth = 6;
  int epochs = 0;
  int batch_size = 256;
  double lr_initial = 1e-4;
  LrSchedule lr_schedule;
  std::uint64_t seed = 0;
  double lambda = 1.0;      // initial thresholds are step * lambda
  double gate_std = 0.01;
  double dt_scale = 0.5;    // initial double-tanh scale
  double step_scale = 1.0;  // multiplies beta in the W1/W2/W^i init
  double w1_scale = 1.0;    // extra multiplier on the gated-unit W1 init
  double pwl_gain = 1.0;    // initial gamma-net pwl slopes
  double clip_norm = 0.0;   // global gradient-norm clip; 0 disables
  int validation_samples = 5000;  // held-out noise-free set

  void validate() const;
  double learning_rate(int epoch) const;
};

struct AdamState {
  RVector m;
  RVector v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void reset(Eigen::Index size);
};

struct Checkpoint {
  Architecture arch = Architecture::CvSmgu;
  int depth = 0;
  int n = 0;
  int l = 0;
  double beta = 0.0;
  std::string geometry_fingerprint;
  NetworkWeights weights;
  std::vector<double> train_loss;    // per epoch
  std::vector<double> val_nmse_db;   // per epoch
};

// ---------------------------------------------------------------------------
// Canonical parameter traversal: one declared tensor order shared by Adam,
// the checkpoint payload and the gradient checks. Complex tensors appear as
// interleaved (re, im) float64 pairs in column-major element order.

struct ParamLayout {
  struct Entry {
    std::string name;
    std::vector<int> shape;  // [rows, cols] or [count]
    bool complex = false;
    std::size_t offset = 0;  // in doubles
    std::size_t count = 0;   // in doubles
  };
  std::vector<Entry> entries;
  std::size_t total = 0;
};

ParamLayout param_layout(const NetworkWeights& w);
RVector pack_parameters(const NetworkWeights& w);
void unpack_parameters(NetworkWeights& w, const RVector& flat);

// ---------------------------------------------------------------------------
// Loss and gradients

/// (1/T) sum_i ||est_i - truth_i||_2^2 over complex vectors.
double mse_loss(const std::vector<CVector>& estimates,
                const std::vector<CVector>& truths);

/// Forward + reverse over one stacked batch; accumulates d(mse)/d(params)
/// into `grad` (sized per param_layout) and returns the batch MSE.
/// `r` is used by gamma-Net only.
double backward_batch(const NetworkWeights& w, const CMatrix& r,
                      const RMatrix& g_st, const RMatrix& truth_st,
                      RVector& grad);

/// Convenience wrapper over complex-vector batches.
std::pair<double, RVector> backward(const NetworkWeights& w, const CMatrix& r,
                                    const std::vector<CVector>& g_batch,
                                    const std::vector<CVector>& truth_batch);

/// Standard Adam with bias correction; mutates state and params.
void adam_step(AdamState& state, RVector& params, const RVector& grad,
               double lr);

/// Post-update projection keeping DtParams thresholds >= 0 (the double-tanh
/// is even in theta, so this never changes the model).
void enforce_parameter_invariants(const ParamLayout& layout, RVector& params);

// ---------------------------------------------------------------------------
// Training

/// Runs shuffled mini-batch Adam on the MSE loss, tracking validation NMSE on
/// a freshly synthesized noise-free set; returns the best-validation weights.
Checkpoint train(const TrainConfig& config, const Dataset& dataset,
                 const AcquisitionGeometry& geom, const ElevationGrid& grid);

/// Progress callback variant (epoch, train_mse, val_nmse_db); used by the CLI.
using EpochCallback = std::function<void(int, double, double)>;
Checkpoint train(const TrainConfig& config, const Dataset& dataset,
                 const AcquisitionGeometry& geom, const ElevationGrid& grid,
                 const EpochCallback& on_epoch);

// ---------------------------------------------------------------------------
// Checkpoint files ("TSCK"): JSON header followed by a little-endian float64
// payload in the declared tensor order.

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tomornn
