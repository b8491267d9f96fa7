#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tomornn/common.hpp"
#include "tomornn/geometry.hpp"
#include "tomornn/rng.hpp"

namespace tomornn {

struct Scatterer {
  double elevation = 0.0;  // meters, on a grid point
  double amplitude = 0.0;  // > 0
  double phase = 0.0;      // radians in (-pi, pi]

  Complex reflectivity() const {
    return amplitude * Complex(std::cos(phase), std::sin(phase));
  }
};

/// A simulated cell: up to two scatterers rendered onto the grid, plus the
/// SNR the measurement will be synthesized at.
struct GroundTruth {
  std::vector<Scatterer> scatterers;  // length 0..2
  double snr_db = 0.0;
  ElevationGrid grid;

  /// Grid bins of the scatterers; -1 where absent.
  std::array<int, 2> support() const;
  /// Dense reflectivity profile (length L, one nonzero bin per scatterer).
  CVector profile() const;
};

struct SimulationParams {
  double amplitude_min = 1.0;
  double amplitude_max = 4.0;
  std::vector<double> snr_set_db = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
};

/// Amplitude ~ U(amp_min, amp_max), phase ~ U(-pi, pi), elevation uniform
/// over grid points, SNR drawn from the discrete set.
GroundTruth sample_single(Rng& rng, const ElevationGrid& grid,
                          const SimulationParams& params);

/// Two independent single-scatterer draws conditioned on distinct bins and
/// elevation distance <= rho_s (rejection sampling).
GroundTruth sample_double(Rng& rng, const ElevationGrid& grid,
                          const SimulationParams& params, double rho_s);

/// Deterministic facade/ground pair: reference scatterer at s_ref, second at
/// s_ref + alpha * rho_s (snapped to the grid), amplitudes (1, 1/amp_ratio),
/// phases (0, delta_phi).
GroundTruth benchmark_truth(double alpha, double snr_db, double amp_ratio,
                            double delta_phi, const ElevationGrid& grid,
                            double rho_s, double s_ref = 0.0);

/// g = R gamma + eps with eps i.i.d. circular complex Gaussian. The noise
/// variance per acquisition is A_min^2 * 10^(-snr/10) with A_min the weakest
/// scatterer amplitude (1 when there is none). snr_db = +inf is noise-free.
CVector synthesize(const AcquisitionGeometry& geom, const GroundTruth& truth,
                   Rng& rng);

// ---------------------------------------------------------------------------
// Dataset files ("TSDS"): fixed-layout little-endian binary, one record per
// sample: snr float64, two int32 support bins (-1 if absent), two complex128
// amplitudes, g (N complex128), gamma (L complex128).

struct DatasetConfig {
  std::uint64_t count = 0;
  double single_fraction = 0.5;
  std::uint64_t master_seed = 0;
  SimulationParams sim;
};

struct Dataset {
  std::uint32_t n = 0;
  std::uint32_t l = 0;
  std::uint64_t master_seed = 0;
  std::string geometry_fingerprint;

  struct Sample {
    double snr_db;
    std::array<std::int32_t, 2> support;
    std::array<Complex, 2> amplitude;
    CVector g;
  };
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  /// Dense truth profile of one sample.
  CVector profile(std::size_t idx) const;
};

/// Streams `count` samples (single-scatterer first fraction, then doubles)
/// to `path`. Sample k is a pure function of (master_seed, k).
void build_dataset(const DatasetConfig& config, const AcquisitionGeometry& geom,
                   const ElevationGrid& grid, const std::string& path);

Dataset load_dataset(const std::string& path);

}  // namespace tomornn
