#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomornn/common.hpp"
#include "tomornn/rng.hpp"

namespace tomornn {

/// Sensor configuration: perpendicular baselines b_n and the scale kappa
/// mapping them to spatial frequencies xi_n = kappa * b_n.
struct AcquisitionGeometry {
  std::vector<double> baselines;  // meters
  double freq_scale = 0.0;        // kappa, 1/m^2

  int count() const { return static_cast<int>(baselines.size()); }
  std::vector<double> frequencies() const;

  /// n regularly spaced baselines on [b_min, b_max].
  static AcquisitionGeometry regular(int n, double b_min, double b_max,
                                     double kappa);

  /// Solves kappa from rho = 1 / (kappa * (b_max - b_min)) so that the
  /// Rayleigh resolution of the regular array equals `rayleigh_res`.
  static AcquisitionGeometry from_span_and_resolution(int n, double b_min,
                                                      double b_max,
                                                      double rayleigh_res);

  /// The 25-baseline [-135, 135] m array with 42 m Rayleigh resolution.
  static AcquisitionGeometry reference();

  static AcquisitionGeometry from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Stable hash of (baselines, kappa); stamped into datasets/checkpoints.
  std::string fingerprint() const;

  void validate() const;
};

/// Uniform elevation grid s_l = s_min + l * spacing, l = 0..L-1.
struct ElevationGrid {
  double s_min = 0.0;
  double s_max = 0.0;
  double spacing = 1.0;

  int size() const;  // L
  double position(int l) const { return s_min + l * spacing; }
  int nearest_bin(double s) const;

  /// s in [-20, 300] m on a 1 m grid (L = 321).
  static ElevationGrid reference();

  static ElevationGrid from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  void validate() const;
};

/// R[n][l] = exp(-j 2 pi xi_n s_l); every entry has unit modulus.
CMatrix build_steering_matrix(const AcquisitionGeometry& geom,
                              const ElevationGrid& grid);

/// Steering column for a single off- or on-grid elevation.
CVector steering_column(const AcquisitionGeometry& geom, double s);

/// 1 / (max xi - min xi). Degenerate geometry (all xi equal) throws.
double rayleigh_resolution(const AcquisitionGeometry& geom);

/// Cramer-Rao lower bound (meters) on the elevation of a single scatterer,
/// from the 3x3 Fisher information over (Re gamma, Im gamma, s) under
/// i.i.d. circular complex noise with variance 10^(-snr_db/10) and unit
/// amplitude.
double crlb_elevation(const AcquisitionGeometry& geom, double snr_db, double s);

/// Each baseline shifted by an independent magnitude ~ U[min_shift, max_shift]
/// with random sign.
AcquisitionGeometry perturb_baselines(const AcquisitionGeometry& geom,
                                      double min_shift, double max_shift,
                                      Rng& rng);

}  // namespace tomornn
