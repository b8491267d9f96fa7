#include "tomornn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace tomornn {

std::vector<double> AcquisitionGeometry::frequencies() const {
  std::vector<double> xi(baselines.size());
  for (std::size_t n = 0; n < baselines.size(); ++n)
    xi[n] = freq_scale * baselines[n];
  return xi;
}

AcquisitionGeometry AcquisitionGeometry::regular(int n, double b_min,
                                                 double b_max, double kappa) {
  if (n < 2) throw ConfigError("geometry: need at least 2 baselines");
  AcquisitionGeometry g;
  g.baselines.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g.baselines[static_cast<std::size_t>(i)] =
        b_min + (b_max - b_min) * static_cast<double>(i) / (n - 1);
  g.freq_scale = kappa;
  g.validate();
  return g;
}

AcquisitionGeometry AcquisitionGeometry::from_span_and_resolution(
    int n, double b_min, double b_max, double rayleigh_res) {
  if (rayleigh_res <= 0.0) throw ConfigError("geometry: resolution must be > 0");
  const double span = b_max - b_min;
  if (span <= 0.0) throw ConfigError("geometry: empty baseline span");
  return regular(n, b_min, b_max, 1.0 / (rayleigh_res * span));
}

AcquisitionGeometry AcquisitionGeometry::reference() {
  return from_span_and_resolution(25, -135.0, 135.0, 42.0);
}

void AcquisitionGeometry::validate() const {
  if (count() < 2) throw ConfigError("geometry: need at least 2 baselines");
  const auto [lo, hi] = std::minmax_element(baselines.begin(), baselines.end());
  if (*lo == *hi) throw ConfigError("geometry: baselines must not all be equal");
  if (!(freq_scale != 0.0) || !std::isfinite(freq_scale))
    throw ConfigError("geometry: freq_scale must be finite and nonzero");
}

AcquisitionGeometry AcquisitionGeometry::from_json(const nlohmann::json& j) {
  AcquisitionGeometry g;
  bool have_scale = false;
  if (j.contains("baselines")) {
    g.baselines = j.at("baselines").get<std::vector<double>>();
  } else if (j.contains("count") && j.contains("span")) {
    const int n = j.at("count").get<int>();
    const auto span = j.at("span").get<std::vector<double>>();
    if (span.size() != 2) throw ConfigError("geometry.span must be [lo, hi]");
    if (n < 2) throw ConfigError("geometry.count must be >= 2");
    g.baselines.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      g.baselines[static_cast<std::size_t>(i)] =
          span[0] + (span[1] - span[0]) * static_cast<double>(i) / (n - 1);
  } else {
    throw ConfigError("geometry: expected 'baselines' or 'count'+'span'");
  }
  if (j.contains("freq_scale")) {
    g.freq_scale = j.at("freq_scale").get<double>();
    have_scale = true;
  }
  if (j.contains("rayleigh_resolution")) {
    if (have_scale)
      throw ConfigError("geometry: give freq_scale or rayleigh_resolution, not both");
    const double rho = j.at("rayleigh_resolution").get<double>();
    if (rho <= 0.0) throw ConfigError("geometry: rayleigh_resolution must be > 0");
    const auto [lo, hi] = std::minmax_element(g.baselines.begin(), g.baselines.end());
    if (*hi == *lo) throw ConfigError("geometry: baselines must not all be equal");
    g.freq_scale = 1.0 / (rho * (*hi - *lo));
    have_scale = true;
  }
  if (!have_scale)
    throw ConfigError("geometry: expected 'freq_scale' or 'rayleigh_resolution'");
  g.validate();
  return g;
}

nlohmann::json AcquisitionGeometry::to_json() const {
  return nlohmann::json{{"baselines", baselines}, {"freq_scale", freq_scale}};
}

std::string AcquisitionGeometry::fingerprint() const {
  std::uint64_t h = fnv1a64(&freq_scale, sizeof(freq_scale));
  h = fnv1a64(baselines.data(), baselines.size() * sizeof(double), h);
  return to_hex(h);
}

int ElevationGrid::size() const {
  return static_cast<int>(std::floor((s_max - s_min) / spacing)) + 1;
}

int ElevationGrid::nearest_bin(double s) const {
  const int l = static_cast<int>(std::lround((s - s_min) / spacing));
  return std::clamp(l, 0, size() - 1);
}

ElevationGrid ElevationGrid::reference() { return ElevationGrid{-20.0, 300.0, 1.0}; }

void ElevationGrid::validate() const {
  if (spacing <= 0.0) throw ConfigError("grid: spacing must be > 0");
  if (s_max < s_min) throw ConfigError("grid: s_max must be >= s_min");
}

ElevationGrid ElevationGrid::from_json(const nlohmann::json& j) {
  ElevationGrid g;
  g.s_min = j.at("s_min").get<double>();
  g.s_max = j.at("s_max").get<double>();
  g.spacing = j.value("spacing", 1.0);
  g.validate();
  return g;
}

nlohmann::json ElevationGrid::to_json() const {
  return nlohmann::json{{"s_min", s_min}, {"s_max", s_max}, {"spacing", spacing}};
}

CMatrix build_steering_matrix(const AcquisitionGeometry& geom,
                              const ElevationGrid& grid) {
  geom.validate();
  grid.validate();
  const int n_rows = geom.count();
  const int n_cols = grid.size();
  if (n_rows == 0 || n_cols == 0)
    throw ConfigError("steering matrix: empty geometry or grid");
  const auto xi = geom.frequencies();
  CMatrix r(n_rows, n_cols);
  for (int l = 0; l < n_cols; ++l) {
    const double s = grid.position(l);
    for (int n = 0; n < n_rows; ++n) {
      const double phase = -2.0 * kPi * xi[static_cast<std::size_t>(n)] * s;
      r(n, l) = Complex(std::cos(phase), std::sin(phase));
    }
  }
  return r;
}

CVector steering_column(const AcquisitionGeometry& geom, double s) {
  const auto xi = geom.frequencies();
  CVector a(geom.count());
  for (int n = 0; n < geom.count(); ++n) {
    const double phase = -2.0 * kPi * xi[static_cast<std::size_t>(n)] * s;
    a(n) = Complex(std::cos(phase), std::sin(phase));
  }
  return a;
}

double rayleigh_resolution(const AcquisitionGeometry& geom) {
  geom.validate();
  const auto xi = geom.frequencies();
  const auto [lo, hi] = std::minmax_element(xi.begin(), xi.end());
  const double span = *hi - *lo;
  if (span <= 0.0)
    throw NumericError("rayleigh_resolution: degenerate geometry (all xi equal)");
  return 1.0 / span;
}

double crlb_elevation(const AcquisitionGeometry& geom, double snr_db, double s) {
  geom.validate();
  if (!std::isfinite(snr_db)) throw ConfigError("crlb: snr_db must be finite");
  const double sigma2 = std::pow(10.0, -snr_db / 10.0);
  const auto xi = geom.frequencies();
  const int n = geom.count();

  // Mean mu_n = gamma * a_n(s); unit amplitude, zero phase.
  // Columns of the 3-parameter Jacobian: d mu / d(Re g), d mu / d(Im g), d mu / ds.
  CVector a(n), da(n);
  for (int k = 0; k < n; ++k) {
    const double w = -2.0 * kPi * xi[static_cast<std::size_t>(k)];
    const double phase = w * s;
    a(k) = Complex(std::cos(phase), std::sin(phase));
    da(k) = Complex(0.0, w) * a(k);
  }
  Eigen::Matrix3d fim;
  const Complex jim(0.0, 1.0);
  const CVector cols[3] = {a, jim * a, da};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      fim(r, c) = (2.0 / sigma2) * cols[r].dot(cols[c]).real();

  Eigen::FullPivLU<Eigen::Matrix3d> lu(fim);
  if (!lu.isInvertible())
    throw NumericError("crlb: singular Fisher information (degenerate geometry)");
  const double var_s = lu.inverse()(2, 2);
  if (var_s <= 0.0) throw NumericError("crlb: non-positive variance");
  return std::sqrt(var_s);
}

AcquisitionGeometry perturb_baselines(const AcquisitionGeometry& geom,
                                      double min_shift, double max_shift,
                                      Rng& rng) {
  if (min_shift < 0.0 || max_shift < min_shift)
    throw ConfigError("perturb_baselines: need 0 <= min_shift <= max_shift");
  AcquisitionGeometry out = geom;
  for (auto& b : out.baselines) {
    const double mag = rng.uniform(min_shift, max_shift);
    const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    b += sign * mag;
  }
  return out;
}

}  // namespace tomornn
