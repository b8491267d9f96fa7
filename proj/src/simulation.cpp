#include "tomornn/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace tomornn {

std::array<int, 2> GroundTruth::support() const {
  std::array<int, 2> s{-1, -1};
  for (std::size_t k = 0; k < scatterers.size() && k < 2; ++k)
    s[k] = grid.nearest_bin(scatterers[k].elevation);
  return s;
}

CVector GroundTruth::profile() const {
  CVector p = CVector::Zero(grid.size());
  for (const auto& sc : scatterers) p(grid.nearest_bin(sc.elevation)) += sc.reflectivity();
  return p;
}

namespace {

Scatterer draw_scatterer(Rng& rng, const ElevationGrid& grid,
                         const SimulationParams& params) {
  Scatterer s;
  s.elevation = grid.position(rng.uniform_int(grid.size()));
  s.amplitude = rng.uniform(params.amplitude_min, params.amplitude_max);
  s.phase = rng.uniform(-kPi, kPi);
  return s;
}

double draw_snr(Rng& rng, const SimulationParams& params) {
  return params.snr_set_db[static_cast<std::size_t>(
      rng.uniform_int(static_cast<int>(params.snr_set_db.size())))];
}

}  // namespace

GroundTruth sample_single(Rng& rng, const ElevationGrid& grid,
                          const SimulationParams& params) {
  GroundTruth t;
  t.grid = grid;
  t.scatterers.push_back(draw_scatterer(rng, grid, params));
  t.snr_db = draw_snr(rng, params);
  return t;
}

GroundTruth sample_double(Rng& rng, const ElevationGrid& grid,
                          const SimulationParams& params, double rho_s) {
  if (rho_s <= 0.0) throw ConfigError("sample_double: rho_s must be > 0");
  GroundTruth t;
  t.grid = grid;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Scatterer a = draw_scatterer(rng, grid, params);
    Scatterer b = draw_scatterer(rng, grid, params);
    if (grid.nearest_bin(a.elevation) == grid.nearest_bin(b.elevation)) continue;
    if (std::abs(a.elevation - b.elevation) > rho_s) continue;
    t.scatterers = {a, b};
    t.snr_db = draw_snr(rng, params);
    return t;
  }
  throw NumericError("sample_double: rejection sampling failed (grid too coarse?)");
}

GroundTruth benchmark_truth(double alpha, double snr_db, double amp_ratio,
                            double delta_phi, const ElevationGrid& grid,
                            double rho_s, double s_ref) {
  if (alpha <= 0.0) throw ConfigError("benchmark_truth: alpha must be > 0");
  if (amp_ratio <= 0.0) throw ConfigError("benchmark_truth: amp_ratio must be > 0");
  GroundTruth t;
  t.grid = grid;
  t.snr_db = snr_db;
  Scatterer first;
  first.elevation = grid.position(grid.nearest_bin(s_ref));
  first.amplitude = 1.0;
  first.phase = 0.0;
  Scatterer second;
  second.elevation = grid.position(grid.nearest_bin(s_ref + alpha * rho_s));
  second.amplitude = 1.0 / amp_ratio;
  second.phase = delta_phi;
  t.scatterers = {first, second};
  return t;
}

CVector synthesize(const AcquisitionGeometry& geom, const GroundTruth& truth,
                   Rng& rng) {
  CVector g = CVector::Zero(geom.count());
  double a_min = 1.0;
  bool first = true;
  for (const auto& sc : truth.scatterers) {
    const double s = truth.grid.position(truth.grid.nearest_bin(sc.elevation));
    g += sc.reflectivity() * steering_column(geom, s);
    a_min = first ? sc.amplitude : std::min(a_min, sc.amplitude);
    first = false;
  }
  if (std::isfinite(truth.snr_db)) {
    const double sigma2 = a_min * a_min * std::pow(10.0, -truth.snr_db / 10.0);
    for (Eigen::Index i = 0; i < g.size(); ++i)
      g(i) += rng.circular_complex(sigma2);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dataset I/O

namespace {

constexpr char kMagic[4] = {'T', 'S', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

struct RawHeader {
  char magic[4];
  std::uint32_t version;
  std::uint32_t n;
  std::uint32_t l;
  std::uint64_t count;
  std::uint64_t master_seed;
  char fingerprint[16];
};

void write_sample(std::ofstream& out, const GroundTruth& truth, const CVector& g,
                  int l) {
  const double snr = truth.snr_db;
  out.write(reinterpret_cast<const char*>(&snr), sizeof(snr));
  const auto support = truth.support();
  std::array<Complex, 2> amp{Complex(0, 0), Complex(0, 0)};
  for (std::size_t k = 0; k < truth.scatterers.size() && k < 2; ++k)
    amp[k] = truth.scatterers[k].reflectivity();
  out.write(reinterpret_cast<const char*>(support.data()), 2 * sizeof(std::int32_t));
  out.write(reinterpret_cast<const char*>(amp.data()), 2 * sizeof(Complex));
  out.write(reinterpret_cast<const char*>(g.data()),
            static_cast<std::streamsize>(sizeof(Complex)) * g.size());
  CVector profile = truth.profile();
  (void)l;
  out.write(reinterpret_cast<const char*>(profile.data()),
            static_cast<std::streamsize>(sizeof(Complex)) * profile.size());
}

}  // namespace

void build_dataset(const DatasetConfig& config, const AcquisitionGeometry& geom,
                   const ElevationGrid& grid, const std::string& path) {
  geom.validate();
  grid.validate();
  const double rho_s = rayleigh_resolution(geom);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("build_dataset: cannot open " + path);

  RawHeader h{};
  std::memcpy(h.magic, kMagic, 4);
  h.version = kVersion;
  h.n = static_cast<std::uint32_t>(geom.count());
  h.l = static_cast<std::uint32_t>(grid.size());
  h.count = config.count;
  h.master_seed = config.master_seed;
  const std::string fp = geom.fingerprint();
  std::memcpy(h.fingerprint, fp.data(), 16);
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));

  const std::uint64_t singles = static_cast<std::uint64_t>(
      std::llround(config.single_fraction * static_cast<double>(config.count)));
  for (std::uint64_t k = 0; k < config.count; ++k) {
    Rng rng = Rng::stream(config.master_seed, k);
    GroundTruth truth = k < singles
                            ? sample_single(rng, grid, config.sim)
                            : sample_double(rng, grid, config.sim, rho_s);
    CVector g = synthesize(geom, truth, rng);
    write_sample(out, truth, g, grid.size());
  }
  if (!out) throw NumericError("build_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_dataset: cannot open " + path);
  RawHeader h{};
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  if (!in || std::memcmp(h.magic, kMagic, 4) != 0)
    throw ConfigError("load_dataset: bad magic (not a TSDS file): " + path);
  if (h.version != kVersion)
    throw ConfigError("load_dataset: unsupported version in " + path);

  Dataset d;
  d.n = h.n;
  d.l = h.l;
  d.master_seed = h.master_seed;
  d.geometry_fingerprint.assign(h.fingerprint, 16);
  d.samples.resize(h.count);
  std::vector<Complex> profile(h.l);
  for (std::uint64_t k = 0; k < h.count; ++k) {
    auto& s = d.samples[k];
    in.read(reinterpret_cast<char*>(&s.snr_db), sizeof(double));
    in.read(reinterpret_cast<char*>(s.support.data()), 2 * sizeof(std::int32_t));
    in.read(reinterpret_cast<char*>(s.amplitude.data()), 2 * sizeof(Complex));
    s.g.resize(h.n);
    in.read(reinterpret_cast<char*>(s.g.data()),
            static_cast<std::streamsize>(sizeof(Complex)) * h.n);
    // The dense profile is redundant with (support, amplitude); skip it.
    in.ignore(static_cast<std::streamsize>(sizeof(Complex)) * h.l);
    if (!in) throw ConfigError("load_dataset: truncated file: " + path);
  }
  return d;
}

CVector Dataset::profile(std::size_t idx) const {
  const auto& s = samples[idx];
  CVector p = CVector::Zero(l);
  for (int k = 0; k < 2; ++k)
    if (s.support[static_cast<std::size_t>(k)] >= 0)
      p(s.support[static_cast<std::size_t>(k)]) += s.amplitude[static_cast<std::size_t>(k)];
  return p;
}

}  // namespace tomornn
