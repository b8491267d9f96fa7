#include "tomornn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

namespace tomornn {

double nmse_linear(const std::vector<CVector>& estimates,
                   const std::vector<CVector>& truths) {
  if (estimates.empty() || estimates.size() != truths.size())
    throw ConfigError("nmse: empty batch or size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double tn = truths[i].squaredNorm();
    if (tn <= 0.0) throw ConfigError("nmse: zero-norm truth");
    acc += (estimates[i] - truths[i]).squaredNorm() / tn;
  }
  return acc / static_cast<double>(estimates.size());
}

double nmse_db(const std::vector<CVector>& estimates,
               const std::vector<CVector>& truths) {
  const double linear = nmse_linear(estimates, truths);
  if (linear <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(linear);
}

// ---------------------------------------------------------------------------
// Scatterer extraction

namespace {

struct LsFit {
  CVector amplitudes;
  double rss = 0.0;
  bool full_rank = true;
};

LsFit least_squares_refit(const CVector& g, const CMatrix& r,
                          const std::vector<int>& bins) {
  LsFit fit;
  const int k = static_cast<int>(bins.size());
  if (k == 0) {
    fit.rss = g.squaredNorm();
    return fit;
  }
  CMatrix cols(r.rows(), k);
  for (int i = 0; i < k; ++i) cols.col(i) = r.col(bins[static_cast<std::size_t>(i)]);
  Eigen::ColPivHouseholderQR<CMatrix> qr(cols);
  fit.full_rank = qr.rank() == k;
  fit.amplitudes = qr.solve(g);
  fit.rss = (g - cols * fit.amplitudes).squaredNorm();
  return fit;
}

}  // namespace

Extraction extract_scatterers(const CVector& gamma_hat, const ElevationGrid& grid,
                              const DetectionParams& params, const CVector& g,
                              const CMatrix& r) {
  if (params.max_order < 1) throw ConfigError("detection: max_order must be >= 1");
  const int l = static_cast<int>(gamma_hat.size());
  if (r.cols() != l || r.rows() != g.size())
    throw ConfigError("extract_scatterers: shape mismatch");

  Extraction ext;
  RVector mag(l);
  for (int i = 0; i < l; ++i) mag(i) = std::abs(gamma_hat(i));
  const double mx = mag.maxCoeff();
  if (mx <= 0.0) return ext;

  // Local maxima above the relative floor.
  const double floor = params.min_peak_fraction * mx;
  std::vector<int> peaks;
  for (int i = 0; i < l; ++i) {
    if (mag(i) < floor) continue;
    if (i > 0 && mag(i - 1) > mag(i)) continue;
    if (i + 1 < l && mag(i + 1) > mag(i)) continue;
    peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) {
    if (mag(a) != mag(b)) return mag(a) > mag(b);
    return a < b;
  });
  // Merge peaks within merge_radius bins, keeping the strongest.
  std::vector<int> kept;
  for (int p : peaks) {
    bool close = false;
    for (int q : kept)
      if (std::abs(p - q) <= params.merge_radius) {
        close = true;
        break;
      }
    if (!close) kept.push_back(p);
  }
  if (static_cast<int>(kept.size()) > params.max_order)
    kept.resize(static_cast<std::size_t>(params.max_order));

  // BIC-style order selection with least-squares amplitude debiasing.
  const double penalty =
      params.order_penalty * std::log(static_cast<double>(g.size()));
  double best_score = std::numeric_limits<double>::infinity();
  int best_k = 0;
  LsFit best_fit;
  std::vector<int> candidate;
  for (int k = 0; k <= static_cast<int>(kept.size()); ++k) {
    candidate.assign(kept.begin(), kept.begin() + k);
    LsFit fit = least_squares_refit(g, r, candidate);
    while (!fit.full_rank && !candidate.empty()) {
      candidate.pop_back();  // coincident columns: drop weakest and retry
      fit = least_squares_refit(g, r, candidate);
    }
    const double score = fit.rss + penalty * static_cast<double>(candidate.size());
    if (score < best_score) {
      best_score = score;
      best_k = static_cast<int>(candidate.size());
      best_fit = fit;
    }
  }

  ext.order = best_k;
  for (int i = 0; i < best_k; ++i) {
    DetectedScatterer d;
    d.bin = kept[static_cast<std::size_t>(i)];
    d.elevation = grid.position(d.bin);
    d.amplitude = best_fit.amplitudes(i);
    ext.scatterers.push_back(d);
  }
  std::sort(ext.scatterers.begin(), ext.scatterers.end(),
            [](const DetectedScatterer& a, const DetectedScatterer& b) {
              return a.elevation < b.elevation;
            });
  return ext;
}

// ---------------------------------------------------------------------------
// Effective detection

namespace {

/// Greedy nearest-elevation matching without reuse; ties toward the lower
/// truth elevation. Returns est index per truth (-1 if unmatched).
std::vector<int> match_estimates(const std::vector<double>& est,
                                 const std::vector<double>& truth) {
  std::vector<int> match(truth.size(), -1);
  std::vector<char> est_used(est.size(), 0), truth_used(truth.size(), 0);
  const std::size_t pairs = std::min(est.size(), truth.size());
  for (std::size_t round = 0; round < pairs; ++round) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth_used[j]) continue;
      for (std::size_t i = 0; i < est.size(); ++i) {
        if (est_used[i]) continue;
        const double d = std::abs(est[i] - truth[j]);
        const bool better =
            d < best ||
            (d == best && bj >= 0 &&
             truth[j] < truth[static_cast<std::size_t>(bj)]);
        if (better) {
          best = d;
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
        }
      }
    }
    est_used[static_cast<std::size_t>(bi)] = 1;
    truth_used[static_cast<std::size_t>(bj)] = 1;
    match[static_cast<std::size_t>(bj)] = bi;
  }
  return match;
}

}  // namespace

bool effective_detection(const Extraction& estimate, const GroundTruth& truth,
                         double crlb_m, double d_s_m) {
  if (truth.scatterers.size() != 2)
    throw ConfigError("effective_detection: truth must have two scatterers");
  if (estimate.order != 2) return false;
  std::vector<double> est, tru;
  for (const auto& e : estimate.scatterers) est.push_back(e.elevation);
  for (const auto& t : truth.scatterers)
    tru.push_back(truth.grid.position(truth.grid.nearest_bin(t.elevation)));
  const auto match = match_estimates(est, tru);
  for (std::size_t j = 0; j < tru.size(); ++j) {
    if (match[j] < 0) return false;
    const double err = std::abs(est[static_cast<std::size_t>(match[j])] - tru[j]);
    if (err > 3.0 * crlb_m) return false;
    if (err > 0.5 * d_s_m) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Sweeps

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::Distance: return "distance";
    case SweepVariable::AmplitudeRatio: return "amplitude_ratio";
    case SweepVariable::PhaseDifference: return "phase_difference";
    case SweepVariable::BaselinePerturbation: return "baseline_perturbation";
    case SweepVariable::TrainingSetSize: return "training_set_size";
  }
  return "unknown";
}

SweepVariable sweep_variable_from_string(const std::string& s) {
  if (s == "distance") return SweepVariable::Distance;
  if (s == "amplitude_ratio") return SweepVariable::AmplitudeRatio;
  if (s == "phase_difference") return SweepVariable::PhaseDifference;
  if (s == "baseline_perturbation") return SweepVariable::BaselinePerturbation;
  if (s == "training_set_size") return SweepVariable::TrainingSetSize;
  throw ConfigError("unknown sweep variable: " + s);
}

namespace {

struct TrialAccumulator {
  long trials = 0;
  long detections = 0;
  long matched = 0;
  double err_sum = 0.0;
  double err_sq_sum = 0.0;

  void merge(const TrialAccumulator& o) {
    trials += o.trials;
    detections += o.detections;
    matched += o.matched;
    err_sum += o.err_sum;
    err_sq_sum += o.err_sq_sum;
  }
};

struct TrialSetup {
  const AcquisitionGeometry* geom;
  const CMatrix* r;
  double rho_s;
  double crlb_m;
  double alpha;
  double amp_ratio;
  double delta_phi;
  double snr_db;
  double s_ref;
};

/// Runs [first, last) paired trials of one sweep point for every network.
/// Batched forward passes; per-trial extraction and scoring.
void run_trials(const TrialSetup& setup, const ElevationGrid& grid,
                const DetectionParams& detection,
                const std::vector<const Checkpoint*>& nets,
                std::uint64_t seed, std::uint64_t stream_a, long first,
                long last, std::vector<TrialAccumulator>& acc) {
  constexpr long kChunk = 256;
  const GroundTruth proto = benchmark_truth(setup.alpha, setup.snr_db,
                                            setup.amp_ratio, setup.delta_phi,
                                            grid, setup.rho_s, setup.s_ref);
  const double d_s = std::abs(proto.scatterers[1].elevation -
                              proto.scatterers[0].elevation);
  const Eigen::Index n2 = 2 * setup.geom->count();
  RMatrix g_st(n2, kChunk);
  std::vector<CVector> gs(kChunk);

  for (long start = first; start < last; start += kChunk) {
    const long width = std::min(kChunk, last - start);
    for (long k = 0; k < width; ++k) {
      Rng rng = Rng::stream(seed, stream_a, static_cast<std::uint64_t>(start + k));
      gs[static_cast<std::size_t>(k)] = synthesize(*setup.geom, proto, rng);
      g_st.col(k) = stack_vector(gs[static_cast<std::size_t>(k)]);
    }
    for (std::size_t ni = 0; ni < nets.size(); ++ni) {
      const auto& w = nets[ni]->weights;
      RMatrix out;
      if (std::holds_alternative<GammaNetWeights>(w))
        out = gamma_net_forward_batch(std::get<GammaNetWeights>(w),
                                      g_st.leftCols(width), *setup.r);
      else
        out = gated_forward_batch(std::get<GatedUnitWeights>(w),
                                  g_st.leftCols(width));
      auto& a = acc[ni];
      for (long k = 0; k < width; ++k) {
        const CVector gamma_hat = unstack_vector(out.col(k));
        const Extraction ext = extract_scatterers(
            gamma_hat, grid, detection, gs[static_cast<std::size_t>(k)], *setup.r);
        a.trials += 1;
        if (effective_detection(ext, proto, setup.crlb_m, d_s))
          a.detections += 1;
        if (ext.order == 2) {
          std::vector<double> est, tru;
          for (const auto& e : ext.scatterers) est.push_back(e.elevation);
          for (const auto& t : proto.scatterers) tru.push_back(t.elevation);
          const auto match = match_estimates(est, tru);
          for (std::size_t j = 0; j < tru.size(); ++j) {
            if (match[j] < 0) continue;
            const double err =
                est[static_cast<std::size_t>(match[j])] - tru[j];
            a.matched += 1;
            a.err_sum += err;
            a.err_sq_sum += err * err;
          }
        }
      }
    }
  }
}

SweepRow make_row(SweepVariable variable, double value, const std::string& name,
                  const TrialAccumulator& a) {
  SweepRow row;
  row.variable = to_string(variable);
  row.value = value;
  row.network = name;
  row.trials = a.trials;
  row.detections = a.detections;
  row.p_d = a.trials > 0 ? static_cast<double>(a.detections) /
                               static_cast<double>(a.trials)
                         : 0.0;
  if (a.matched > 0) {
    row.bias_m = a.err_sum / static_cast<double>(a.matched);
    const double var = a.err_sq_sum / static_cast<double>(a.matched) -
                       row.bias_m * row.bias_m;
    row.std_m = std::sqrt(std::max(var, 0.0));
  }
  return row;
}

/// Deterministic multi-threaded trial loop: contiguous trial ranges per
/// worker, partials merged in worker order.
std::vector<TrialAccumulator> run_point(const TrialSetup& setup,
                                        const ElevationGrid& grid,
                                        const DetectionParams& detection,
                                        const std::vector<const Checkpoint*>& nets,
                                        std::uint64_t seed, std::uint64_t stream_a,
                                        long trials, int threads) {
  const int workers = std::max(1, std::min<int>(threads, 64));
  std::vector<std::vector<TrialAccumulator>> partials(
      static_cast<std::size_t>(workers),
      std::vector<TrialAccumulator>(nets.size()));
  if (workers == 1) {
    run_trials(setup, grid, detection, nets, seed, stream_a, 0, trials,
               partials[0]);
  } else {
    std::vector<std::thread> pool;
    const long per = (trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const long lo = w * per;
      const long hi = std::min<long>(trials, lo + per);
      if (lo >= hi) break;
      pool.emplace_back([&, w, lo, hi] {
        run_trials(setup, grid, detection, nets, seed, stream_a, lo, hi,
                   partials[static_cast<std::size_t>(w)]);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<TrialAccumulator> acc(nets.size());
  for (const auto& p : partials)
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i].merge(p[i]);
  return acc;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& config,
                                const std::vector<NamedCheckpoint>& checkpoints,
                                const AcquisitionGeometry& geom,
                                const ElevationGrid& grid,
                                const DetectionParams& detection) {
  if (config.trials < 1) throw ConfigError("sweep: trials must be >= 1");
  if (checkpoints.empty()) throw ConfigError("sweep: no checkpoints given");
  const std::string fp = geom.fingerprint();
  for (const auto& [name, ckpt] : checkpoints) {
    if (ckpt.geometry_fingerprint != fp)
      throw ConfigError("sweep: checkpoint '" + name +
                        "' geometry fingerprint mismatch");
    if (ckpt.l != grid.size() || ckpt.n != geom.count())
      throw ConfigError("sweep: checkpoint '" + name + "' shape mismatch");
  }

  const CMatrix r = build_steering_matrix(geom, grid);
  const double rho_s = rayleigh_resolution(geom);
  std::vector<const Checkpoint*> nets;
  std::vector<std::string> names;
  for (const auto& [name, ckpt] : checkpoints) {
    nets.push_back(&ckpt);
    names.push_back(name);
  }

  std::vector<SweepRow> rows;
  for (std::size_t vi = 0; vi < config.values.size(); ++vi) {
    const double value = config.values[vi];

    if (config.variable == SweepVariable::BaselinePerturbation) {
      // value = minimum shift (meters); range [value, value + width].
      // value 0 is the unperturbed reference.
      std::vector<TrialAccumulator> acc(nets.size());
      const int geom_draws = value == 0.0 ? 1 : config.perturb_geometries;
      for (int gd = 0; gd < geom_draws; ++gd) {
        AcquisitionGeometry used = geom;
        if (value > 0.0) {
          Rng grng = Rng::stream(config.seed, 0xD15, vi, static_cast<std::uint64_t>(gd));
          used = perturb_baselines(geom, value, value + config.perturb_width, grng);
        }
        const CMatrix r_used = build_steering_matrix(used, grid);
        TrialSetup setup{&used,
                         &r_used,
                         rayleigh_resolution(used),
                         crlb_elevation(used, config.snr_db, config.s_ref),
                         config.alpha,
                         config.amp_ratio,
                         config.delta_phi,
                         config.snr_db,
                         config.s_ref};
        // The benchmark separation stays fixed at alpha x nominal rho_s so
        // that detection difficulty, not the scene, varies with perturbation.
        setup.rho_s = rho_s;
        const std::uint64_t stream_a = (vi << 20) + static_cast<std::uint64_t>(gd);
        auto part = run_point(setup, grid, detection, nets, config.seed, stream_a,
                              config.trials, config.threads);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i].merge(part[i]);
      }
      for (std::size_t ni = 0; ni < nets.size(); ++ni)
        rows.push_back(make_row(config.variable, value, names[ni], acc[ni]));
      continue;
    }

    TrialSetup setup{&geom,
                     &r,
                     rho_s,
                     crlb_elevation(geom, config.snr_db, config.s_ref),
                     config.alpha,
                     config.amp_ratio,
                     config.delta_phi,
                     config.snr_db,
                     config.s_ref};
    std::vector<const Checkpoint*> point_nets = nets;
    std::vector<std::string> point_names = names;
    switch (config.variable) {
      case SweepVariable::Distance: setup.alpha = value; break;
      case SweepVariable::AmplitudeRatio: setup.amp_ratio = value; break;
      case SweepVariable::PhaseDifference: setup.delta_phi = value; break;
      case SweepVariable::TrainingSetSize:
        if (config.values.size() != checkpoints.size())
          throw ConfigError(
              "sweep: training_set_size needs one checkpoint per value");
        point_nets = {nets[vi]};
        point_names = {names[vi]};
        break;
      default: break;
    }
    auto acc = run_point(setup, grid, detection, point_nets, config.seed,
                         vi << 20, config.trials, config.threads);
    for (std::size_t ni = 0; ni < point_nets.size(); ++ni)
      rows.push_back(make_row(config.variable, value, point_names[ni], acc[ni]));
  }
  return rows;
}

std::vector<ScatterPoint> scatter_plot_data(const Checkpoint& checkpoint,
                                            const AcquisitionGeometry& geom,
                                            const ElevationGrid& grid,
                                            const DetectionParams& detection,
                                            int samples, double snr_db,
                                            double alpha_min, double alpha_max,
                                            std::uint64_t seed) {
  if (samples < 2) throw ConfigError("scatter_plot_data: samples must be >= 2");
  const CMatrix r = build_steering_matrix(geom, grid);
  const double rho_s = rayleigh_resolution(geom);
  std::vector<ScatterPoint> points;
  for (int i = 0; i < samples; ++i) {
    const double alpha =
        alpha_min + (alpha_max - alpha_min) * static_cast<double>(i) /
                        static_cast<double>(samples - 1);
    const GroundTruth truth =
        benchmark_truth(alpha, snr_db, 1.0, 0.0, grid, rho_s, 0.0);
    Rng rng = Rng::stream(seed, 0x5CA7, static_cast<std::uint64_t>(i));
    const CVector g = synthesize(geom, truth, rng);
    const auto [gamma_hat, trace] = network_forward(checkpoint.weights, g, r);
    const Extraction ext = extract_scatterers(gamma_hat, grid, detection, g, r);
    for (const auto& e : ext.scatterers)
      points.push_back({alpha, e.elevation / rho_s, ext.order});
  }
  return points;
}

SingleScattererSpread single_scatterer_spread(
    const Checkpoint& checkpoint, const AcquisitionGeometry& geom,
    const ElevationGrid& grid, const DetectionParams& detection, double snr_db,
    double s_true, long trials, std::uint64_t seed, int threads) {
  const CMatrix r = build_steering_matrix(geom, grid);
  const double s_snap = grid.position(grid.nearest_bin(s_true));

  struct Partial {
    long matched = 0;
    double sum = 0.0, sq = 0.0;
  };
  const int workers = std::max(1, std::min(threads, 64));
  std::vector<Partial> partials(static_cast<std::size_t>(workers));

  auto work = [&](int w, long lo, long hi) {
    constexpr long kChunk = 256;
    GroundTruth truth;
    truth.grid = grid;
    truth.snr_db = snr_db;
    truth.scatterers = {Scatterer{s_snap, 1.0, 0.0}};
    RMatrix g_st(2 * geom.count(), kChunk);
    std::vector<CVector> gs(kChunk);
    auto& p = partials[static_cast<std::size_t>(w)];
    for (long start = lo; start < hi; start += kChunk) {
      const long width = std::min(kChunk, hi - start);
      for (long k = 0; k < width; ++k) {
        Rng rng = Rng::stream(seed, 0x51C, static_cast<std::uint64_t>(start + k));
        gs[static_cast<std::size_t>(k)] = synthesize(geom, truth, rng);
        g_st.col(k) = stack_vector(gs[static_cast<std::size_t>(k)]);
      }
      RMatrix out;
      if (std::holds_alternative<GammaNetWeights>(checkpoint.weights))
        out = gamma_net_forward_batch(
            std::get<GammaNetWeights>(checkpoint.weights), g_st.leftCols(width), r);
      else
        out = gated_forward_batch(std::get<GatedUnitWeights>(checkpoint.weights),
                                  g_st.leftCols(width));
      for (long k = 0; k < width; ++k) {
        const CVector gamma_hat = unstack_vector(out.col(k));
        const Extraction ext = extract_scatterers(
            gamma_hat, grid, detection, gs[static_cast<std::size_t>(k)], r);
        if (ext.scatterers.empty()) continue;
        double err = 0.0;
        double best_abs = std::numeric_limits<double>::infinity();
        for (const auto& e : ext.scatterers) {
          const double d = e.elevation - s_snap;
          if (std::abs(d) < best_abs) {
            best_abs = std::abs(d);
            err = d;
          }
        }
        p.matched += 1;
        p.sum += err;
        p.sq += err * err;
      }
    }
  };

  if (workers == 1) {
    work(0, 0, trials);
  } else {
    std::vector<std::thread> pool;
    const long per = (trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const long lo = w * per, hi = std::min(trials, lo + per);
      if (lo >= hi) break;
      pool.emplace_back(work, w, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  SingleScattererSpread out;
  out.trials = trials;
  out.crlb_m = crlb_elevation(geom, snr_db, s_snap);
  double sum = 0.0, sq = 0.0;
  for (const auto& p : partials) {
    out.matched += p.matched;
    sum += p.sum;
    sq += p.sq;
  }
  if (out.matched > 0) {
    out.bias_m = sum / static_cast<double>(out.matched);
    const double var =
        sq / static_cast<double>(out.matched) - out.bias_m * out.bias_m;
    out.std_m = std::sqrt(std::max(var, 0.0));
  }
  return out;
}

std::pair<double, double> wilson_interval(long successes, long trials, double z) {
  if (trials <= 0) throw ConfigError("wilson_interval: trials must be > 0");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("write_sweep_csv: cannot open " + path);
  out << "sweep_variable,value,network,trials,detections,p_d,bias_m,std_m\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%s,%ld,%ld,%.10g,%.10g,%.10g\n",
                  r.variable.c_str(), r.value, r.network.c_str(), r.trials,
                  r.detections, r.p_d, r.bias_m, r.std_m);
    out << buf;
  }
}

void write_scatter_csv(const std::vector<ScatterPoint>& points,
                       const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("write_scatter_csv: cannot open " + path);
  out << "alpha,est_norm_elev,order\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%d\n", p.alpha, p.est_norm_elev,
                  p.order);
    out << buf;
  }
}

}  // namespace tomornn
