#include "tomornn/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace tomornn {

void TrainConfig::validate() const {
  if (lr_initial <= 0.0) throw ConfigError("training: lr_initial must be > 0");
  if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("training: epochs must be >= 0");
  if (depth < 1) throw ConfigError("training: depth must be >= 1");
  if (lr_schedule.policy != "step" && lr_schedule.policy != "constant")
    throw ConfigError("training: unknown lr schedule policy " + lr_schedule.policy);
  if (lr_schedule.every_epochs < 1)
    throw ConfigError("training: lr schedule period must be >= 1");
}

double TrainConfig::learning_rate(int epoch) const {
  if (lr_schedule.policy == "constant") return lr_initial;
  const int k = epoch / lr_schedule.every_epochs;
  return lr_initial * std::pow(lr_schedule.factor, k);
}

void AdamState::reset(Eigen::Index size) {
  m = RVector::Zero(size);
  v = RVector::Zero(size);
  step = 0;
}

// ---------------------------------------------------------------------------
// Parameter layout

namespace {

void push_entry(ParamLayout& layout, std::string name, std::vector<int> shape,
                bool complex) {
  ParamLayout::Entry e;
  e.name = std::move(name);
  e.shape = std::move(shape);
  e.complex = complex;
  e.offset = layout.total;
  std::size_t count = 1;
  for (int d : e.shape) count *= static_cast<std::size_t>(d);
  if (complex) count *= 2;
  e.count = count;
  layout.total += count;
  layout.entries.push_back(std::move(e));
}

}  // namespace

ParamLayout param_layout(const NetworkWeights& weights) {
  ParamLayout layout;
  if (std::holds_alternative<GammaNetWeights>(weights)) {
    const auto& w = std::get<GammaNetWeights>(weights);
    for (int i = 0; i < w.depth(); ++i) {
      const std::string p = "layer" + std::to_string(i);
      push_entry(layout, p + ".w", {w.l(), w.n()}, true);
      push_entry(layout, p + ".pwl_raw", {5}, false);
    }
    return layout;
  }
  const auto& w = std::get<GatedUnitWeights>(weights);
  push_entry(layout, "w1", {w.l(), w.n()}, true);
  push_entry(layout, "w2", {w.l(), w.l()}, true);
  for (int t = 0; t < w.depth(); ++t) {
    const std::string p = "unit" + std::to_string(t);
    push_entry(layout, p + ".wf1", {w.l(), w.n()}, true);
    push_entry(layout, p + ".wf2", {w.l(), w.l()}, true);
    if (w.arch == Architecture::Slstm) {
      push_entry(layout, p + ".wi1", {w.l(), w.n()}, true);
      push_entry(layout, p + ".wi2", {w.l(), w.l()}, true);
    }
    push_entry(layout, p + ".act", {2}, false);
  }
  return layout;
}

namespace {

void copy_tensor(double* dst, const CMatrix& src) {
  std::memcpy(dst, src.data(), sizeof(Complex) * static_cast<std::size_t>(src.size()));
}

void copy_tensor(CMatrix& dst, const double* src) {
  std::memcpy(dst.data(), src, sizeof(Complex) * static_cast<std::size_t>(dst.size()));
}

}  // namespace

RVector pack_parameters(const NetworkWeights& weights) {
  const ParamLayout layout = param_layout(weights);
  RVector flat(static_cast<Eigen::Index>(layout.total));
  std::size_t e = 0;
  auto at = [&](std::size_t idx) { return flat.data() + layout.entries[idx].offset; };
  if (std::holds_alternative<GammaNetWeights>(weights)) {
    const auto& w = std::get<GammaNetWeights>(weights);
    for (int i = 0; i < w.depth(); ++i) {
      copy_tensor(at(e++), w.w[static_cast<std::size_t>(i)]);
      std::memcpy(at(e++), w.pwl_raw[static_cast<std::size_t>(i)].data(),
                  5 * sizeof(double));
    }
    return flat;
  }
  const auto& w = std::get<GatedUnitWeights>(weights);
  copy_tensor(at(e++), w.w1);
  copy_tensor(at(e++), w.w2);
  for (int t = 0; t < w.depth(); ++t) {
    const auto ti = static_cast<std::size_t>(t);
    copy_tensor(at(e++), w.wf1[ti]);
    copy_tensor(at(e++), w.wf2[ti]);
    if (w.arch == Architecture::Slstm) {
      copy_tensor(at(e++), w.wi1[ti]);
      copy_tensor(at(e++), w.wi2[ti]);
    }
    double* act = at(e++);
    act[0] = w.out_act[ti].scale;
    act[1] = w.out_act[ti].threshold;
  }
  return flat;
}

void unpack_parameters(NetworkWeights& weights, const RVector& flat) {
  const ParamLayout layout = param_layout(weights);
  if (flat.size() != static_cast<Eigen::Index>(layout.total))
    throw ConfigError("unpack_parameters: size mismatch");
  std::size_t e = 0;
  auto at = [&](std::size_t idx) { return flat.data() + layout.entries[idx].offset; };
  if (std::holds_alternative<GammaNetWeights>(weights)) {
    auto& w = std::get<GammaNetWeights>(weights);
    for (int i = 0; i < w.depth(); ++i) {
      copy_tensor(w.w[static_cast<std::size_t>(i)], at(e++));
      std::memcpy(w.pwl_raw[static_cast<std::size_t>(i)].data(), at(e++),
                  5 * sizeof(double));
    }
    return;
  }
  auto& w = std::get<GatedUnitWeights>(weights);
  copy_tensor(w.w1, at(e++));
  copy_tensor(w.w2, at(e++));
  for (int t = 0; t < w.depth(); ++t) {
    const auto ti = static_cast<std::size_t>(t);
    copy_tensor(w.wf1[ti], at(e++));
    copy_tensor(w.wf2[ti], at(e++));
    if (w.arch == Architecture::Slstm) {
      copy_tensor(w.wi1[ti], at(e++));
      copy_tensor(w.wi2[ti], at(e++));
    }
    const double* act = at(e++);
    w.out_act[ti].scale = act[0];
    w.out_act[ti].threshold = act[1];
  }
}

// ---------------------------------------------------------------------------
// Loss

double mse_loss(const std::vector<CVector>& estimates,
                const std::vector<CVector>& truths) {
  if (estimates.empty() || estimates.size() != truths.size())
    throw ConfigError("mse_loss: empty batch or size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].size() != truths[i].size())
      throw ConfigError("mse_loss: shape mismatch");
    acc += (estimates[i] - truths[i]).squaredNorm();
  }
  return acc / static_cast<double>(estimates.size());
}

// ---------------------------------------------------------------------------
// Gradient helpers

namespace {

using ArrayXX = Eigen::ArrayXXd;

/// Accumulates the complex-matrix gradient dW += dY_c X_c^H from stacked
/// pieces into an interleaved (re, im) segment of `grad`.
void accumulate_matrix_grad(RVector& grad, std::size_t offset, Eigen::Index rows,
                            Eigen::Index cols, const RMatrix& dy,
                            const RMatrix& x) {
  RMatrix dre(rows, cols), dim(rows, cols);
  dre.noalias() = dy.topRows(rows) * x.topRows(cols).transpose();
  dre.noalias() += dy.bottomRows(rows) * x.bottomRows(cols).transpose();
  dim.noalias() = dy.bottomRows(rows) * x.topRows(cols).transpose();
  dim.noalias() -= dy.topRows(rows) * x.bottomRows(cols).transpose();
  using Stride = Eigen::Stride<Eigen::Dynamic, 2>;
  Eigen::Map<RMatrix, 0, Stride> re_map(grad.data() + offset, rows, cols,
                                        Stride(2 * rows, 2));
  Eigen::Map<RMatrix, 0, Stride> im_map(grad.data() + offset + 1, rows, cols,
                                        Stride(2 * rows, 2));
  re_map += dre;
  im_map += dim;
}

constexpr double kTiny = 1e-300;

/// Backward through eta_dt (elementwise, stacked): returns delta wrt cell and
/// accumulates scale/threshold gradients.
RMatrix dt_backward(const RMatrix& cell, const RMatrix& delta_out,
                    const DtParams& p, double& d_scale, double& d_theta) {
  const ArrayXX tp = (cell.array() + p.threshold).tanh();
  const ArrayXX tm = (cell.array() - p.threshold).tanh();
  d_scale += (delta_out.array() * (tp + tm)).sum();
  d_theta += (delta_out.array() * p.scale * (tm.square() - tp.square())).sum();
  return (delta_out.array() * p.scale * ((1.0 - tp.square()) + (1.0 - tm.square())))
      .matrix();
}

/// Backward through eta_cv-dt (per complex pair).
RMatrix cv_dt_backward(const RMatrix& cell, const RMatrix& delta_out,
                       const DtParams& p, double& d_scale, double& d_theta) {
  const Eigen::Index l = cell.rows() / 2;
  const auto ct = cell.topRows(l).array();
  const auto cb = cell.bottomRows(l).array();
  const auto dt_ = delta_out.topRows(l).array();
  const auto db_ = delta_out.bottomRows(l).array();
  const ArrayXX r = (ct.square() + cb.square()).sqrt();
  const ArrayXX rs = r.max(kTiny);
  const ArrayXX tp = (r + p.threshold).tanh();
  const ArrayXX tm = (r - p.threshold).tanh();
  const ArrayXX h = tp + tm;
  const ArrayXX hp = (1.0 - tp.square()) + (1.0 - tm.square());
  const ArrayXX q = p.scale * h / rs;
  const ArrayXX qp_over_r = p.scale * (hp * r - h) / (rs * rs * rs);
  const ArrayXX zdot = ct * dt_ + cb * db_;
  RMatrix delta_cell(cell.rows(), cell.cols());
  delta_cell.topRows(l) = (q * dt_ + qp_over_r * ct * zdot).matrix();
  delta_cell.bottomRows(l) = (q * db_ + qp_over_r * cb * zdot).matrix();
  d_scale += (h / rs * zdot).sum();
  d_theta += (p.scale * (tm.square() - tp.square()) / rs * zdot).sum();
  return delta_cell;
}

double gated_backward(const GatedUnitWeights& w, const RMatrix& g_st,
                      const RMatrix& truth_st, const ParamLayout& layout,
                      RVector& grad) {
  BatchTrace tr;
  const RMatrix out = gated_forward_batch(w, g_st, &tr);
  const Eigen::Index b = g_st.cols();
  const Eigen::Index l = w.l();
  const int depth = w.depth();
  const bool slstm = w.arch == Architecture::Slstm;
  const bool cv = w.arch == Architecture::CvSmgu;
  const double loss = (out - truth_st).squaredNorm() / static_cast<double>(b);

  const RMatrix w2_st = stack_matrix(w.w2);
  const int per_unit = slstm ? 5 : 3;
  const auto off = [&](std::size_t e) { return layout.entries[e].offset; };

  RMatrix delta = (2.0 / static_cast<double>(b)) * (out - truth_st);
  RMatrix delta_cell_carry;  // SLSTM cell-to-cell path
  if (slstm) delta_cell_carry = RMatrix::Zero(2 * l, b);

  for (int t = depth - 1; t >= 0; --t) {
    const auto ti = static_cast<std::size_t>(t);
    const std::size_t base = 2 + ti * static_cast<std::size_t>(per_unit);
    const std::size_t act_entry = base + (slstm ? 4 : 2);
    const DtParams& act = w.out_act[ti];
    double d_scale = 0.0, d_theta = 0.0;

    RMatrix delta_cell =
        cv ? cv_dt_backward(tr.cell[ti], delta, act, d_scale, d_theta)
           : dt_backward(tr.cell[ti], delta, act, d_scale, d_theta);
    grad(static_cast<Eigen::Index>(off(act_entry))) += d_scale;
    grad(static_cast<Eigen::Index>(off(act_entry)) + 1) += d_theta;

    const bool has_prev = t > 0;
    const RMatrix& prev = has_prev ? tr.out[ti - 1] : tr.cell[ti];  // unused at t=0

    RMatrix delta_a;  // wrt forget-gate pre-activation
    RMatrix delta_prev;

    if (!slstm) {
      // c = prev + F (cbar - prev), cbar = W2 (F .* prev) + W1 g
      RMatrix delta_cbar(2 * l, b), delta_f_dup(2 * l, b);
      if (cv) {
        const ArrayXX f = tr.forget[ti].array();  // L x B
        delta_cbar.topRows(l) = (f * delta_cell.topRows(l).array()).matrix();
        delta_cbar.bottomRows(l) = (f * delta_cell.bottomRows(l).array()).matrix();
      } else {
        delta_cbar = tr.forget[ti].cwiseProduct(delta_cell);
      }
      if (has_prev)
        delta_f_dup = delta_cell.cwiseProduct(tr.cbar[ti] - prev);
      else
        delta_f_dup = delta_cell.cwiseProduct(tr.cbar[ti]);

      accumulate_matrix_grad(grad, off(1), l, l, delta_cbar, tr.gated_prev[ti]);
      accumulate_matrix_grad(grad, off(0), l, w.n(), delta_cbar, g_st);

      if (has_prev) {
        RMatrix delta_u(2 * l, b);
        delta_u.noalias() = w2_st.transpose() * delta_cbar;
        delta_f_dup += delta_u.cwiseProduct(prev);
        if (cv) {
          const ArrayXX f = tr.forget[ti].array();
          delta_prev.resize(2 * l, b);
          delta_prev.topRows(l) =
              ((1.0 - f) * delta_cell.topRows(l).array() +
               f * delta_u.topRows(l).array())
                  .matrix();
          delta_prev.bottomRows(l) =
              ((1.0 - f) * delta_cell.bottomRows(l).array() +
               f * delta_u.bottomRows(l).array())
                  .matrix();
        } else {
          delta_prev = (RMatrix::Ones(2 * l, b) - tr.forget[ti])
                           .cwiseProduct(delta_cell) +
                       tr.forget[ti].cwiseProduct(delta_u);
        }
      }

      if (cv) {
        // f = tanh(|a|) per complex pair, shared by both channels.
        const ArrayXX f = tr.forget[ti].array();
        const ArrayXX delta_f =
            delta_f_dup.topRows(l).array() + delta_f_dup.bottomRows(l).array();
        const auto at_ = tr.gate_pre[ti].topRows(l).array();
        const auto ab_ = tr.gate_pre[ti].bottomRows(l).array();
        const ArrayXX rm = (at_.square() + ab_.square()).sqrt().max(kTiny);
        const ArrayXX delta_rm = delta_f * (1.0 - f.square());
        delta_a.resize(2 * l, b);
        delta_a.topRows(l) = (delta_rm * at_ / rm).matrix();
        delta_a.bottomRows(l) = (delta_rm * ab_ / rm).matrix();
      } else {
        const ArrayXX f = tr.forget[ti].array();
        delta_a = (delta_f_dup.array() * f * (1.0 - f)).matrix();
      }
    } else {
      // SLSTM: c = f c_prev + i cbar, cbar = W2 prev + W1 g
      RMatrix delta_c_total = delta_cell + delta_cell_carry;
      const RMatrix& f = tr.forget[ti];
      const RMatrix& ig = tr.input_gate[ti];
      RMatrix delta_ig = delta_c_total.cwiseProduct(tr.cbar[ti]);
      RMatrix delta_cbar = delta_c_total.cwiseProduct(ig);
      RMatrix delta_ai = delta_ig.cwiseProduct(ig)
                             .cwiseProduct(RMatrix::Ones(2 * l, b) - ig);
      if (has_prev) {
        RMatrix delta_f = delta_c_total.cwiseProduct(tr.cell[ti - 1]);
        delta_a = delta_f.cwiseProduct(f).cwiseProduct(RMatrix::Ones(2 * l, b) - f);
      } else {
        delta_a = RMatrix::Zero(2 * l, b);  // c_prev = 0
      }
      delta_cell_carry = f.cwiseProduct(delta_c_total);

      accumulate_matrix_grad(grad, off(0), l, w.n(), delta_cbar, g_st);
      accumulate_matrix_grad(grad, off(base + 2), l, w.n(), delta_ai, g_st);
      if (has_prev) {
        accumulate_matrix_grad(grad, off(1), l, l, delta_cbar, prev);
        accumulate_matrix_grad(grad, off(base + 3), l, l, delta_ai, prev);
        delta_prev.resize(2 * l, b);
        delta_prev.noalias() = w2_st.transpose() * delta_cbar;
        const RMatrix wi2_st = stack_matrix(w.wi2[ti]);
        delta_prev.noalias() += wi2_st.transpose() * delta_ai;
      }
    }

    // a = Wf2 prev + Wf1 g
    accumulate_matrix_grad(grad, off(base + 0), l, w.n(), delta_a, g_st);
    if (has_prev) {
      accumulate_matrix_grad(grad, off(base + 1), l, l, delta_a, prev);
      const RMatrix wf2_st = stack_matrix(w.wf2[ti]);
      delta_prev.noalias() += wf2_st.transpose() * delta_a;
      delta = std::move(delta_prev);
    }
  }
  return loss;
}

double gamma_net_backward(const GammaNetWeights& w, const CMatrix& r,
                          const RMatrix& g_st, const RMatrix& truth_st,
                          const ParamLayout& layout, RVector& grad) {
  BatchTrace tr;
  const RMatrix out = gamma_net_forward_batch(w, g_st, r, &tr);
  const Eigen::Index b = g_st.cols();
  const Eigen::Index l = w.l();
  const int depth = w.depth();
  const double loss = (out - truth_st).squaredNorm() / static_cast<double>(b);

  const RMatrix r_st = stack_matrix(r);
  const auto off = [&](std::size_t e) { return layout.entries[e].offset; };

  RMatrix delta = (2.0 / static_cast<double>(b)) * (out - truth_st);
  std::vector<char> in_support(static_cast<std::size_t>(l));
  RMatrix delta_v(2 * l, b);

  for (int i = depth - 1; i >= 0; --i) {
    const auto ii = static_cast<std::size_t>(i);
    const PwlParams pwl = w.pwl(i);
    const auto& raw = w.pwl_raw[ii];
    const RMatrix& pre = tr.pre[ii];
    double d1 = 0, d2 = 0, d3 = 0, d4 = 0, d5 = 0;

    for (Eigen::Index s = 0; s < b; ++s) {
      std::fill(in_support.begin(), in_support.end(), 0);
      for (int k : tr.support[ii][static_cast<std::size_t>(s)])
        in_support[static_cast<std::size_t>(k)] = 1;
      for (Eigen::Index k = 0; k < l; ++k) {
        const double dx = delta(k, s), dy = delta(l + k, s);
        if (in_support[static_cast<std::size_t>(k)]) {
          delta_v(k, s) = dx;
          delta_v(l + k, s) = dy;
          continue;
        }
        const Complex z(pre(k, s), pre(l + k, s));
        const RadialJacobian j = piecewise_linear_cv_jacobian(z, pwl);
        delta_v(k, s) = j.xx * dx + j.yx * dy;
        delta_v(l + k, s) = j.xy * dx + j.yy * dy;
        const PwlParamGrads pg = piecewise_linear_cv_param_grads(z, pwl);
        d1 += dx * pg.d1.real() + dy * pg.d1.imag();
        d2 += dx * pg.d2.real() + dy * pg.d2.imag();
        d3 += dx * pg.d3.real() + dy * pg.d3.imag();
        d4 += dx * pg.d4.real() + dy * pg.d4.imag();
        d5 += dx * pg.d5.real() + dy * pg.d5.imag();
      }
    }
    // Chain through the (softplus) reparameterization: t1 = sp(raw0),
    // t2 = sp(raw0) + sp(raw1).
    const std::size_t pwl_off = off(2 * ii + 1);
    grad(static_cast<Eigen::Index>(pwl_off) + 0) += (d1 + d2) * sigmoid(raw[0]);
    grad(static_cast<Eigen::Index>(pwl_off) + 1) += d2 * sigmoid(raw[1]);
    grad(static_cast<Eigen::Index>(pwl_off) + 2) += d3;
    grad(static_cast<Eigen::Index>(pwl_off) + 3) += d4;
    grad(static_cast<Eigen::Index>(pwl_off) + 4) += d5;

    accumulate_matrix_grad(grad, off(2 * ii), l, w.n(), delta_v, tr.resid[ii]);

    if (i > 0) {
      // v = gamma + W (g - R gamma) => d gamma = (I - (W R)) ^T delta_v
      const RMatrix w_st = stack_matrix(w.w[ii]);
      RMatrix tmp(2 * w.n(), b);
      tmp.noalias() = w_st.transpose() * delta_v;
      delta = delta_v;
      delta.noalias() -= r_st.transpose() * tmp;
    }
  }
  return loss;
}

}  // namespace

double backward_batch(const NetworkWeights& w, const CMatrix& r,
                      const RMatrix& g_st, const RMatrix& truth_st,
                      RVector& grad) {
  const ParamLayout layout = param_layout(w);
  if (grad.size() != static_cast<Eigen::Index>(layout.total))
    throw ConfigError("backward_batch: gradient buffer size mismatch");
  if (std::holds_alternative<GammaNetWeights>(w))
    return gamma_net_backward(std::get<GammaNetWeights>(w), r, g_st, truth_st,
                              layout, grad);
  return gated_backward(std::get<GatedUnitWeights>(w), g_st, truth_st, layout,
                        grad);
}

std::pair<double, RVector> backward(const NetworkWeights& w, const CMatrix& r,
                                    const std::vector<CVector>& g_batch,
                                    const std::vector<CVector>& truth_batch) {
  if (g_batch.empty() || g_batch.size() != truth_batch.size())
    throw ConfigError("backward: empty batch or size mismatch");
  if (depth_of(w) == 0) {
    // Zero-depth network: constant output, no trainable parameters.
    double acc = 0.0;
    for (const auto& t : truth_batch) acc += t.squaredNorm();
    return {acc / static_cast<double>(truth_batch.size()), RVector()};
  }
  const Eigen::Index b = static_cast<Eigen::Index>(g_batch.size());
  RMatrix g_st(2 * g_batch[0].size(), b);
  RMatrix t_st(2 * truth_batch[0].size(), b);
  for (Eigen::Index i = 0; i < b; ++i) {
    g_st.col(i) = stack_vector(g_batch[static_cast<std::size_t>(i)]);
    t_st.col(i) = stack_vector(truth_batch[static_cast<std::size_t>(i)]);
  }
  RVector grad = RVector::Zero(static_cast<Eigen::Index>(param_layout(w).total));
  const double loss = backward_batch(w, r, g_st, t_st, grad);
  return {loss, grad};
}

void adam_step(AdamState& state, RVector& params, const RVector& grad,
               double lr) {
  if (params.size() != grad.size() || state.m.size() != params.size())
    throw ConfigError("adam_step: shape mismatch");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v.array() =
      state.beta2 * state.v.array() + (1.0 - state.beta2) * grad.array().square();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

void enforce_parameter_invariants(const ParamLayout& layout, RVector& params) {
  for (const auto& e : layout.entries) {
    if (e.name.size() >= 4 && e.name.substr(e.name.size() - 4) == ".act") {
      auto& theta = params(static_cast<Eigen::Index>(e.offset) + 1);
      theta = std::abs(theta);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct ValidationSet {
  RMatrix g_st;      // 2N x V
  RMatrix truth_st;  // 2L x V
  RVector truth_norm2;
};

ValidationSet make_validation_set(const TrainConfig& config,
                                  const AcquisitionGeometry& geom,
                                  const ElevationGrid& grid, int count) {
  const double rho_s = rayleigh_resolution(geom);
  const double inf = std::numeric_limits<double>::infinity();
  SimulationParams sim;
  ValidationSet v;
  v.g_st.resize(2 * geom.count(), count);
  v.truth_st.resize(2 * grid.size(), count);
  v.truth_norm2.resize(count);
  Rng rng = Rng::stream(config.seed, 0xB);
  for (int i = 0; i < count; ++i) {
    GroundTruth t = i < count / 2 ? sample_single(rng, grid, sim)
                                  : sample_double(rng, grid, sim, rho_s);
    t.snr_db = inf;  // validation is noise-free
    const CVector g = synthesize(geom, t, rng);
    const CVector profile = t.profile();
    v.g_st.col(i) = stack_vector(g);
    v.truth_st.col(i) = stack_vector(profile);
    v.truth_norm2(i) = profile.squaredNorm();
  }
  return v;
}

double validation_nmse_db(const NetworkWeights& weights, const CMatrix& r,
                          const ValidationSet& v) {
  const Eigen::Index count = v.g_st.cols();
  const Eigen::Index chunk = 1024;
  double acc = 0.0;
  for (Eigen::Index start = 0; start < count; start += chunk) {
    const Eigen::Index width = std::min(chunk, count - start);
    const RMatrix g = v.g_st.middleCols(start, width);
    RMatrix out;
    if (std::holds_alternative<GammaNetWeights>(weights))
      out = gamma_net_forward_batch(std::get<GammaNetWeights>(weights), g, r);
    else
      out = gated_forward_batch(std::get<GatedUnitWeights>(weights), g);
    for (Eigen::Index i = 0; i < width; ++i)
      acc += (out.col(i) - v.truth_st.col(start + i)).squaredNorm() /
             v.truth_norm2(start + i);
  }
  const double linear = acc / static_cast<double>(count);
  if (linear <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(linear);
}

}  // namespace

Checkpoint train(const TrainConfig& config, const Dataset& dataset,
                 const AcquisitionGeometry& geom, const ElevationGrid& grid) {
  return train(config, dataset, geom, grid, EpochCallback());
}

Checkpoint train(const TrainConfig& config, const Dataset& dataset,
                 const AcquisitionGeometry& geom, const ElevationGrid& grid,
                 const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.samples.empty()) throw ConfigError("train: empty dataset");
  if (static_cast<int>(dataset.n) != geom.count() ||
      static_cast<int>(dataset.l) != grid.size())
    throw ConfigError("train: dataset shapes do not match geometry/grid");
  if (dataset.geometry_fingerprint != geom.fingerprint())
    throw ConfigError("train: dataset geometry fingerprint mismatch");

  const CMatrix r = build_steering_matrix(geom, grid);
  const double beta = default_step_size(r);
  Rng init_rng = Rng::stream(config.seed, 0xA);
  InitOptions opts;
  opts.lambda = config.lambda;
  opts.gate_std = config.gate_std;
  opts.dt_scale = config.dt_scale;
  opts.step_scale = config.step_scale;
  opts.w1_scale = config.w1_scale;
  opts.pwl_gain = config.pwl_gain;
  NetworkWeights weights =
      init_weights(config.arch, r, beta, config.depth, init_rng, opts);
  const ParamLayout layout = param_layout(weights);
  RVector flat = pack_parameters(weights);
  RVector grad = RVector::Zero(flat.size());
  AdamState adam;
  adam.reset(flat.size());

  Checkpoint ckpt;
  ckpt.arch = config.arch;
  ckpt.depth = config.depth;
  ckpt.n = geom.count();
  ckpt.l = grid.size();
  ckpt.beta = beta;
  ckpt.geometry_fingerprint = geom.fingerprint();

  if (config.epochs == 0) {
    ckpt.weights = weights;
    return ckpt;
  }

  const ValidationSet val =
      make_validation_set(config, geom, grid, config.validation_samples);

  const Eigen::Index n2 = 2 * geom.count();
  const Eigen::Index l2 = 2 * static_cast<Eigen::Index>(grid.size());
  const std::size_t total = dataset.samples.size();
  std::vector<std::uint32_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = static_cast<std::uint32_t>(i);

  RVector best_flat = flat;
  double best_val = std::numeric_limits<double>::infinity();

  RMatrix g_batch(n2, config.batch_size), t_batch(l2, config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = Rng::stream(config.seed, 0xC, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = total; i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(static_cast<int>(i)));
      std::swap(order[i - 1], order[j]);
    }
    const double lr = config.learning_rate(epoch);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < total; start += static_cast<std::size_t>(config.batch_size)) {
      const auto width = static_cast<Eigen::Index>(
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), total - start));
      for (Eigen::Index k = 0; k < width; ++k) {
        const auto idx = order[start + static_cast<std::size_t>(k)];
        const auto& s = dataset.samples[idx];
        g_batch.col(k).head(geom.count()) = s.g.real();
        g_batch.col(k).tail(geom.count()) = s.g.imag();
        t_batch.col(k).setZero();
        for (int sc = 0; sc < 2; ++sc) {
          const int bin = s.support[static_cast<std::size_t>(sc)];
          if (bin < 0) continue;
          t_batch(bin, k) += s.amplitude[static_cast<std::size_t>(sc)].real();
          t_batch(grid.size() + bin, k) += s.amplitude[static_cast<std::size_t>(sc)].imag();
        }
      }
      grad.setZero();
      const double loss = backward_batch(weights, r, g_batch.leftCols(width),
                                         t_batch.leftCols(width), grad);
      if (!std::isfinite(loss))
        throw NumericError("train: loss diverged (non-finite) at epoch " +
                           std::to_string(epoch));
      if (config.clip_norm > 0.0) {
        const double norm = grad.norm();
        if (norm > config.clip_norm) grad *= config.clip_norm / norm;
      }
      adam_step(adam, flat, grad, lr);
      enforce_parameter_invariants(layout, flat);
      unpack_parameters(weights, flat);
      epoch_loss += loss * static_cast<double>(width);
      seen += static_cast<std::size_t>(width);
    }
    epoch_loss /= static_cast<double>(seen);

    const double val_nmse = validation_nmse_db(weights, r, val);
    ckpt.train_loss.push_back(epoch_loss);
    ckpt.val_nmse_db.push_back(val_nmse);
    if (val_nmse < best_val) {
      best_val = val_nmse;
      best_flat = flat;
    }
    if (on_epoch) on_epoch(epoch, epoch_loss, val_nmse);
  }

  unpack_parameters(weights, best_flat);
  ckpt.weights = std::move(weights);
  return ckpt;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {
constexpr char kCkptMagic[4] = {'T', 'S', 'C', 'K'};
constexpr int kCkptVersion = 1;
}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  const ParamLayout layout = param_layout(c.weights);
  nlohmann::json header;
  header["format_version"] = kCkptVersion;
  header["architecture"] = to_string(c.arch);
  header["depth"] = c.depth;
  header["n"] = c.n;
  header["l"] = c.l;
  header["beta"] = c.beta;
  header["geometry_fingerprint"] = c.geometry_fingerprint;
  if (std::holds_alternative<GammaNetWeights>(c.weights))
    header["support_percent"] = std::get<GammaNetWeights>(c.weights).support_percent;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : layout.entries) {
    tensors.push_back({{"name", e.name},
                       {"shape", e.shape},
                       {"dtype", e.complex ? "complex128" : "float64"},
                       {"offset", e.offset},
                       {"count", e.count}});
  }
  header["tensors"] = tensors;
  header["history"] = {{"train_loss", c.train_loss},
                       {"val_nmse_db", c.val_nmse_db}};

  const std::string hs = header.dump();
  const std::uint64_t hlen = hs.size();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("save_checkpoint: cannot open " + path);
  out.write(kCkptMagic, 4);
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  const RVector flat = pack_parameters(c.weights);
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(sizeof(double)) * flat.size());
  if (!out) throw NumericError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw ConfigError("load_checkpoint: bad magic (not a TSCK file): " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw ConfigError("load_checkpoint: truncated header: " + path);
  const nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("format_version").get<int>() != kCkptVersion)
    throw ConfigError("load_checkpoint: unsupported format version");

  Checkpoint c;
  c.arch = architecture_from_string(header.at("architecture").get<std::string>());
  c.depth = header.at("depth").get<int>();
  c.n = header.at("n").get<int>();
  c.l = header.at("l").get<int>();
  c.beta = header.at("beta").get<double>();
  c.geometry_fingerprint = header.at("geometry_fingerprint").get<std::string>();
  if (header.contains("history")) {
    c.train_loss = header["history"].value("train_loss", std::vector<double>{});
    c.val_nmse_db = header["history"].value("val_nmse_db", std::vector<double>{});
  }

  if (c.arch == Architecture::GammaNet) {
    GammaNetWeights w;
    w.w.assign(static_cast<std::size_t>(c.depth), CMatrix::Zero(c.l, c.n));
    w.pwl_raw.resize(static_cast<std::size_t>(c.depth));
    w.support_percent =
        header.at("support_percent").get<std::vector<double>>();
    c.weights = std::move(w);
  } else {
    GatedUnitWeights w;
    w.arch = c.arch;
    w.w1 = CMatrix::Zero(c.l, c.n);
    w.w2 = CMatrix::Zero(c.l, c.l);
    for (int t = 0; t < c.depth; ++t) {
      w.wf1.push_back(CMatrix::Zero(c.l, c.n));
      w.wf2.push_back(CMatrix::Zero(c.l, c.l));
      if (c.arch == Architecture::Slstm) {
        w.wi1.push_back(CMatrix::Zero(c.l, c.n));
        w.wi2.push_back(CMatrix::Zero(c.l, c.l));
      }
      w.out_act.push_back(DtParams{});
    }
    c.weights = std::move(w);
  }

  const ParamLayout layout = param_layout(c.weights);
  RVector flat(static_cast<Eigen::Index>(layout.total));
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(sizeof(double)) * flat.size());
  if (!in) throw ConfigError("load_checkpoint: truncated payload: " + path);
  unpack_parameters(c.weights, flat);
  return c;
}

}  // namespace tomornn
