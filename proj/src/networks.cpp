#include "tomornn/networks.hpp"

#include <cmath>

namespace tomornn {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}

// eta_dt applied elementwise to a stacked matrix.
RMatrix apply_dt(const RMatrix& x, const DtParams& p) {
  return p.scale *
         ((x.array() + p.threshold).tanh() + (x.array() - p.threshold).tanh());
}

// eta_cv-dt applied per complex pair (row l with row L+l) of a stacked matrix.
RMatrix apply_cv_dt(const RMatrix& x, const DtParams& p) {
  const Eigen::Index l = x.rows() / 2;
  const auto top = x.topRows(l).array();
  const auto bot = x.bottomRows(l).array();
  Eigen::ArrayXXd r = (top.square() + bot.square()).sqrt();
  Eigen::ArrayXXd h = (r + p.threshold).tanh() + (r - p.threshold).tanh();
  Eigen::ArrayXXd q = p.scale * h / r.max(1e-300);  // h(0) = 0, so q(0) = 0
  RMatrix out(x.rows(), x.cols());
  out.topRows(l) = (q * top).matrix();
  out.bottomRows(l) = (q * bot).matrix();
  return out;
}

RMatrix apply_sigmoid(const RMatrix& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

}  // namespace

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::GammaNet: return "gamma_net";
    case Architecture::Slstm: return "slstm";
    case Architecture::Smgu: return "smgu";
    case Architecture::CvSmgu: return "cv_smgu";
  }
  return "unknown";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "gamma_net") return Architecture::GammaNet;
  if (s == "slstm") return Architecture::Slstm;
  if (s == "smgu") return Architecture::Smgu;
  if (s == "cv_smgu") return Architecture::CvSmgu;
  throw ConfigError("unknown architecture: " + s);
}

RMatrix stack_matrix(const CMatrix& w) {
  const Eigen::Index r = w.rows(), c = w.cols();
  RMatrix s(2 * r, 2 * c);
  s.topLeftCorner(r, c) = w.real();
  s.topRightCorner(r, c) = -w.imag();
  s.bottomLeftCorner(r, c) = w.imag();
  s.bottomRightCorner(r, c) = w.real();
  return s;
}

RVector stack_vector(const CVector& v) {
  RVector s(2 * v.size());
  s.head(v.size()) = v.real();
  s.tail(v.size()) = v.imag();
  return s;
}

CVector unstack_vector(const RVector& v) {
  const Eigen::Index l = v.size() / 2;
  CVector c(l);
  c.real() = v.head(l);
  c.imag() = v.tail(l);
  return c;
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (y > 30.0) return y;
  if (y <= 0.0) throw ConfigError("softplus_inverse: need y > 0");
  return std::log(std::expm1(y));
}

PwlParams GammaNetWeights::pwl(int layer) const {
  const auto& raw = pwl_raw[static_cast<std::size_t>(layer)];
  PwlParams p;
  p.t1 = softplus(raw[0]);
  p.t2 = p.t1 + softplus(raw[1]);
  p.t3 = raw[2];
  p.t4 = raw[3];
  p.t5 = raw[4];
  return p;
}

void GammaNetWeights::set_pwl(int layer, const PwlParams& p) {
  if (!(0.0 < p.t1 && p.t1 < p.t2))
    throw ConfigError("pwl parameters require 0 < t1 < t2");
  auto& raw = pwl_raw[static_cast<std::size_t>(layer)];
  raw[0] = softplus_inverse(p.t1);
  raw[1] = softplus_inverse(p.t2 - p.t1);
  raw[2] = p.t3;
  raw[3] = p.t4;
  raw[4] = p.t5;
}

Architecture architecture_of(const NetworkWeights& w) {
  if (std::holds_alternative<GammaNetWeights>(w)) return Architecture::GammaNet;
  return std::get<GatedUnitWeights>(w).arch;
}

int depth_of(const NetworkWeights& w) {
  if (std::holds_alternative<GammaNetWeights>(w))
    return std::get<GammaNetWeights>(w).depth();
  return std::get<GatedUnitWeights>(w).depth();
}

std::size_t gate_parameter_count_complex(const GatedUnitWeights& w) {
  const std::size_t l = static_cast<std::size_t>(w.l());
  const std::size_t n = static_cast<std::size_t>(w.n());
  const std::size_t one_gate = l * l + l * n;
  return w.arch == Architecture::Slstm ? 2 * one_gate : one_gate;
}

std::size_t parameter_count(const NetworkWeights& weights) {
  if (std::holds_alternative<GammaNetWeights>(weights)) {
    const auto& w = std::get<GammaNetWeights>(weights);
    const std::size_t per_layer =
        2 * static_cast<std::size_t>(w.l()) * static_cast<std::size_t>(w.n()) + 5;
    return per_layer * static_cast<std::size_t>(w.depth());
  }
  const auto& w = std::get<GatedUnitWeights>(weights);
  const std::size_t l = static_cast<std::size_t>(w.l());
  const std::size_t n = static_cast<std::size_t>(w.n());
  const std::size_t shared = 2 * (l * n + l * l);
  const std::size_t per_unit = 2 * gate_parameter_count_complex(w) + 2;
  return shared + per_unit * static_cast<std::size_t>(w.depth());
}

// ---------------------------------------------------------------------------
// ISTA

CVector ista_step(const CVector& gamma, const CVector& g, const CMatrix& r,
                  double beta, double lambda) {
  require(r.rows() == g.size() && r.cols() == gamma.size(),
          "ista_step: shape mismatch");
  CVector pre = gamma + beta * (r.adjoint() * (g - r * gamma));
  const double theta = beta * lambda;
  for (Eigen::Index i = 0; i < pre.size(); ++i)
    pre(i) = soft_threshold_cv(pre(i), theta);
  return pre;
}

CVector ista_solve(const CVector& g, const CMatrix& r, double beta,
                   double lambda, int iterations) {
  CVector gamma = CVector::Zero(r.cols());
  // Precompute R^H g and R^H R once; the iteration is then two GEMVs.
  const CVector rhg = r.adjoint() * g;
  const CMatrix rhr = r.adjoint() * r;
  const double theta = beta * lambda;
  for (int k = 0; k < iterations; ++k) {
    CVector pre = gamma + beta * (rhg - rhr * gamma);
    for (Eigen::Index i = 0; i < pre.size(); ++i)
      pre(i) = soft_threshold_cv(pre(i), theta);
    gamma.swap(pre);
  }
  return gamma;
}

double bpdn_objective(const CVector& gamma, const CVector& g, const CMatrix& r,
                      double lambda) {
  return 0.5 * (g - r * gamma).squaredNorm() + lambda * gamma.cwiseAbs().sum();
}

double largest_eigenvalue_rhr(const CMatrix& r, int max_iters, double tol) {
  // Block power iteration with Rayleigh-Ritz extraction on the smaller Gram
  // matrix (its nonzero spectrum agrees with R^H R). A single power vector
  // stalls on clustered top eigenvalues (the reference geometry has a
  // relative gap of ~1e-8), while a small block resolves the cluster. Stops
  // on the Ritz residual, which bounds the eigenvalue error.
  const bool wide = r.rows() < r.cols();
  const CMatrix m = wide ? CMatrix(r * r.adjoint()) : CMatrix(r.adjoint() * r);
  if (m.norm() == 0.0) throw NumericError("power iteration: zero matrix");
  const Eigen::Index dim = m.rows();
  const Eigen::Index p = std::min<Eigen::Index>(dim, 8);

  Rng rng(0x9e3779b97f4a7c15ull);
  CMatrix v(dim, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < dim; ++i)
      v(i, j) = Complex(rng.normal(), rng.normal());
  v = Eigen::HouseholderQR<CMatrix>(v).householderQ() * CMatrix::Identity(dim, p);

  double ritz = 0.0;
  for (int k = 0; k < max_iters; ++k) {
    const CMatrix w = m * v;
    CMatrix h = v.adjoint() * w;
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    ritz = es.eigenvalues()(p - 1);
    const CVector top = v * es.eigenvectors().col(p - 1);
    const double resid = (m * top - ritz * top).norm();
    if (ritz > 0.0 && resid <= tol * ritz) return ritz;
    v = Eigen::HouseholderQR<CMatrix>(w).householderQ() * CMatrix::Identity(dim, p);
  }
  return ritz;
}

double default_step_size(const CMatrix& r) {
  return 1.0 / largest_eigenvalue_rhr(r);
}

// ---------------------------------------------------------------------------
// gamma-Net forward

RMatrix gamma_net_forward_batch(const GammaNetWeights& w, const RMatrix& g_st,
                                const CMatrix& r, BatchTrace* trace) {
  const int l = w.l();
  const int n = w.n();
  require(l > 0 && n > 0, "gamma_net: empty weights");
  require(r.rows() == n && r.cols() == l, "gamma_net: R shape mismatch");
  require(g_st.rows() == 2 * n, "gamma_net: measurement shape mismatch");
  const Eigen::Index b = g_st.cols();
  const int depth = w.depth();

  const RMatrix r_st = stack_matrix(r);
  RMatrix gamma = RMatrix::Zero(2 * l, b);
  if (trace) {
    trace->pre.resize(static_cast<std::size_t>(depth));
    trace->resid.resize(static_cast<std::size_t>(depth));
    trace->out.resize(static_cast<std::size_t>(depth));
    trace->support.resize(static_cast<std::size_t>(depth));
  }

  RMatrix resid(2 * n, b), v(2 * l, b), out(2 * l, b);
  std::vector<double> mag(static_cast<std::size_t>(l));
  CVector col(l);
  for (int i = 0; i < depth; ++i) {
    const RMatrix w_st = stack_matrix(w.w[static_cast<std::size_t>(i)]);
    resid.noalias() = g_st - r_st * gamma;
    v.noalias() = w_st * resid;
    v += gamma;

    const PwlParams pwl = w.pwl(i);
    const double rho = w.support_percent[static_cast<std::size_t>(i)];
    std::vector<std::vector<int>> support(static_cast<std::size_t>(b));

    for (Eigen::Index s = 0; s < b; ++s) {
      for (int k = 0; k < l; ++k) col(k) = Complex(v(k, s), v(l + k, s));
      auto idx = support_indices(col, rho);
      for (int k = 0; k < l; ++k) {
        const Complex y = piecewise_linear_cv(col(k), pwl);
        out(k, s) = y.real();
        out(l + k, s) = y.imag();
      }
      for (int k : idx) {
        out(k, s) = v(k, s);
        out(l + k, s) = v(l + k, s);
      }
      support[static_cast<std::size_t>(s)] = std::move(idx);
    }
    if (trace) {
      trace->pre[static_cast<std::size_t>(i)] = v;
      trace->resid[static_cast<std::size_t>(i)] = resid;
      trace->out[static_cast<std::size_t>(i)] = out;
      trace->support[static_cast<std::size_t>(i)] = std::move(support);
    }
    gamma = out;
  }
  return gamma;
}

// ---------------------------------------------------------------------------
// Gated forward

RMatrix gated_forward_batch(const GatedUnitWeights& w, const RMatrix& g_st,
                            BatchTrace* trace) {
  const int l = w.l();
  const int n = w.n();
  const int depth = w.depth();
  require(l > 0 && n > 0 && depth > 0, "gated forward: empty weights");
  require(g_st.rows() == 2 * n, "gated forward: measurement shape mismatch");
  const Eigen::Index b = g_st.cols();
  const bool slstm = w.arch == Architecture::Slstm;
  const bool cv = w.arch == Architecture::CvSmgu;

  const RMatrix w1_st = stack_matrix(w.w1);
  const RMatrix w2_st = stack_matrix(w.w2);
  const RMatrix w1g = w1_st * g_st;  // shared across units

  if (trace) {
    const auto d = static_cast<std::size_t>(depth);
    trace->gate_pre.resize(d);
    trace->forget.resize(d);
    trace->cbar.resize(d);
    trace->cell.resize(d);
    trace->out.resize(d);
    if (slstm) {
      trace->in_gate_pre.resize(d);
      trace->input_gate.resize(d);
    } else {
      trace->gated_prev.resize(d);
    }
  }

  RMatrix gamma = RMatrix::Zero(2 * l, b);
  RMatrix cell_prev = RMatrix::Zero(2 * l, b);  // SLSTM cell recurrence
  RMatrix a(2 * l, b), cbar(2 * l, b), cell(2 * l, b);

  for (int t = 0; t < depth; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    const RMatrix wf1_st = stack_matrix(w.wf1[ti]);
    const RMatrix wf2_st = stack_matrix(w.wf2[ti]);
    const DtParams& act = w.out_act[ti];

    a.noalias() = wf2_st * gamma;
    a.noalias() += wf1_st * g_st;

    if (cv) {
      // Complex-per-component forget gate shared by Re and Im channels.
      Eigen::ArrayXXd rm = (a.topRows(l).array().square() +
                            a.bottomRows(l).array().square())
                               .sqrt();
      Eigen::ArrayXXd f = rm.tanh();
      RMatrix u(2 * l, b);
      u.topRows(l) = (f * gamma.topRows(l).array()).matrix();
      u.bottomRows(l) = (f * gamma.bottomRows(l).array()).matrix();
      cbar.noalias() = w2_st * u;
      cbar += w1g;
      cell.topRows(l) =
          gamma.topRows(l) +
          (f * (cbar.topRows(l) - gamma.topRows(l)).array()).matrix();
      cell.bottomRows(l) =
          gamma.bottomRows(l) +
          (f * (cbar.bottomRows(l) - gamma.bottomRows(l)).array()).matrix();
      RMatrix out = apply_cv_dt(cell, act);
      if (trace) {
        trace->gate_pre[ti] = a;
        trace->forget[ti] = f.matrix();
        trace->gated_prev[ti] = u;
        trace->cbar[ti] = cbar;
        trace->cell[ti] = cell;
        trace->out[ti] = out;
      }
      gamma = std::move(out);
    } else if (!slstm) {
      RMatrix f = apply_sigmoid(a);
      RMatrix u = f.cwiseProduct(gamma);
      cbar.noalias() = w2_st * u;
      cbar += w1g;
      cell = gamma + f.cwiseProduct(cbar - gamma);
      RMatrix out = apply_dt(cell, act);
      if (trace) {
        trace->gate_pre[ti] = a;
        trace->forget[ti] = f;
        trace->gated_prev[ti] = u;
        trace->cbar[ti] = cbar;
        trace->cell[ti] = cell;
        trace->out[ti] = out;
      }
      gamma = std::move(out);
    } else {
      const RMatrix wi1_st = stack_matrix(w.wi1[ti]);
      const RMatrix wi2_st = stack_matrix(w.wi2[ti]);
      RMatrix ai(2 * l, b);
      ai.noalias() = wi2_st * gamma;
      ai.noalias() += wi1_st * g_st;
      RMatrix f = apply_sigmoid(a);
      RMatrix ig = apply_sigmoid(ai);
      cbar.noalias() = w2_st * gamma;
      cbar += w1g;
      cell = f.cwiseProduct(cell_prev) + ig.cwiseProduct(cbar);
      RMatrix out = apply_dt(cell, act);
      if (trace) {
        trace->gate_pre[ti] = a;
        trace->in_gate_pre[ti] = ai;
        trace->forget[ti] = f;
        trace->input_gate[ti] = ig;
        trace->cbar[ti] = cbar;
        trace->cell[ti] = cell;
        trace->out[ti] = out;
      }
      cell_prev = cell;
      gamma = std::move(out);
    }
  }
  return gamma;
}

// ---------------------------------------------------------------------------
// Single-sample wrappers

namespace {

NetworkTrace trace_from_batch(const BatchTrace& bt, int l, bool gamma_net) {
  NetworkTrace t;
  const std::size_t depth = gamma_net ? bt.pre.size() : bt.cell.size();
  for (std::size_t i = 0; i < depth; ++i) {
    if (gamma_net) {
      t.cell.push_back(unstack_vector(bt.pre[i].col(0)));
    } else {
      t.forget_gate.push_back(bt.forget[i].col(0));
      if (!bt.input_gate.empty()) t.input_gate.push_back(bt.input_gate[i].col(0));
      t.cell_candidate.push_back(unstack_vector(bt.cbar[i].col(0)));
      t.cell.push_back(unstack_vector(bt.cell[i].col(0)));
    }
    t.output.push_back(unstack_vector(bt.out[i].col(0)));
  }
  (void)l;
  return t;
}

}  // namespace

std::pair<CVector, NetworkTrace> gamma_net_forward(const GammaNetWeights& w,
                                                   const CVector& g,
                                                   const CMatrix& r) {
  BatchTrace bt;
  RMatrix g_st = stack_vector(g);
  RMatrix out = gamma_net_forward_batch(w, g_st, r, &bt);
  return {unstack_vector(out.col(0)), trace_from_batch(bt, w.l(), true)};
}

namespace {

std::pair<CVector, NetworkTrace> gated_forward_single(const GatedUnitWeights& w,
                                                      const CVector& g) {
  require(g.size() == w.n(), "gated forward: measurement length mismatch");
  BatchTrace bt;
  RMatrix g_st = stack_vector(g);
  RMatrix out = gated_forward_batch(w, g_st, &bt);
  return {unstack_vector(out.col(0)), trace_from_batch(bt, w.l(), false)};
}

}  // namespace

std::pair<CVector, NetworkTrace> slstm_forward(const GatedUnitWeights& w,
                                               const CVector& g) {
  require(w.arch == Architecture::Slstm, "slstm_forward: wrong architecture");
  return gated_forward_single(w, g);
}

std::pair<CVector, NetworkTrace> smgu_forward(const GatedUnitWeights& w,
                                              const CVector& g) {
  require(w.arch == Architecture::Smgu, "smgu_forward: wrong architecture");
  return gated_forward_single(w, g);
}

std::pair<CVector, NetworkTrace> cv_smgu_forward(const GatedUnitWeights& w,
                                                 const CVector& g) {
  require(w.arch == Architecture::CvSmgu, "cv_smgu_forward: wrong architecture");
  return gated_forward_single(w, g);
}

std::pair<CVector, NetworkTrace> network_forward(const NetworkWeights& w,
                                                 const CVector& g,
                                                 const CMatrix& r) {
  if (std::holds_alternative<GammaNetWeights>(w))
    return gamma_net_forward(std::get<GammaNetWeights>(w), g, r);
  return gated_forward_single(std::get<GatedUnitWeights>(w), g);
}

// ---------------------------------------------------------------------------
// Initialization

NetworkWeights init_weights(Architecture arch, const CMatrix& r, double beta,
                            int depth, Rng& rng, const InitOptions& opts) {
  require(depth >= 1, "init_weights: depth must be >= 1");
  require(r.size() > 0, "init_weights: empty steering matrix");
  const int n = static_cast<int>(r.rows());
  const int l = static_cast<int>(r.cols());
  const double step = opts.step_scale * beta;
  const double theta0 = step * opts.lambda;

  if (arch == Architecture::GammaNet) {
    GammaNetWeights w;
    w.w.assign(static_cast<std::size_t>(depth), step * r.adjoint());
    w.pwl_raw.resize(static_cast<std::size_t>(depth));
    w.support_percent.resize(static_cast<std::size_t>(depth));
    PwlParams p;
    p.t1 = theta0;
    p.t2 = 2.0 * theta0;
    p.t3 = opts.pwl_leak;
    p.t4 = opts.pwl_gain;
    p.t5 = opts.pwl_gain;
    for (int i = 0; i < depth; ++i) {
      w.set_pwl(i, p);
      w.support_percent[static_cast<std::size_t>(i)] =
          std::min((i + 1) * opts.support_step, opts.support_max);
    }
    return w;
  }

  GatedUnitWeights w;
  w.arch = arch;
  w.w1 = (opts.w1_scale * step) * r.adjoint();
  w.w2 = CMatrix::Identity(l, l) - step * (r.adjoint() * r);
  auto gaussian = [&](int rows, int cols) {
    CMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i)
        m(i, j) = Complex(opts.gate_std * rng.normal(),
                          opts.gate_std * rng.normal());
    return m;
  };
  for (int t = 0; t < depth; ++t) {
    w.wf1.push_back(gaussian(l, n));
    w.wf2.push_back(gaussian(l, l));
    if (arch == Architecture::Slstm) {
      w.wi1.push_back(gaussian(l, n));
      w.wi2.push_back(gaussian(l, l));
    }
    w.out_act.push_back(DtParams{opts.dt_scale, theta0});
  }
  return w;
}

}  // namespace tomornn
