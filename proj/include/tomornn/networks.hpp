#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "tomornn/activations.hpp"
#include "tomornn/common.hpp"
#include "tomornn/rng.hpp"

namespace tomornn {

enum class Architecture { GammaNet, Slstm, Smgu, CvSmgu };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Real-stacked representation of complex objects:
//   v~ = [Re v; Im v],  W~ = [[Re W, -Im W], [Im W, Re W]].
// The production forward/backward passes run in this representation; the
// complex-domain equivalents exist as independent test oracles.

RMatrix stack_matrix(const CMatrix& w);
RVector stack_vector(const CVector& v);
CVector unstack_vector(const RVector& v);

// ---------------------------------------------------------------------------
// Weights

/// Unrolled ISTA with per-layer weight matrices, support selection and
/// piecewise-linear shrinkage.
///
/// The pwl parameters are stored in raw form (a, d, t3, t4, t5) with
/// t1 = softplus(a) and t2 = t1 + softplus(d), which keeps 0 < t1 < t2 under
/// unconstrained updates. `pwl(i)` yields the effective parameters.
struct GammaNetWeights {
  std::vector<CMatrix> w;                      // per layer, L x N
  std::vector<std::array<double, 5>> pwl_raw;  // per layer
  std::vector<double> support_percent;         // rho^i schedule, not trained

  int depth() const { return static_cast<int>(w.size()); }
  int l() const { return depth() ? static_cast<int>(w[0].rows()) : 0; }
  int n() const { return depth() ? static_cast<int>(w[0].cols()) : 0; }

  PwlParams pwl(int layer) const;
  void set_pwl(int layer, const PwlParams& p);
};

double softplus(double x);
double softplus_inverse(double y);

/// Weights of one gated recurrent solver (SLSTM, SMGU or CV-SMGU).
///
/// W1 (L x N) and W2 (L x L) are shared across units; gate matrices are per
/// unit. SLSTM carries input-gate matrices in addition to the forget gate.
struct GatedUnitWeights {
  Architecture arch = Architecture::Smgu;
  CMatrix w1;                      // shared, L x N
  CMatrix w2;                      // shared, L x L
  std::vector<CMatrix> wf1;        // per unit, L x N
  std::vector<CMatrix> wf2;        // per unit, L x L
  std::vector<CMatrix> wi1;        // SLSTM only
  std::vector<CMatrix> wi2;        // SLSTM only
  std::vector<DtParams> out_act;   // per unit

  int depth() const { return static_cast<int>(wf1.size()); }
  int l() const { return static_cast<int>(w2.rows()); }
  int n() const { return static_cast<int>(w1.cols()); }
};

using NetworkWeights = std::variant<GammaNetWeights, GatedUnitWeights>;

Architecture architecture_of(const NetworkWeights& w);
int depth_of(const NetworkWeights& w);

/// Complex-valued gate parameters per unit (L^2 + N L for one gate).
std::size_t gate_parameter_count_complex(const GatedUnitWeights& w);
/// Total trainable real parameters.
std::size_t parameter_count(const NetworkWeights& w);

// ---------------------------------------------------------------------------
// Traces

/// Per-unit intermediates of one forward pass (single sample), in complex
/// form. Gates are real vectors: length 2L for the stacked-gate variants,
/// length L for CV-SMGU. For gamma-Net, `cell` holds the pre-activation and
/// gate/candidate fields stay empty.
struct NetworkTrace {
  std::vector<RVector> forget_gate;
  std::vector<RVector> input_gate;
  std::vector<CVector> cell_candidate;
  std::vector<CVector> cell;
  std::vector<CVector> output;

  int depth() const { return static_cast<int>(output.size()); }
};

/// Batched intermediates in the stacked representation (training workspace).
/// All dense fields are (2L x B) except gate_mag/forget for CV-SMGU (L x B).
struct BatchTrace {
  std::vector<RMatrix> gate_pre;
  std::vector<RMatrix> in_gate_pre;
  std::vector<RMatrix> forget;
  std::vector<RMatrix> input_gate;
  std::vector<RMatrix> gated_prev;  // f .* gamma_prev (SMGU/CV-SMGU)
  std::vector<RMatrix> cbar;
  std::vector<RMatrix> cell;
  std::vector<RMatrix> out;
  std::vector<RMatrix> pre;                          // gamma-Net
  std::vector<RMatrix> resid;                        // gamma-Net, 2N x B
  std::vector<std::vector<std::vector<int>>> support;  // gamma-Net
};

// ---------------------------------------------------------------------------
// Classic ISTA

/// One proximal-gradient step for 0.5 ||g - R gamma||^2 + lambda ||gamma||_1:
/// soft thresholding of gamma + beta R^H (g - R gamma) at beta * lambda.
CVector ista_step(const CVector& gamma, const CVector& g, const CMatrix& r,
                  double beta, double lambda);

CVector ista_solve(const CVector& g, const CMatrix& r, double beta,
                   double lambda, int iterations);

double bpdn_objective(const CVector& gamma, const CVector& g, const CMatrix& r,
                      double lambda);

/// Largest eigenvalue of R^H R by power iteration.
double largest_eigenvalue_rhr(const CMatrix& r, int max_iters = 100000,
                              double tol = 1e-10);

/// 1 / largest eigenvalue of R^H R.
double default_step_size(const CMatrix& r);

// ---------------------------------------------------------------------------
// Forward passes (production, real-stacked). The batched variants are the
// primitive; single-sample wrappers fill a NetworkTrace.

RMatrix gamma_net_forward_batch(const GammaNetWeights& w, const RMatrix& g_st,
                                const CMatrix& r, BatchTrace* trace = nullptr);
RMatrix gated_forward_batch(const GatedUnitWeights& w, const RMatrix& g_st,
                            BatchTrace* trace = nullptr);

std::pair<CVector, NetworkTrace> gamma_net_forward(const GammaNetWeights& w,
                                                   const CVector& g,
                                                   const CMatrix& r);
std::pair<CVector, NetworkTrace> slstm_forward(const GatedUnitWeights& w,
                                               const CVector& g);
std::pair<CVector, NetworkTrace> smgu_forward(const GatedUnitWeights& w,
                                              const CVector& g);
std::pair<CVector, NetworkTrace> cv_smgu_forward(const GatedUnitWeights& w,
                                                 const CVector& g);

/// Dispatch on the stored architecture. `r` is only used by gamma-Net.
std::pair<CVector, NetworkTrace> network_forward(const NetworkWeights& w,
                                                 const CVector& g,
                                                 const CMatrix& r);

// ---------------------------------------------------------------------------
// Initialization

struct InitOptions {
  double lambda = 1.0;        // initial thresholds are step * lambda
  double gate_std = 0.01;     // gaussian std of gate matrix entries
  double pwl_leak = 0.05;     // initial below-threshold gain t3
  double support_step = 1.2;  // rho^i = min(i * step, max), percent
  double support_max = 12.0;
  double dt_scale = 0.5;      // initial double-tanh scale s
  double step_scale = 1.0;    // multiplies beta in W1/W2/W^i (1 = ISTA point)
  double w1_scale = 1.0;      // extra multiplier on the gated-unit W1 only
  double pwl_gain = 1.0;      // initial pwl slopes t4 = t5
};

/// gamma-Net: W^i = beta R^H per layer. Gated units: W1 = beta R^H,
/// W2 = I - beta R^H R (the ISTA-equivalent point), gate entries
/// ~ N(0, gate_std^2) per real component.
NetworkWeights init_weights(Architecture arch, const CMatrix& r, double beta,
                            int depth, Rng& rng, const InitOptions& opts = {});

}  // namespace tomornn
