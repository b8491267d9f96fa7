#pragma once

#include <functional>

#include "tomornn/common.hpp"

namespace tomornn {

/// Double-tanh parameters: eta_dt(x) = scale * [tanh(x+theta) + tanh(x-theta)].
struct DtParams {
  double scale = 0.5;
  double threshold = 0.0;  // >= 0
};

/// Piecewise-linear shrinkage parameters; requires 0 < t1 < t2.
struct PwlParams {
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;  // gain below t1
  double t4 = 0.0;  // slope on (t1, t2]
  double t5 = 0.0;  // slope beyond t2
};

double sigmoid(double x);

/// Magnitude shrink by theta, phase preserved; 0 maps to 0.
Complex soft_threshold_cv(Complex x, double theta);

double double_tanh(double x, const DtParams& p);

/// Double tanh applied to the magnitude, phase preserved; 0 maps to 0.
Complex double_tanh_cv(Complex x, const DtParams& p);

/// Three magnitude regimes with gains (t3, t4, t5), phase preserved.
Complex piecewise_linear_cv(Complex x, const PwlParams& p);

/// Indices of the ceil(rho_percent * L / 100) largest-magnitude entries,
/// ties broken toward the lower index. Sorted ascending.
std::vector<int> support_indices(const CVector& x, double rho_percent);

/// Entries on the selected support pass through; the rest are shrunk.
CVector support_select(const CVector& x, double rho_percent,
                       const std::function<Complex(Complex)>& shrink);

// ---------------------------------------------------------------------------
// Derivatives used by reverse-mode training and the finite-difference checks.
// At magnitude kinks (|x| = 0 and the pwl breakpoints) the branch is treated
// as constant and the |x| = 0 Jacobian is defined as 0.

double sigmoid_dx(double x);
double double_tanh_dx(double x, const DtParams& p);
double double_tanh_dscale(double x, const DtParams& p);
double double_tanh_dtheta(double x, const DtParams& p);

/// Jacobian of a phase-preserving radial map out = q(r) * (x, y), r = |(x,y)|,
/// as the 2x2 block [[dx_dx, dx_dy], [dy_dx, dy_dy]].
struct RadialJacobian {
  double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;
};

RadialJacobian double_tanh_cv_jacobian(Complex x, const DtParams& p);
Complex double_tanh_cv_dscale(Complex x, const DtParams& p);
Complex double_tanh_cv_dtheta(Complex x, const DtParams& p);

RadialJacobian piecewise_linear_cv_jacobian(Complex x, const PwlParams& p);
/// d out / d (t1..t5), each a complex vector along the phase direction.
struct PwlParamGrads {
  Complex d1, d2, d3, d4, d5;
};
PwlParamGrads piecewise_linear_cv_param_grads(Complex x, const PwlParams& p);

}  // namespace tomornn
