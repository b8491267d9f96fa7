#include "tomornn/activations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace tomornn {

namespace {

double sech2(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

double dt_h(double r, const DtParams& p) {
  return std::tanh(r + p.threshold) + std::tanh(r - p.threshold);
}

double dt_hprime(double r, const DtParams& p) {
  return sech2(r + p.threshold) + sech2(r - p.threshold);
}

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double sigmoid_dx(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

Complex soft_threshold_cv(Complex x, double theta) {
  const double r = std::abs(x);
  if (r == 0.0) return {0.0, 0.0};
  const double shrunk = std::max(r - theta, 0.0);
  return x * (shrunk / r);
}

double double_tanh(double x, const DtParams& p) { return p.scale * dt_h(x, p); }

double double_tanh_dx(double x, const DtParams& p) {
  return p.scale * dt_hprime(x, p);
}

double double_tanh_dscale(double x, const DtParams& p) { return dt_h(x, p); }

double double_tanh_dtheta(double x, const DtParams& p) {
  return p.scale * (sech2(x + p.threshold) - sech2(x - p.threshold));
}

Complex double_tanh_cv(Complex x, const DtParams& p) {
  const double r = std::abs(x);
  if (r == 0.0) return {0.0, 0.0};
  return x * (p.scale * dt_h(r, p) / r);
}

RadialJacobian double_tanh_cv_jacobian(Complex x, const DtParams& p) {
  const double r = std::abs(x);
  if (r == 0.0) return {};  // subgradient choice at the origin
  const double q = p.scale * dt_h(r, p) / r;
  const double qprime = p.scale * (dt_hprime(r, p) * r - dt_h(r, p)) / (r * r);
  const double xr = x.real(), xi = x.imag();
  RadialJacobian j;
  j.xx = q + qprime * xr * xr / r;
  j.xy = qprime * xr * xi / r;
  j.yx = j.xy;
  j.yy = q + qprime * xi * xi / r;
  return j;
}

Complex double_tanh_cv_dscale(Complex x, const DtParams& p) {
  const double r = std::abs(x);
  if (r == 0.0) return {0.0, 0.0};
  return x * (dt_h(r, p) / r);
}

Complex double_tanh_cv_dtheta(Complex x, const DtParams& p) {
  const double r = std::abs(x);
  if (r == 0.0) return {0.0, 0.0};
  const double d = sech2(r + p.threshold) - sech2(r - p.threshold);
  return x * (p.scale * d / r);
}

Complex piecewise_linear_cv(Complex x, const PwlParams& p) {
  const double m = std::abs(x);
  if (m <= p.t1) return p.t3 * x;
  const Complex u = x / m;  // e^{j angle(x)}
  if (m <= p.t2) return u * (p.t4 * (m - p.t1) + p.t3 * p.t1);
  return u * (p.t5 * (m - p.t2) + p.t4 * (p.t2 - p.t1) + p.t3 * p.t1);
}

RadialJacobian piecewise_linear_cv_jacobian(Complex x, const PwlParams& p) {
  const double m = std::abs(x);
  if (m <= p.t1) {
    RadialJacobian j;
    j.xx = p.t3;
    j.yy = p.t3;
    return j;
  }
  double rho, slope;
  if (m <= p.t2) {
    rho = p.t4 * (m - p.t1) + p.t3 * p.t1;
    slope = p.t4;
  } else {
    rho = p.t5 * (m - p.t2) + p.t4 * (p.t2 - p.t1) + p.t3 * p.t1;
    slope = p.t5;
  }
  const double q = rho / m;
  const double qprime = (slope * m - rho) / (m * m);
  const double xr = x.real(), xi = x.imag();
  RadialJacobian j;
  j.xx = q + qprime * xr * xr / m;
  j.xy = qprime * xr * xi / m;
  j.yx = j.xy;
  j.yy = q + qprime * xi * xi / m;
  return j;
}

PwlParamGrads piecewise_linear_cv_param_grads(Complex x, const PwlParams& p) {
  PwlParamGrads g;
  const double m = std::abs(x);
  if (m <= p.t1) {
    g.d3 = x;
    return g;
  }
  const Complex u = x / m;
  if (m <= p.t2) {
    g.d1 = u * (p.t3 - p.t4);
    g.d3 = u * p.t1;
    g.d4 = u * (m - p.t1);
    return g;
  }
  g.d1 = u * (p.t3 - p.t4);
  g.d2 = u * (p.t4 - p.t5);
  g.d3 = u * p.t1;
  g.d4 = u * (p.t2 - p.t1);
  g.d5 = u * (m - p.t2);
  return g;
}

std::vector<int> support_indices(const CVector& x, double rho_percent) {
  const int l = static_cast<int>(x.size());
  if (rho_percent <= 0.0 || l == 0) return {};
  int k = static_cast<int>(std::ceil(rho_percent * l / 100.0));
  k = std::min(k, l);
  std::vector<int> order(static_cast<std::size_t>(l));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> mag(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) mag[static_cast<std::size_t>(i)] = std::abs(x(i));
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      const double ma = mag[static_cast<std::size_t>(a)];
                      const double mb = mag[static_cast<std::size_t>(b)];
                      if (ma != mb) return ma > mb;
                      return a < b;
                    });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

CVector support_select(const CVector& x, double rho_percent,
                       const std::function<Complex(Complex)>& shrink) {
  CVector out(x.size());
  for (int i = 0; i < x.size(); ++i) out(i) = shrink(x(i));
  for (int idx : support_indices(x, rho_percent)) out(idx) = x(idx);
  return out;
}

}  // namespace tomornn
