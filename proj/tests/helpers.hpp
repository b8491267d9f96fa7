#pragma once

#include <cmath>

#include "tomornn/networks.hpp"
#include "tomornn/rng.hpp"

namespace testutil {

using namespace tomornn;

inline CVector random_cvector(Rng& rng, int n, double scale = 1.0) {
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * Complex(rng.normal(), rng.normal());
  return v;
}

inline CMatrix random_cmatrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  CMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i)
      m(i, j) = scale * Complex(rng.normal(), rng.normal());
  return m;
}

inline GatedUnitWeights random_gated(Rng& rng, Architecture arch, int l, int n,
                                     int depth, double scale = 0.3) {
  GatedUnitWeights w;
  w.arch = arch;
  w.w1 = random_cmatrix(rng, l, n, scale);
  w.w2 = random_cmatrix(rng, l, l, scale / std::sqrt(l));
  for (int t = 0; t < depth; ++t) {
    w.wf1.push_back(random_cmatrix(rng, l, n, scale));
    w.wf2.push_back(random_cmatrix(rng, l, l, scale / std::sqrt(l)));
    if (arch == Architecture::Slstm) {
      w.wi1.push_back(random_cmatrix(rng, l, n, scale));
      w.wi2.push_back(random_cmatrix(rng, l, l, scale / std::sqrt(l)));
    }
    w.out_act.push_back(DtParams{rng.uniform(0.3, 0.9), rng.uniform(0.05, 0.4)});
  }
  return w;
}

inline GammaNetWeights random_gamma(Rng& rng, int l, int n, int depth) {
  GammaNetWeights w;
  for (int i = 0; i < depth; ++i) {
    w.w.push_back(random_cmatrix(rng, l, n, 0.2));
    w.pwl_raw.push_back({});
    w.support_percent.push_back(rng.uniform(0.0, 15.0));
    PwlParams p;
    p.t1 = rng.uniform(0.05, 0.3);
    p.t2 = p.t1 + rng.uniform(0.05, 0.5);
    p.t3 = rng.uniform(0.0, 0.3);
    p.t4 = rng.uniform(0.5, 1.2);
    p.t5 = rng.uniform(0.8, 1.6);
    w.set_pwl(i, p);
  }
  return w;
}

}  // namespace testutil
