#pragma once

// Shared fixtures for the unit suites: random tensor builders and the
// weighted-sum losses used to drive gradient checks.

#include <functional>
#include <vector>

#include "ulcnn/cv_layers.hpp"
#include "ulcnn/rng.hpp"
#include "ulcnn/tensor.hpp"

namespace ulcnn::testing {

inline RealTensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                                double hi = 1.0) {
  RealTensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline ComplexTensor random_complex(std::vector<int> shape, Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  ComplexTensor t;
  t.re = random_tensor(shape, rng, lo, hi);
  t.im = random_tensor(std::move(shape), rng, lo, hi);
  return t;
}

/// Fixed-coefficient linear functional of a tensor; its gradient w.r.t. the
/// tensor is exactly the coefficient tensor, which keeps every layer check a
/// pure test of the layer's own backward pass.
inline double weighted_sum(const RealTensor& t, const RealTensor& coef) {
  double acc = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) acc += t[i] * coef[i];
  return acc;
}

inline double weighted_sum(const ComplexTensor& t, const ComplexTensor& coef) {
  return weighted_sum(t.re, coef.re) + weighted_sum(t.im, coef.im);
}

inline double max_abs_diff(const RealTensor& a, const RealTensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

}  // namespace ulcnn::testing
