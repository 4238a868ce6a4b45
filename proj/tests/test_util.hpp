#pragma once

#include <cmath>
#include <functional>

#include "purekit/rng.hpp"
#include "purekit/tensor.hpp"

namespace purekit::test {

// central finite differences of a scalar-valued function of one tensor
template <typename F>
Tensor numeric_grad(F f, Tensor x, double h = 1e-5) {
  Tensor g(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    double orig = x[i];
    x[i] = orig + h;
    double fp = f(x);
    x[i] = orig - h;
    double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline bool grads_close(const Tensor& analytic, const Tensor& numeric, double rel_tol,
                        double abs_tol = 1e-6) {
  if (!analytic.same_shape(numeric)) return false;
  for (int64_t i = 0; i < analytic.numel(); ++i) {
    double a = analytic[i], b = numeric[i];
    double err = std::fabs(a - b);
    if (err > abs_tol + rel_tol * std::max(std::fabs(a), std::fabs(b))) return false;
  }
  return true;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return rng.uniform_tensor(std::move(shape), lo, hi);
}

}  // namespace purekit::test
