#pragma once

#include <vector>

#include "purekit/rng.hpp"
#include "purekit/tensor.hpp"

namespace purekit {

// Forward-process variance schedule. alpha_bar products are precomputed at
// construction; alpha_bar(0) == 1 by convention.
class VarianceSchedule {
 public:
  explicit VarianceSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const;       // t in [1, T]
  double alpha(int t) const;      // 1 - beta_t
  double alpha_bar(int t) const;  // prod_{s<=t} alpha_s, alpha_bar(0) = 1
  const std::vector<double>& betas() const { return betas_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;  // index 0..T
};

// Evenly spaced betas, used by the iterative-baseline schedule.
VarianceSchedule linear_schedule(int steps, double beta_min, double beta_max);

// One forward step: sqrt(1-beta)*x + sqrt(beta)*eps, eps ~ N(0, I).
Tensor diffuse_step(const Tensor& x, double beta, Rng& rng);

// Closed-form t-step marginal: sqrt(alpha_bar_t)*x0 + sqrt(1-alpha_bar_t)*eps.
Tensor diffuse_to(const Tensor& x0, const VarianceSchedule& schedule, int t, Rng& rng);

struct PosteriorCoeffs {
  double coef_x0;    // weight on the clean estimate
  double coef_xt;    // weight on the noisy sample
  double variance;   // beta_tilde_t
};

// q(x_{t-1} | x_t, x0) coefficients for the given schedule position.
PosteriorCoeffs posterior_coeffs(const VarianceSchedule& schedule, int t);

// Draw from the posterior with the coefficients above.
Tensor posterior_sample(const Tensor& x_t, const Tensor& x0_hat,
                        const VarianceSchedule& schedule, int t, Rng& rng);

}  // namespace purekit
