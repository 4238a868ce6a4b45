#include "purekit/diffusion.hpp"

#include <cmath>
#include <string>

#include "purekit/errors.hpp"

namespace purekit {

VarianceSchedule::VarianceSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw_parameter("variance schedule needs at least one step");
  alpha_bars_.reserve(betas_.size() + 1);
  alpha_bars_.push_back(1.0);
  for (size_t i = 0; i < betas_.size(); ++i) {
    double b = betas_[i];
    // beta = 0 is tolerated so degenerate schedules stay constructible for
    // analysis; beta >= 1 would invert the signal term.
    if (!(b >= 0.0 && b < 1.0)) {
      throw_parameter("beta_" + std::to_string(i + 1) + " must lie in [0,1), got " +
                      std::to_string(b));
    }
    alpha_bars_.push_back(alpha_bars_.back() * (1.0 - b));
  }
}

double VarianceSchedule::beta(int t) const {
  if (t < 1 || t > steps()) throw_parameter("beta index out of range");
  return betas_[static_cast<size_t>(t - 1)];
}

double VarianceSchedule::alpha(int t) const { return 1.0 - beta(t); }

double VarianceSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) throw_parameter("alpha_bar index out of range");
  return alpha_bars_[static_cast<size_t>(t)];
}

VarianceSchedule linear_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw_parameter("linear_schedule: steps must be >= 1");
  std::vector<double> betas(static_cast<size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    double f = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
    betas[static_cast<size_t>(t)] = beta_min + f * (beta_max - beta_min);
  }
  return VarianceSchedule(std::move(betas));
}

Tensor diffuse_step(const Tensor& x, double beta, Rng& rng) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw_parameter("diffuse_step: beta must lie in [0,1)");
  }
  if (!x.all_finite()) throw_parameter("diffuse_step: input has non-finite values");
  double signal = std::sqrt(1.0 - beta);
  double noise = std::sqrt(beta);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    out[i] = signal * x[i] + noise * rng.normal();
  }
  return out;
}

Tensor diffuse_to(const Tensor& x0, const VarianceSchedule& schedule, int t, Rng& rng) {
  if (t < 0 || t > schedule.steps()) {
    throw_parameter("diffuse_to: step index " + std::to_string(t) +
                    " outside schedule of length " + std::to_string(schedule.steps()));
  }
  if (t == 0) return x0;
  double ab = schedule.alpha_bar(t);
  double signal = std::sqrt(ab);
  double noise = std::sqrt(1.0 - ab);
  Tensor out(x0.shape());
  for (int64_t i = 0; i < x0.numel(); ++i) {
    out[i] = signal * x0[i] + noise * rng.normal();
  }
  return out;
}

PosteriorCoeffs posterior_coeffs(const VarianceSchedule& schedule, int t) {
  if (t < 1 || t > schedule.steps()) {
    throw_parameter("posterior_sample requires 1 <= t <= T");
  }
  double ab_t = schedule.alpha_bar(t);
  double ab_prev = schedule.alpha_bar(t - 1);
  double one_minus = 1.0 - ab_t;
  if (one_minus == 0.0) {
    throw_parameter("degenerate schedule: alpha_bar_t == 1, posterior undefined");
  }
  double beta_t = schedule.beta(t);
  PosteriorCoeffs c;
  c.coef_x0 = std::sqrt(ab_prev) * beta_t / one_minus;
  c.coef_xt = std::sqrt(schedule.alpha(t)) * (1.0 - ab_prev) / one_minus;
  c.variance = (1.0 - ab_prev) / one_minus * beta_t;
  return c;
}

Tensor posterior_sample(const Tensor& x_t, const Tensor& x0_hat,
                        const VarianceSchedule& schedule, int t, Rng& rng) {
  if (!x_t.same_shape(x0_hat)) {
    throw_parameter("posterior_sample: x_t and x0_hat shapes differ");
  }
  PosteriorCoeffs c = posterior_coeffs(schedule, t);
  double sigma = std::sqrt(c.variance);
  Tensor out(x_t.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    out[i] = c.coef_x0 * x0_hat[i] + c.coef_xt * x_t[i] + sigma * rng.normal();
  }
  return out;
}

}  // namespace purekit
