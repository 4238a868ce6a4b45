#include "purekit/purifier.hpp"

#include <chrono>
#include <cmath>

#include "purekit/diffusion.hpp"
#include "purekit/errors.hpp"

namespace purekit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_oneshot(const PurifierCheckpoint& ckpt) {
  if (ckpt.mode != "lightpure" && ckpt.mode != "single_step") {
    throw_parameter("purify_oneshot requires a lightpure or single_step checkpoint, got mode=" +
                    ckpt.mode);
  }
}

}  // namespace

double inference_beta_for(const PurifierCheckpoint& ckpt) {
  require_oneshot(ckpt);
  if (ckpt.config.betas.empty()) throw_integrity("checkpoint schedule is empty");
  return ckpt.mode == "lightpure" ? ckpt.config.betas.back() : ckpt.config.betas.front();
}

ag::Var purify_oneshot_var(const PurifierCheckpoint& ckpt, const ag::Var& x_in,
                           Rng& rng, const PurifyOptions& opts) {
  require_oneshot(ckpt);
  const Tensor& xv = x_in->value;
  if (xv.rank() != 4 || xv.size(0) != 1) {
    throw_parameter("purify_oneshot_var expects a (1,C,H,W) input");
  }
  double beta = opts.inference_beta.value_or(inference_beta_for(ckpt));
  if (!(beta >= 0.0 && beta < 1.0)) throw_parameter("inference beta must lie in [0,1)");

  // external [0,1] -> internal [-1,1]
  ag::Var x = ag::add_scalar(ag::mul_scalar(x_in, 2.0), -1.0);
  if (opts.rescale_first_step) {
    x = ag::mul_scalar(x, std::sqrt(1.0 - ckpt.config.betas.front()));
  }
  Tensor eps = rng.normal_tensor(xv.shape());
  ag::Var x2 = ag::add(ag::mul_scalar(x, std::sqrt(1.0 - beta)),
                       ag::constant(scaled(eps, std::sqrt(beta))));
  Tensor z = rng.normal_tensor({1, ckpt.config.generator.latent_dim});
  ag::Var x0p = generator_forward(as_constants(ckpt.net("generator")),
                                  ckpt.config.generator, x2, ag::constant(z));
  // tanh output is already in [-1,1]; map back to [0,1]
  return ag::add_scalar(ag::mul_scalar(x0p, 0.5), 0.5);
}

std::pair<Tensor, PurifyTrace> purify_oneshot(const PurifierCheckpoint& ckpt,
                                              const Tensor& x_in, Rng& rng,
                                              const PurifyOptions& opts) {
  if (x_in.rank() != 3) throw_parameter("purify_oneshot expects a (C,H,W) image");
  auto start = Clock::now();
  Shape s = x_in.shape();
  ag::Var out = purify_oneshot_var(ckpt, ag::constant(x_in.reshaped({1, s[0], s[1], s[2]})),
                                   rng, opts);
  PurifyTrace trace;
  trace.generator_invocations = 1;
  trace.wall_seconds = seconds_since(start);
  trace.mode = ckpt.mode;
  return {clamped(out->value.reshaped(s), 0.0, 1.0), trace};
}

std::pair<Tensor, PurifyTrace> purify_iterative(const PurifierCheckpoint& ckpt,
                                                const Tensor& x_in, int t_star,
                                                Rng& rng) {
  if (ckpt.mode != "iterative") {
    throw_parameter("purify_iterative requires an iterative checkpoint, got mode=" +
                    ckpt.mode);
  }
  if (x_in.rank() != 3) throw_parameter("purify_iterative expects a (C,H,W) image");
  int timesteps = ckpt.config.ddpm.timesteps;
  if (t_star < 1 || t_star > timesteps) {
    throw_parameter("purify_iterative: t_star must lie in [1, " +
                    std::to_string(timesteps) + "]");
  }
  auto start = Clock::now();
  VarianceSchedule schedule =
      linear_schedule(timesteps, ckpt.config.ddpm.beta_min, ckpt.config.ddpm.beta_max);
  const ParameterSet& net = ckpt.net("denoiser");

  Tensor x = to_internal_range(x_in);
  x = diffuse_to(x, schedule, t_star, rng);
  int invocations = 0;
  for (int t = t_star; t >= 1; --t) {
    Tensor eps_hat = denoiser_forward(net, ckpt.config.generator, timesteps, x, t);
    ++invocations;
    double ab = schedule.alpha_bar(t);
    Tensor x0_hat(x.shape());
    double inv_signal = 1.0 / std::sqrt(ab);
    double noise_scale = std::sqrt(1.0 - ab);
    for (int64_t i = 0; i < x.numel(); ++i) {
      x0_hat[i] = std::clamp((x[i] - noise_scale * eps_hat[i]) * inv_signal, -1.0, 1.0);
    }
    // at t=1 the posterior collapses onto x0_hat (zero variance)
    x = posterior_sample(x, x0_hat, schedule, t, rng);
  }

  PurifyTrace trace;
  trace.generator_invocations = invocations;
  trace.wall_seconds = seconds_since(start);
  trace.mode = ckpt.mode;
  return {clamped(to_external_range(x), 0.0, 1.0), trace};
}

}  // namespace purekit
