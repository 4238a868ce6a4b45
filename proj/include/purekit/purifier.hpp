#pragma once

#include <optional>
#include <string>
#include <utility>

#include "purekit/autograd.hpp"
#include "purekit/data_io.hpp"
#include "purekit/rng.hpp"

namespace purekit {

struct PurifyTrace {
  int generator_invocations = 0;
  double wall_seconds = 0.0;
  std::string mode;
};

struct PurifyOptions {
  // Treat the input as x0 instead of x1: rescale by sqrt(1-beta1) before the
  // added diffusion step (comparison variant; the primary reading adds no
  // first-step rescaling because the input is already noisy).
  bool rescale_first_step = false;
  // Overrides the noise level of the added diffusion step.
  std::optional<double> inference_beta;
};

// Noise level of the added inference step: the noise the generator saw on its
// training input (beta2 for two-step checkpoints, beta1 for single-step).
double inference_beta_for(const PurifierCheckpoint& ckpt);

// One added diffusion step + one generator pass. Input and output images are
// in external [0,1] range; exactly one generator invocation is recorded.
std::pair<Tensor, PurifyTrace> purify_oneshot(const PurifierCheckpoint& ckpt,
                                              const Tensor& x_in, Rng& rng,
                                              const PurifyOptions& opts = {});

// Differentiable variant for white/gray-box gradient pipelines; `x_in` is a
// (1,C,H,W) graph variable in [0,1] and all randomness is drawn from `rng` at
// call time, so a fixed seed makes the pipeline a fixed differentiable map.
ag::Var purify_oneshot_var(const PurifierCheckpoint& ckpt, const ag::Var& x_in,
                           Rng& rng, const PurifyOptions& opts = {});

// Forward-diffuses t_star steps in closed form, then runs t_star reverse
// denoising steps through the noise-prediction network; records t_star
// generator invocations.
std::pair<Tensor, PurifyTrace> purify_iterative(const PurifierCheckpoint& ckpt,
                                                const Tensor& x_in, int t_star,
                                                Rng& rng);

}  // namespace purekit
