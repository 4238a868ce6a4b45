#pragma once

#include "purekit/data_io.hpp"
#include "purekit/ssim.hpp"
#include "purekit/train_config.hpp"

namespace purekit {

// Non-saturating GAN losses on batch-averaged probabilities. Probabilities are
// clamped to [1e-7, 1-1e-7] before the log; hitting the clamp emits a warning
// on stderr.
double discriminator_loss(double d_real, double d_fake);
double generator_loss(double d_fake, double ssim_value, double lambda);
double generator_loss(double d_fake, const Tensor& x1, const Tensor& x1_prime,
                      double lambda, const SsimConfig& ssim_cfg = {});

// In-graph probability clamp shared by the trainers.
ag::Var clamp_prob(const ag::Var& p);

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  // Applies one update using the gradients accumulated on `leaves`.
  void step(ParameterSet& params, const VarMap& leaves);

 private:
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// Two-step forward diffusion, one-shot generator, conditional discriminator.
PurifierCheckpoint train_lightpure(const UnlabeledView& data, const TrainConfig& cfg,
                                   Rng& rng);

// Single-step ablation / GAN-only comparator: one diffusion step, generator
// denoises x1 directly, SSIM against x0.
PurifierCheckpoint train_bgan(const UnlabeledView& data, const TrainConfig& cfg,
                              Rng& rng);

// Multi-step noise-prediction baseline trained with MSE against the true
// noise at uniformly sampled steps.
PurifierCheckpoint train_ddpm_denoiser(const UnlabeledView& data, const TrainConfig& cfg,
                                       Rng& rng);

// Supervised classifier training (cross-entropy); requires labels.
PurifierCheckpoint train_classifier(const Dataset& data, const TrainConfig& cfg,
                                    Rng& rng);

}  // namespace purekit
