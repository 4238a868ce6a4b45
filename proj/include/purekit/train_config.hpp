#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "purekit/networks.hpp"

namespace purekit {

// Schedule for the iterative (multi-step) baseline trainer.
struct DdpmConfig {
  int timesteps = 10;
  double beta_min = 0.02;
  double beta_max = 0.25;
};

struct TrainConfig {
  std::vector<double> betas{0.0167, 0.0331};
  double lambda = 3.0;
  double learning_rate = 1e-4;
  int batch_size = 8;
  int steps = 0;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  uint64_t seed = 0;
  int log_every = 10;
  double r1_gamma = 0.0;        // optional discriminator gradient penalty
  double augment_noise = 0.0;   // classifier training only
  double label_smoothing = 0.0;  // classifier training only
  DdpmConfig ddpm;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  ClassifierConfig classifier;

  void validate(const std::string& mode) const;
};

struct TrainLogRecord {
  int step = 0;
  double d_loss = 0.0;
  double g_adv = 0.0;
  double ssim_term = 0.0;
  double seconds = 0.0;  // wall clock; excluded from the persisted checkpoint
};

}  // namespace purekit
