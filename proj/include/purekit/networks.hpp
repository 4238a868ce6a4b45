#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "purekit/autograd.hpp"
#include "purekit/rng.hpp"
#include "purekit/tensor.hpp"

namespace purekit {

// Encoder-decoder generator with skip connections. The latent vector runs
// through a small mapping network and modulates feature maps via per-channel
// scale/shift after each normalization.
struct GeneratorConfig {
  std::array<int64_t, 3> image_shape{3, 32, 32};  // (C,H,W)
  int latent_dim = 256;
  int embedding_dim = 512;
  int base_channels = 16;
  std::vector<int> channel_multipliers{1, 2, 4};
  int res_blocks_per_level = 1;
  std::vector<int> attention_resolutions{};  // spatial sizes, bottleneck only

  int levels() const { return static_cast<int>(channel_multipliers.size()); }
  void validate() const;
};

// Conditional discriminator; the sample and the conditioning image are
// channel-stacked at the input.
struct DiscriminatorConfig {
  std::array<int64_t, 3> image_shape{3, 32, 32};
  int base_channels = 16;
  int levels = 3;

  void validate() const;
};

// Small residual classifier (desk-scale stand-in for the paper-scale ResNets).
struct ClassifierConfig {
  std::array<int64_t, 3> image_shape{3, 32, 32};
  int class_count = 10;
  int base_channels = 16;
  int blocks_per_stage = 1;
  int stages = 3;
  bool use_norm = true;
  bool flatten_head = false;  // linear head on flattened features instead of GAP

  void validate() const;
};

// name -> tensor; names are unique by construction, shapes fixed by config.
using ParameterSet = std::map<std::string, Tensor>;
using VarMap = std::map<std::string, ag::Var>;

int64_t param_count(const ParameterSet& ps);
VarMap as_leaves(const ParameterSet& ps);
VarMap as_constants(const ParameterSet& ps);

ParameterSet init_generator(const GeneratorConfig& cfg, Rng& rng);
ParameterSet init_discriminator(const DiscriminatorConfig& cfg, Rng& rng);
ParameterSet init_classifier(const ClassifierConfig& cfg, Rng& rng);
// Noise-prediction network for the iterative baseline: generator backbone with
// a learned per-step embedding table instead of the latent mapping, and a
// linear output head.
ParameterSet init_denoiser(const GeneratorConfig& cfg, int timesteps, Rng& rng);

// Graph-building forwards. Batched variants take (N,C,H,W) images; the Tensor
// convenience overloads accept a single (C,H,W) image.
ag::Var generator_forward(const VarMap& params, const GeneratorConfig& cfg,
                          const ag::Var& x2, const ag::Var& z);
Tensor generator_forward(const ParameterSet& params, const GeneratorConfig& cfg,
                         const Tensor& x2, const Tensor& z);

// Returns per-sample probabilities in (0,1), shape (N). The pre-sigmoid logit
// is clamped so the output never saturates to exactly 0 or 1.
ag::Var discriminator_forward(const VarMap& params, const DiscriminatorConfig& cfg,
                              const ag::Var& x, const ag::Var& x_cond);
double discriminator_forward(const ParameterSet& params, const DiscriminatorConfig& cfg,
                             const Tensor& x, const Tensor& x_cond);

ag::Var classifier_forward(const VarMap& params, const ClassifierConfig& cfg,
                           const ag::Var& x);
Tensor classifier_forward(const ParameterSet& params, const ClassifierConfig& cfg,
                          const Tensor& x);

ag::Var denoiser_forward(const VarMap& params, const GeneratorConfig& cfg,
                         int timesteps, const ag::Var& x_t, int t);
Tensor denoiser_forward(const ParameterSet& params, const GeneratorConfig& cfg,
                        int timesteps, const Tensor& x_t, int t);

}  // namespace purekit
