#include "purekit/training.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include "purekit/diffusion.hpp"
#include "purekit/errors.hpp"

namespace purekit {

namespace {

constexpr double kProbEps = 1e-7;

double clamp_prob_scalar(double p) {
  if (p <= 0.0 || p >= 1.0) {
    std::clog << "[purekit] warning: probability " << p << " clamped to ["
              << kProbEps << ", " << 1 - kProbEps << "]\n";
  }
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

}  // namespace

double discriminator_loss(double d_real, double d_fake) {
  d_real = clamp_prob_scalar(d_real);
  d_fake = clamp_prob_scalar(d_fake);
  return -std::log(d_real) - std::log(1.0 - d_fake);
}

double generator_loss(double d_fake, double ssim_value, double lambda) {
  if (lambda < 0.0) throw_parameter("generator_loss: lambda must be nonnegative");
  d_fake = clamp_prob_scalar(d_fake);
  return -std::log(d_fake) + lambda * (1.0 - ssim_value);
}

double generator_loss(double d_fake, const Tensor& x1, const Tensor& x1_prime,
                      double lambda, const SsimConfig& ssim_cfg) {
  // images arrive in internal [-1,1] range; SSIM is scored on [0,1]
  return generator_loss(
      d_fake, ssim(to_external_range(x1), to_external_range(x1_prime), ssim_cfg), lambda);
}

ag::Var clamp_prob(const ag::Var& p) { return ag::clamp(p, kProbEps, 1.0 - kProbEps); }

void Adam::step(ParameterSet& params, const VarMap& leaves) {
  ++t_;
  double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto it = leaves.find(name);
    if (it == leaves.end()) throw_parameter("adam: no leaf for parameter " + name);
    const Tensor& g = it->second->grad;
    if (g.empty()) continue;  // parameter unused in this graph
    Tensor& m = m_.try_emplace(name, Tensor::zeros(p.shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor::zeros(p.shape())).first->second;
    for (int64_t i = 0; i < p.numel(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void TrainConfig::validate(const std::string& mode) const {
  if (lambda < 0.0) throw_config("train.lambda must be nonnegative");
  if (learning_rate <= 0.0) throw_config("train.learning_rate must be positive");
  if (batch_size < 1) throw_config("train.batch_size must be >= 1");
  if (steps < 0) throw_config("train.steps must be >= 0");
  if (log_every < 1) throw_config("train.log_every must be >= 1");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw_config("train.adam moment coefficients must lie in [0,1)");
  }
  if (mode == "lightpure") {
    if (betas.size() != 2) throw_config("train.betas must have length 2 in lightpure mode");
  } else if (mode == "single_step") {
    if (betas.empty()) throw_config("train.betas must have at least one entry");
  } else if (mode == "iterative") {
    if (ddpm.timesteps < 1) throw_config("train.ddpm.timesteps must be >= 1");
    if (!(ddpm.beta_min > 0.0 && ddpm.beta_min <= ddpm.beta_max && ddpm.beta_max < 1.0)) {
      throw_config("train.ddpm beta range must satisfy 0 < beta_min <= beta_max < 1");
    }
  } else if (mode == "classifier") {
    if (augment_noise < 0.0) throw_config("train.augment_noise must be nonnegative");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
      throw_config("train.label_smoothing must lie in [0,1)");
    }
  } else {
    throw_config("unknown training mode: " + mode);
  }
  for (double b : betas) {
    if (!(b >= 0.0 && b < 1.0)) throw_config("train.betas entries must lie in [0,1)");
  }
}

namespace {

class BatchSampler {
 public:
  BatchSampler(size_t n, Rng& rng) : n_(n), rng_(rng) {
    order_.resize(n);
    for (size_t i = 0; i < n; ++i) order_[i] = i;
    rng_.shuffle(order_);
  }

  std::vector<size_t> next(int batch) {
    std::vector<size_t> out;
    out.reserve(static_cast<size_t>(batch));
    for (int i = 0; i < batch; ++i) {
      if (pos_ == n_) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  size_t n_;
  Rng& rng_;
  std::vector<size_t> order_;
  size_t pos_ = 0;
};

// batch of internal-range images, (B,C,H,W)
Tensor gather_batch(const UnlabeledView& data, const std::vector<size_t>& idx) {
  const Tensor& first = data[idx[0]];
  Shape s = first.shape();
  Tensor out({static_cast<int64_t>(idx.size()), s[0], s[1], s[2]});
  int64_t per = first.numel();
  for (size_t b = 0; b < idx.size(); ++b) {
    const Tensor& img = data[idx[b]];
    if (!img.same_shape(first)) throw_parameter("dataset images have mixed shapes");
    for (int64_t i = 0; i < per; ++i) {
      out[static_cast<int64_t>(b) * per + i] = 2.0 * img[i] - 1.0;
    }
  }
  return out;
}

Tensor diffuse_batch(const Tensor& x, double beta, Rng& rng) {
  double signal = std::sqrt(1.0 - beta), noise = std::sqrt(beta);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = signal * x[i] + noise * rng.normal();
  return out;
}

void check_finite_loss(double v, int step, const char* what) {
  if (!std::isfinite(v)) {
    throw_runtime(std::string("training aborted: non-finite ") + what + " at step " +
                  std::to_string(step));
  }
}

struct StepClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// loss for one discriminator update; optionally adds the stochastic
// directional estimate of the R1 gradient penalty
ag::Var discriminator_step_loss(const VarMap& d_leaves, const DiscriminatorConfig& dcfg,
                                const Tensor& real, const Tensor& fake,
                                const Tensor& cond, double r1_gamma, Rng& rng) {
  ag::Var cond_v = ag::constant(cond);
  ag::Var d_real = discriminator_forward(d_leaves, dcfg, ag::constant(real), cond_v);
  ag::Var d_fake = discriminator_forward(d_leaves, dcfg, ag::constant(fake), cond_v);
  ag::Var loss = ag::mean(ag::sub(
      ag::mul_scalar(ag::log_op(clamp_prob(d_real)), -1.0),
      ag::log_op(clamp_prob(ag::add_scalar(ag::mul_scalar(d_fake, -1.0), 1.0)))));
  if (r1_gamma > 0.0) {
    // E_u[((D(x+du)-D(x))/d)^2], u ~ N(0,I): unbiased directional estimate of
    // E||grad_x D||^2
    const double delta = 1e-3;
    Tensor probe(real.shape());
    for (int64_t i = 0; i < probe.numel(); ++i) {
      probe[i] = real[i] + delta * rng.normal();
    }
    ag::Var d_probe = discriminator_forward(d_leaves, dcfg, ag::constant(probe), cond_v);
    ag::Var diff = ag::mul_scalar(ag::sub(d_probe, d_real), 1.0 / delta);
    loss = ag::add(loss, ag::mul_scalar(ag::mean(ag::mul(diff, diff)), r1_gamma / 2.0));
  }
  return loss;
}

PurifierCheckpoint train_purifier_gan(const UnlabeledView& data, const TrainConfig& cfg,
                                      Rng& rng, bool two_step) {
  const char* mode = two_step ? "lightpure" : "single_step";
  cfg.validate(mode);
  if (data.size() == 0) throw_parameter("training dataset is empty");

  ParameterSet gen = init_generator(cfg.generator, rng);
  ParameterSet disc = init_discriminator(cfg.discriminator, rng);
  Adam opt_g(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  Adam opt_d(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  VarianceSchedule schedule(cfg.betas);
  PosteriorCoeffs post{};
  if (two_step) post = posterior_coeffs(schedule, 2);

  std::vector<TrainLogRecord> log;
  BatchSampler sampler(data.size(), rng);
  StepClock clock;
  int64_t latent = cfg.generator.latent_dim;

  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<size_t> idx = sampler.next(cfg.batch_size);
    Tensor x0 = gather_batch(data, idx);
    int64_t batch = x0.size(0);

    // forward diffusion; in single-step mode the generator input is x1 and
    // the discriminator compares x0 against the generated x0'
    Tensor x1 = diffuse_batch(x0, cfg.betas[0], rng);
    Tensor gen_input = two_step ? diffuse_batch(x1, cfg.betas[1], rng) : x1;
    const Tensor& real = two_step ? x1 : x0;

    // ---- discriminator update (generator frozen) ----
    Tensor z_d = rng.normal_tensor({batch, latent});
    Tensor x0p_d = generator_forward(as_constants(gen), cfg.generator,
                                     ag::constant(gen_input), ag::constant(z_d))
                       ->value;
    Tensor fake_d;
    if (two_step) {
      Tensor n_d = rng.normal_tensor(x0p_d.shape());
      fake_d = Tensor(x0p_d.shape());
      double sigma = std::sqrt(post.variance);
      for (int64_t i = 0; i < fake_d.numel(); ++i) {
        fake_d[i] = post.coef_x0 * x0p_d[i] + post.coef_xt * gen_input[i] + sigma * n_d[i];
      }
    } else {
      fake_d = x0p_d;
    }
    VarMap d_leaves = as_leaves(disc);
    ag::Var d_loss = discriminator_step_loss(d_leaves, cfg.discriminator, real, fake_d,
                                             gen_input, cfg.r1_gamma, rng);
    check_finite_loss(d_loss->value.item(), step, "discriminator loss");
    ag::backward(d_loss);
    opt_d.step(disc, d_leaves);

    // ---- generator update (updated discriminator as constants) ----
    Tensor z_g = rng.normal_tensor({batch, latent});
    VarMap g_leaves = as_leaves(gen);
    ag::Var gen_input_v = ag::constant(gen_input);
    ag::Var x0p = generator_forward(g_leaves, cfg.generator, gen_input_v,
                                    ag::constant(z_g));
    ag::Var fake;
    if (two_step) {
      // posterior draw with the noise treated as a constant (reparameterized)
      Tensor n_g = rng.normal_tensor(x0.shape());
      Tensor drift = affine_combine(gen_input, post.coef_xt, n_g, std::sqrt(post.variance));
      fake = ag::add(ag::mul_scalar(x0p, post.coef_x0), ag::constant(drift));
    } else {
      fake = x0p;
    }
    ag::Var d_fake = discriminator_forward(as_constants(disc), cfg.discriminator, fake,
                                           gen_input_v);
    ag::Var g_adv = ag::mean(ag::mul_scalar(ag::log_op(clamp_prob(d_fake)), -1.0));
    // SSIM is scored on [0,1]; both sides are mapped from internal range
    ag::Var fake_01 = ag::add_scalar(ag::mul_scalar(fake, 0.5), 0.5);
    ag::Var real_01 = ag::constant(to_external_range(real));
    ag::Var ssim_term = ssim_loss(real_01, fake_01, cfg.lambda, SsimConfig{});
    ag::Var g_loss = ag::add(g_adv, ssim_term);
    check_finite_loss(g_loss->value.item(), step, "generator loss");
    ag::backward(g_loss);
    opt_g.step(gen, g_leaves);

    if (step % cfg.log_every == 0 || step == cfg.steps) {
      TrainLogRecord rec;
      rec.step = step;
      rec.d_loss = d_loss->value.item();
      rec.g_adv = g_adv->value.item();
      rec.ssim_term = ssim_term->value.item();
      rec.seconds = clock.seconds();
      log.push_back(rec);
    }
  }

  PurifierCheckpoint ckpt;
  ckpt.mode = mode;
  ckpt.config = cfg;
  ckpt.trained_steps = cfg.steps;
  ckpt.nets.emplace("generator", std::move(gen));
  ckpt.nets.emplace("discriminator", std::move(disc));
  ckpt.log = std::move(log);
  return ckpt;
}

}  // namespace

PurifierCheckpoint train_lightpure(const UnlabeledView& data, const TrainConfig& cfg,
                                   Rng& rng) {
  return train_purifier_gan(data, cfg, rng, /*two_step=*/true);
}

PurifierCheckpoint train_bgan(const UnlabeledView& data, const TrainConfig& cfg,
                              Rng& rng) {
  return train_purifier_gan(data, cfg, rng, /*two_step=*/false);
}

PurifierCheckpoint train_ddpm_denoiser(const UnlabeledView& data, const TrainConfig& cfg,
                                       Rng& rng) {
  cfg.validate("iterative");
  if (data.size() == 0) throw_parameter("training dataset is empty");

  int timesteps = cfg.ddpm.timesteps;
  VarianceSchedule schedule =
      linear_schedule(timesteps, cfg.ddpm.beta_min, cfg.ddpm.beta_max);
  ParameterSet net = init_denoiser(cfg.generator, timesteps, rng);
  Adam opt(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);

  std::vector<TrainLogRecord> log;
  BatchSampler sampler(data.size(), rng);
  StepClock clock;

  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<size_t> idx = sampler.next(cfg.batch_size);
    Tensor x0 = gather_batch(data, idx);
    int t = static_cast<int>(rng.uniform_int(timesteps)) + 1;
    double ab = schedule.alpha_bar(t);
    Tensor eps = rng.normal_tensor(x0.shape());
    Tensor x_t = affine_combine(x0, std::sqrt(ab), eps, std::sqrt(1.0 - ab));

    VarMap leaves = as_leaves(net);
    ag::Var pred = denoiser_forward(leaves, cfg.generator, timesteps,
                                    ag::constant(x_t), t);
    ag::Var loss = ag::mse(pred, ag::constant(eps));
    check_finite_loss(loss->value.item(), step, "denoiser loss");
    ag::backward(loss);
    opt.step(net, leaves);

    if (step % cfg.log_every == 0 || step == cfg.steps) {
      // only the main objective is populated for the non-GAN trainers
      log.push_back({step, 0.0, loss->value.item(), 0.0, clock.seconds()});
    }
  }

  PurifierCheckpoint ckpt;
  ckpt.mode = "iterative";
  ckpt.config = cfg;
  ckpt.trained_steps = cfg.steps;
  ckpt.nets.emplace("denoiser", std::move(net));
  ckpt.log = std::move(log);
  return ckpt;
}

PurifierCheckpoint train_classifier(const Dataset& data, const TrainConfig& cfg,
                                    Rng& rng) {
  cfg.validate("classifier");
  if (data.size() == 0) throw_parameter("training dataset is empty");
  if (!data.labeled()) throw_parameter("classifier training requires labels");
  if (data.class_count != cfg.classifier.class_count) {
    throw_config("classifier.class_count does not match the dataset");
  }

  ParameterSet net = init_classifier(cfg.classifier, rng);
  Adam opt(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  UnlabeledView images(data.images);
  std::vector<TrainLogRecord> log;
  BatchSampler sampler(data.size(), rng);
  StepClock clock;

  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<size_t> idx = sampler.next(cfg.batch_size);
    Tensor x = gather_batch(images, idx);
    if (cfg.augment_noise > 0.0) {
      for (int64_t i = 0; i < x.numel(); ++i) {
        x[i] = std::clamp(x[i] + cfg.augment_noise * rng.normal(), -1.0, 1.0);
      }
    }
    std::vector<int> labels;
    labels.reserve(idx.size());
    for (size_t i : idx) labels.push_back(data.labels[i]);

    VarMap leaves = as_leaves(net);
    ag::Var logits = classifier_forward(leaves, cfg.classifier, ag::constant(x));
    ag::Var loss = ag::cross_entropy(logits, labels, cfg.label_smoothing);
    check_finite_loss(loss->value.item(), step, "classifier loss");
    ag::backward(loss);
    opt.step(net, leaves);

    if (step % cfg.log_every == 0 || step == cfg.steps) {
      log.push_back({step, 0.0, loss->value.item(), 0.0, clock.seconds()});
    }
  }

  PurifierCheckpoint ckpt;
  ckpt.mode = "classifier";
  ckpt.config = cfg;
  ckpt.trained_steps = cfg.steps;
  ckpt.nets.emplace("classifier", std::move(net));
  ckpt.log = std::move(log);
  return ckpt;
}

}  // namespace purekit
