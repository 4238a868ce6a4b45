#include <cmath>

#include "doctest.h"
#include "purekit/data_io.hpp"
#include "purekit/diffusion.hpp"
#include "purekit/errors.hpp"
#include "purekit/training.hpp"
#include "test_util.hpp"

using namespace purekit;

namespace {

TrainConfig smoke_config() {
  TrainConfig cfg;
  cfg.generator.image_shape = {3, 16, 16};
  cfg.generator.latent_dim = 8;
  cfg.generator.embedding_dim = 16;
  cfg.generator.base_channels = 8;
  cfg.generator.channel_multipliers = {1, 2};
  cfg.discriminator.image_shape = {3, 16, 16};
  cfg.discriminator.base_channels = 8;
  cfg.discriminator.levels = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.log_every = 1;
  return cfg;
}

double window_mean(const std::vector<TrainLogRecord>& log, size_t start, size_t count,
                   double TrainLogRecord::* field) {
  double s = 0.0;
  for (size_t i = start; i < start + count; ++i) s += log[i].*field;
  return s / static_cast<double>(count);
}

}  // namespace

TEST_CASE("gan loss closed forms") {
  CHECK(discriminator_loss(0.5, 0.5) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));
  CHECK(discriminator_loss(0.8, 0.3) == doctest::Approx(0.5798).epsilon(1e-3));
  // perfect discriminator limit (exact 0/1 inputs are clamped)
  CHECK(discriminator_loss(1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(std::isfinite(discriminator_loss(0.0, 1.0)));

  CHECK(generator_loss(0.5, 0.9, 3.0) == doctest::Approx(std::log(2.0) + 0.3).epsilon(1e-9));
  CHECK(generator_loss(0.25, 1.0, 7.0) == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
  CHECK(generator_loss(0.5, 0.1, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(generator_loss(0.5, 0.9, -1.0), Error);

  Rng rng(51);
  Tensor x1 = test::random_tensor({1, 8, 8}, rng);
  CHECK(generator_loss(0.5, x1, x1, 3.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("steps=0 returns exactly the initialization") {
  TrainConfig cfg = smoke_config();
  cfg.steps = 0;
  cfg.seed = 5;
  Rng data_rng(52);
  Dataset ds = make_synthetic(16, 2, 16, data_rng);

  Rng rng(5);
  PurifierCheckpoint ckpt = train_lightpure(UnlabeledView(ds), cfg, rng);
  CHECK(ckpt.mode == "lightpure");
  CHECK(ckpt.trained_steps == 0);
  CHECK(ckpt.log.empty());

  // reproduce the init by hand with the same seed
  Rng rng2(5);
  ParameterSet gen = init_generator(cfg.generator, rng2);
  ParameterSet disc = init_discriminator(cfg.discriminator, rng2);
  CHECK(param_count(ckpt.net("generator")) == param_count(gen));
  for (const auto& [name, t] : gen) {
    CHECK(max_abs_diff(t, ckpt.net("generator").at(name)) == 0.0);
  }
  for (const auto& [name, t] : disc) {
    CHECK(max_abs_diff(t, ckpt.net("discriminator").at(name)) == 0.0);
  }
}

TEST_CASE("lightpure smoke run: finite losses, decreasing ssim term") {
  TrainConfig cfg = smoke_config();
  cfg.steps = 200;
  cfg.seed = 6;
  Rng data_rng(53);
  Dataset ds = make_synthetic(64, 2, 16, data_rng, 0.15);

  Rng rng(6);
  PurifierCheckpoint ckpt = train_lightpure(UnlabeledView(ds), cfg, rng);
  REQUIRE(ckpt.log.size() == 200);
  for (const auto& rec : ckpt.log) {
    CHECK(std::isfinite(rec.d_loss));
    CHECK(std::isfinite(rec.g_adv));
    CHECK(std::isfinite(rec.ssim_term));
  }
  double first = window_mean(ckpt.log, 0, 10, &TrainLogRecord::ssim_term);
  double last = window_mean(ckpt.log, 190, 10, &TrainLogRecord::ssim_term);
  CHECK(last < first);
}

TEST_CASE("training is bitwise reproducible under a fixed seed") {
  TrainConfig cfg = smoke_config();
  cfg.steps = 5;
  cfg.seed = 9;
  Rng data_rng(54);
  Dataset ds = make_synthetic(16, 2, 16, data_rng);

  Rng r1(9), r2(9), r3(10);
  PurifierCheckpoint a = train_lightpure(UnlabeledView(ds), cfg, r1);
  PurifierCheckpoint b = train_lightpure(UnlabeledView(ds), cfg, r2);
  CHECK(checkpoint_hash(a) == checkpoint_hash(b));
  PurifierCheckpoint c = train_lightpure(UnlabeledView(ds), cfg, r3);
  CHECK(checkpoint_hash(a) != checkpoint_hash(c));
}

TEST_CASE("single-step mode trains and is tagged") {
  TrainConfig cfg = smoke_config();
  cfg.steps = 30;
  Rng data_rng(55);
  Dataset ds = make_synthetic(32, 2, 16, data_rng);
  Rng rng(7);
  PurifierCheckpoint ckpt = train_bgan(UnlabeledView(ds), cfg, rng);
  CHECK(ckpt.mode == "single_step");
  for (const auto& rec : ckpt.log) {
    CHECK(std::isfinite(rec.d_loss));
    CHECK(std::isfinite(rec.g_adv));
  }
  // single_step accepts a one-entry schedule
  cfg.betas = {0.05};
  cfg.steps = 2;
  Rng rng2(8);
  CHECK(train_bgan(UnlabeledView(ds), cfg, rng2).mode == "single_step");
  CHECK_THROWS_AS(train_lightpure(UnlabeledView(ds), cfg, rng2), Error);
}

TEST_CASE("empty dataset and non-finite input are rejected") {
  TrainConfig cfg = smoke_config();
  cfg.steps = 1;
  std::vector<Tensor> none;
  Rng rng(11);
  CHECK_THROWS_AS(train_lightpure(UnlabeledView(none), cfg, rng), Error);

  std::vector<Tensor> poisoned;
  Tensor bad = Tensor::full({3, 16, 16}, 0.5);
  bad[7] = std::nan("");
  poisoned.push_back(bad);
  try {
    Rng rng2(12);
    train_lightpure(UnlabeledView(poisoned), cfg, rng2);
    FAIL("expected runtime abort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::runtime);
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("ddpm denoiser approaches the Bayes-optimal noise predictor on a 1-D toy") {
  // data: two point masses, so the exact posterior is a two-component mixture
  const double v0 = 0.3, v1 = 0.7;  // external range values
  std::vector<Tensor> images;
  for (int i = 0; i < 64; ++i) {
    images.push_back(Tensor::full({1, 1, 1}, i % 2 == 0 ? v0 : v1));
  }

  TrainConfig cfg;
  cfg.generator.image_shape = {1, 1, 1};
  cfg.generator.latent_dim = 2;
  cfg.generator.embedding_dim = 16;
  cfg.generator.base_channels = 8;
  cfg.generator.channel_multipliers = {1};
  cfg.ddpm.timesteps = 5;
  cfg.ddpm.beta_min = 0.05;
  cfg.ddpm.beta_max = 0.4;
  cfg.batch_size = 32;
  cfg.learning_rate = 2e-3;
  cfg.steps = 3000;
  cfg.log_every = 500;

  Rng rng(13);
  PurifierCheckpoint ckpt = train_ddpm_denoiser(UnlabeledView(images), cfg, rng);
  CHECK(ckpt.mode == "iterative");

  // evaluate against the closed-form mixture posterior
  VarianceSchedule schedule =
      linear_schedule(cfg.ddpm.timesteps, cfg.ddpm.beta_min, cfg.ddpm.beta_max);
  const double i0 = 2 * v0 - 1, i1 = 2 * v1 - 1;  // internal range
  Rng eval_rng(14);
  double net_se = 0.0, bayes_se = 0.0;
  const int n_eval = 20000;
  for (int i = 0; i < n_eval; ++i) {
    double x0 = eval_rng.uniform() < 0.5 ? i0 : i1;
    int t = static_cast<int>(eval_rng.uniform_int(cfg.ddpm.timesteps)) + 1;
    double ab = schedule.alpha_bar(t);
    double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    double eps = eval_rng.normal();
    double xt = a * x0 + b * eps;

    Tensor xt_img = Tensor::full({1, 1, 1}, xt);
    double pred = denoiser_forward(ckpt.net("denoiser"), cfg.generator,
                                   cfg.ddpm.timesteps, xt_img, t)[0];
    net_se += (pred - eps) * (pred - eps);

    double w0 = std::exp(-(xt - a * i0) * (xt - a * i0) / (2 * b * b));
    double w1 = std::exp(-(xt - a * i1) * (xt - a * i1) / (2 * b * b));
    double e_x0 = (w0 * i0 + w1 * i1) / (w0 + w1);
    double bayes_eps = (xt - a * e_x0) / b;
    bayes_se += (bayes_eps - eps) * (bayes_eps - eps);
  }
  double net_mse = net_se / n_eval;
  double bayes_mse = bayes_se / n_eval;
  CHECK(net_mse <= 1.10 * bayes_mse + 0.01);
  CHECK(net_mse >= 0.90 * bayes_mse - 0.01);
}

TEST_CASE("classifier training reaches 90% on the easy synthetic setting") {
  Rng data_rng(56);
  Dataset ds = make_synthetic(256, 2, 16, data_rng, 0.1);

  TrainConfig cfg;
  cfg.classifier.image_shape = {3, 16, 16};
  cfg.classifier.class_count = 2;
  cfg.classifier.base_channels = 8;
  cfg.classifier.stages = 2;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-3;
  cfg.steps = 200;
  cfg.log_every = 50;

  Rng rng(15);
  PurifierCheckpoint ckpt = train_classifier(ds, cfg, rng);
  CHECK(ckpt.mode == "classifier");

  int correct = 0;
  for (size_t i = 0; i < ds.size(); ++i) {
    Tensor logits = classifier_forward(ckpt.net("classifier"), cfg.classifier,
                                       to_internal_range(ds.images[i]));
    int pred = logits[0] > logits[1] ? 0 : 1;
    correct += (pred == ds.labels[i]);
  }
  double acc = 100.0 * correct / static_cast<double>(ds.size());
  CHECK(acc >= 90.0);

  Dataset unlabeled = ds;
  unlabeled.labels.clear();
  Rng rng2(16);
  CHECK_THROWS_AS(train_classifier(unlabeled, cfg, rng2), Error);
}

TEST_CASE("config validation catches bad hyperparameters") {
  TrainConfig cfg = smoke_config();
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate("lightpure"), Error);
  cfg = smoke_config();
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate("lightpure"), Error);
  cfg = smoke_config();
  cfg.betas = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(cfg.validate("lightpure"), Error);
  cfg = smoke_config();
  CHECK_THROWS_AS(cfg.validate("nonsense"), Error);
  cfg.ddpm.beta_min = 0.0;
  CHECK_THROWS_AS(cfg.validate("iterative"), Error);
}
