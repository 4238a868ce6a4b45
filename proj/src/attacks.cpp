#include "purekit/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "purekit/errors.hpp"

namespace purekit {

void AttackBudget::validate() const {
  if (epsilon < 0.0) throw_parameter("attack epsilon must be nonnegative");
  if (alpha < 0.0) throw_parameter("attack alpha must be nonnegative");
  if (iterations < 0) throw_parameter("attack iterations must be nonnegative");
  if (restarts < 1) throw_parameter("attack restarts must be >= 1");
  if (eot_samples < 1) throw_parameter("attack eot_samples must be >= 1");
  if (target_classes < 1) throw_parameter("attack target_classes must be >= 1");
}

double ce_loss(const std::vector<double>& logits, int y) {
  int k = static_cast<int>(logits.size());
  if (y < 0 || y >= k) throw_parameter("ce_loss: label out of range");
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum_exp = 0.0;
  for (double z : logits) sum_exp += std::exp(z - mx);
  return -(logits[static_cast<size_t>(y)] - mx) + std::log(sum_exp);
}

double dlr_loss(const std::vector<double>& logits, int y) {
  int k = static_cast<int>(logits.size());
  if (k < 4) throw_parameter("dlr loss requires at least 4 classes");
  if (y < 0 || y >= k) throw_parameter("dlr_loss: label out of range");
  std::vector<double> sorted = logits;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double denom = sorted[0] - sorted[2];
  if (denom == 0.0) {
    throw_parameter("dlr loss undefined: top-1 and top-3 logits are equal (constant logits?)");
  }
  double best_other = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) {
    if (i != y) best_other = std::max(best_other, logits[static_cast<size_t>(i)]);
  }
  return -(logits[static_cast<size_t>(y)] - best_other) / denom;
}

int GradientSource::predict(const Tensor& x01, Rng& rng) const {
  std::vector<double> z = logits(x01, rng);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

// ------------------------------------------------------------------- pipelines

namespace {

ag::Var loss_from_logits(const ag::Var& logits, int y, LossKind kind, int target) {
  if (kind == LossKind::ce) {
    if (target >= 0) throw_parameter("targeted attack requires the dlr loss");
    return ag::cross_entropy(logits, {y});
  }
  if (target >= 0) return ag::dlr_targeted_op(logits, {y}, {target});
  return ag::dlr_loss_op(logits, {y});
}

class ClassifierSource : public GradientSource {
 public:
  explicit ClassifierSource(std::shared_ptr<const PurifierCheckpoint> ckpt)
      : ckpt_(std::move(ckpt)) {
    if (ckpt_->mode != "classifier") {
      throw_parameter("classifier pipeline needs a classifier checkpoint");
    }
  }

  int class_count() const override { return ckpt_->config.classifier.class_count; }
  bool stochastic() const override { return false; }

  std::vector<double> logits(const Tensor& x01, Rng&) const override {
    Tensor z = classifier_forward(ckpt_->net("classifier"), ckpt_->config.classifier,
                                  to_internal_range(x01));
    return z.vec();
  }

  double loss_and_grad(const Tensor& x01, int y, LossKind kind, Rng&, Tensor* grad_out,
                       int target) const override {
    Shape s = x01.shape();
    ag::Var x = ag::leaf(x01.reshaped({1, s[0], s[1], s[2]}));
    ag::Var x_int = ag::add_scalar(ag::mul_scalar(x, 2.0), -1.0);
    ag::Var z = classifier_forward(as_constants(ckpt_->net("classifier")),
                                   ckpt_->config.classifier, x_int);
    ag::Var loss = loss_from_logits(z, y, kind, target);
    if (grad_out) {
      ag::backward(loss);
      *grad_out = x->grad_ref().reshaped(s);
    }
    return loss->value.item();
  }

  std::vector<const ParameterSet*> parameter_sets() const override {
    return {&ckpt_->net("classifier")};
  }

 private:
  std::shared_ptr<const PurifierCheckpoint> ckpt_;
};

class PurifiedSource : public GradientSource {
 public:
  PurifiedSource(std::shared_ptr<const PurifierCheckpoint> purifier,
                 std::shared_ptr<const PurifierCheckpoint> classifier,
                 PurifyOptions opts, int t_star)
      : purifier_(std::move(purifier)),
        classifier_(std::move(classifier)),
        opts_(opts),
        t_star_(t_star) {
    if (!is_purifier_mode(purifier_->mode)) {
      throw_parameter("purified pipeline needs a purifier checkpoint, got mode=" +
                      purifier_->mode);
    }
    if (classifier_->mode != "classifier") {
      throw_parameter("purified pipeline needs a classifier checkpoint");
    }
    if (purifier_->mode == "iterative" && t_star_ == 0) {
      t_star_ = purifier_->config.ddpm.timesteps;
    }
  }

  int class_count() const override { return classifier_->config.classifier.class_count; }
  bool stochastic() const override { return true; }

  std::vector<double> logits(const Tensor& x01, Rng& rng) const override {
    Tensor purified = purifier_->mode == "iterative"
                          ? purify_iterative(*purifier_, x01, t_star_, rng).first
                          : purify_oneshot(*purifier_, x01, rng, opts_).first;
    Tensor z = classifier_forward(classifier_->net("classifier"),
                                  classifier_->config.classifier,
                                  to_internal_range(purified));
    return z.vec();
  }

  double loss_and_grad(const Tensor& x01, int y, LossKind kind, Rng& rng,
                       Tensor* grad_out, int target) const override {
    if (purifier_->mode == "iterative") {
      throw_capability(
          "full gradients through the iterative purifier are not supported; "
          "use a one-shot checkpoint for white/gray-box gradient pipelines");
    }
    Shape s = x01.shape();
    ag::Var x = ag::leaf(x01.reshaped({1, s[0], s[1], s[2]}));
    ag::Var purified = purify_oneshot_var(*purifier_, x, rng, opts_);
    ag::Var x_int = ag::add_scalar(ag::mul_scalar(purified, 2.0), -1.0);
    ag::Var z = classifier_forward(as_constants(classifier_->net("classifier")),
                                   classifier_->config.classifier, x_int);
    ag::Var loss = loss_from_logits(z, y, kind, target);
    if (grad_out) {
      ag::backward(loss);
      *grad_out = x->grad_ref().reshaped(s);
    }
    return loss->value.item();
  }

  std::vector<const ParameterSet*> parameter_sets() const override {
    std::vector<const ParameterSet*> out;
    for (const auto& [name, params] : purifier_->nets) out.push_back(&params);
    out.push_back(&classifier_->net("classifier"));
    return out;
  }

 private:
  std::shared_ptr<const PurifierCheckpoint> purifier_;
  std::shared_ptr<const PurifierCheckpoint> classifier_;
  PurifyOptions opts_;
  int t_star_;
};

}  // namespace

std::shared_ptr<GradientSource> make_classifier_source(
    std::shared_ptr<const PurifierCheckpoint> classifier) {
  return std::make_shared<ClassifierSource>(std::move(classifier));
}

std::shared_ptr<GradientSource> make_purified_source(
    std::shared_ptr<const PurifierCheckpoint> purifier,
    std::shared_ptr<const PurifierCheckpoint> classifier, PurifyOptions opts,
    int t_star) {
  return std::make_shared<PurifiedSource>(std::move(purifier), std::move(classifier),
                                          opts, t_star);
}

// --------------------------------------------------------------------- attacks

namespace {

Tensor clip_to_ball(const Tensor& x, const Tensor& origin, double epsilon) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    double lo = std::max(0.0, origin[i] - epsilon);
    double hi = std::min(1.0, origin[i] + epsilon);
    out[i] = std::clamp(x[i], lo, hi);
  }
  return out;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tensor eot_gradient(const GradientSource& src, const Tensor& x01, int y, int n,
                    LossKind kind, Rng& rng, double* loss_out, int target) {
  if (n < 1) throw_parameter("eot_gradient: sample count must be >= 1");
  Tensor mean_grad(x01.shape());
  double mean_loss = 0.0;
  for (int i = 0; i < n; ++i) {
    Tensor g;
    mean_loss += src.loss_and_grad(x01, y, kind, rng, &g, target);
    for (int64_t j = 0; j < g.numel(); ++j) mean_grad[j] += g[j];
  }
  for (int64_t j = 0; j < mean_grad.numel(); ++j) mean_grad[j] /= n;
  if (loss_out) *loss_out = mean_loss / n;
  return mean_grad;
}

Tensor fgsm(const GradientSource& src, const Tensor& x01, int y, double epsilon,
            Rng& rng, LossKind kind) {
  if (epsilon < 0.0) throw_parameter("fgsm: epsilon must be nonnegative");
  Tensor grad;
  src.loss_and_grad(x01, y, kind, rng, &grad);
  Tensor out(x01.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    out[i] = std::clamp(x01[i] + epsilon * sign(grad[i]), 0.0, 1.0);
  }
  return out;
}

Tensor pgd(const GradientSource& src, const Tensor& x01, int y,
           const AttackBudget& budget, Rng& rng, LossKind kind, bool random_start) {
  budget.validate();
  Tensor x = x01;
  if (random_start) {
    for (int64_t i = 0; i < x.numel(); ++i) {
      x[i] += rng.uniform(-budget.epsilon, budget.epsilon);
    }
    x = clip_to_ball(x, x01, budget.epsilon);
  }
  for (int it = 0; it < budget.iterations; ++it) {
    Tensor grad;
    src.loss_and_grad(x, y, kind, rng, &grad);
    for (int64_t i = 0; i < x.numel(); ++i) x[i] += budget.alpha * sign(grad[i]);
    x = clip_to_ball(x, x01, budget.epsilon);
  }
  return x;
}

namespace {

// checkpoint iteration indices from the published Auto-PGD schedule:
// p_0 = 0, p_1 = 0.22, p_{j+1} = p_j + max(p_j - p_{j-1} - 0.03, 0.06)
std::vector<int> apgd_checkpoints(int n_iter) {
  std::vector<int> w;
  double p_prev = 0.0, p_cur = 0.22;
  w.push_back(static_cast<int>(std::ceil(p_cur * n_iter)));
  while (w.back() < n_iter) {
    double p_next = p_cur + std::max(p_cur - p_prev - 0.03, 0.06);
    p_prev = p_cur;
    p_cur = p_next;
    w.push_back(static_cast<int>(std::ceil(p_cur * n_iter)));
  }
  return w;
}

struct ApgdRun {
  Tensor x_best;
  double f_best;
};

ApgdRun apgd_single(const GradientSource& src, const Tensor& origin, const Tensor& start,
                    int y, const AttackBudget& budget, LossKind kind, Rng& rng,
                    ApgdTrace* trace, int target) {
  const double alpha_mom = 0.75;  // momentum mixing factor
  const double rho = 0.75;        // success-fraction threshold
  const int n_iter = budget.iterations;
  const int eot = budget.eot_samples;

  auto fg = [&](const Tensor& x, Tensor* g) {
    double loss;
    Tensor grad = eot_gradient(src, x, y, eot, kind, rng, &loss, target);
    if (g) *g = std::move(grad);
    return loss;
  };
  auto log_loss = [&](double f) {
    if (trace) trace->iterate_losses.push_back(f);
  };

  double eta = 2.0 * budget.epsilon;
  Tensor x_prev = start;
  Tensor grad;
  double f_prev = fg(x_prev, &grad);
  log_loss(f_prev);

  Tensor x_cur(x_prev.shape());
  for (int64_t i = 0; i < x_cur.numel(); ++i) {
    x_cur[i] = x_prev[i] + eta * sign(grad[i]);
  }
  x_cur = clip_to_ball(x_cur, origin, budget.epsilon);

  Tensor x_best = x_prev;
  double f_best = f_prev;
  double f_cur = fg(x_cur, &grad);
  log_loss(f_cur);
  if (f_cur > f_best) {
    f_best = f_cur;
    x_best = x_cur;
  }

  std::vector<int> checkpoints = apgd_checkpoints(n_iter);
  size_t ckpt_idx = 0;
  int successes = 0;
  double eta_at_last_ckpt = eta;
  double fbest_at_last_ckpt = f_best;
  int last_ckpt = 0;
  if (f_cur > f_prev) ++successes;

  for (int k = 1; k < n_iter; ++k) {
    Tensor z(x_cur.shape());
    for (int64_t i = 0; i < z.numel(); ++i) z[i] = x_cur[i] + eta * sign(grad[i]);
    z = clip_to_ball(z, origin, budget.epsilon);
    Tensor x_next(x_cur.shape());
    for (int64_t i = 0; i < x_next.numel(); ++i) {
      x_next[i] = x_cur[i] + alpha_mom * (z[i] - x_cur[i]) +
                  (1.0 - alpha_mom) * (x_cur[i] - x_prev[i]);
    }
    x_next = clip_to_ball(x_next, origin, budget.epsilon);

    double f_next = fg(x_next, &grad);
    log_loss(f_next);
    if (f_next > f_cur) ++successes;
    if (f_next > f_best) {
      f_best = f_next;
      x_best = x_next;
    }
    x_prev = std::move(x_cur);
    x_cur = std::move(x_next);
    f_cur = f_next;

    if (ckpt_idx < checkpoints.size() && k + 1 == checkpoints[ckpt_idx]) {
      int interval = checkpoints[ckpt_idx] - last_ckpt;
      bool too_few_successes = successes < rho * interval;
      bool stalled = eta == eta_at_last_ckpt && f_best == fbest_at_last_ckpt;
      if (too_few_successes || stalled) {
        eta /= 2.0;
        if (trace) ++trace->step_halvings;
        x_cur = x_best;
        f_cur = fg(x_cur, &grad);
        log_loss(f_cur);
        x_prev = x_cur;
      }
      eta_at_last_ckpt = eta;
      fbest_at_last_ckpt = f_best;
      successes = 0;
      last_ckpt = checkpoints[ckpt_idx];
      ++ckpt_idx;
    }
  }
  return {std::move(x_best), f_best};
}

}  // namespace

Tensor apgd(const GradientSource& src, const Tensor& x01, int y,
            const AttackBudget& budget, LossKind kind, Rng& rng, ApgdTrace* trace,
            int target) {
  budget.validate();
  if (kind == LossKind::dlr && src.class_count() < 4) {
    throw_parameter("apgd-dlr requires at least 4 classes");
  }
  if (budget.iterations == 0) {
    if (trace) trace->best_loss = 0.0;
    return x01;
  }
  Tensor best;
  double f_best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < budget.restarts; ++r) {
    Tensor start = x01;
    if (r > 0) {
      for (int64_t i = 0; i < start.numel(); ++i) {
        start[i] += rng.uniform(-budget.epsilon, budget.epsilon);
      }
      start = clip_to_ball(start, x01, budget.epsilon);
    }
    ApgdRun run = apgd_single(src, x01, start, y, budget, kind, rng, trace, target);
    if (run.f_best > f_best) {
      f_best = run.f_best;
      best = std::move(run.x_best);
    }
  }
  if (trace) trace->best_loss = f_best;
  return best;
}

Tensor apgd_targeted(const GradientSource& src, const Tensor& x01, int y,
                     const AttackBudget& budget, Rng& rng) {
  budget.validate();
  int k = src.class_count();
  if (k < 10) {
    throw_parameter("targeted dlr attack requires at least 10 classes");
  }
  std::vector<double> z = src.logits(x01, rng);
  std::vector<int> order(z.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return z[static_cast<size_t>(a)] > z[static_cast<size_t>(b)]; });

  Tensor best = x01;
  double f_best = -std::numeric_limits<double>::infinity();
  int tried = 0;
  for (int idx : order) {
    if (idx == y) continue;
    if (tried++ == budget.target_classes) break;
    ApgdTrace trace;
    Tensor cand = apgd(src, x01, y, budget, LossKind::dlr, rng, &trace, idx);
    if (src.predict(cand, rng) != y) return cand;
    if (trace.best_loss > f_best) {
      f_best = trace.best_loss;
      best = std::move(cand);
    }
  }
  return best;
}

// --------------------------------------------------------------- threat models

std::string threat_kind_name(ThreatKind kind) {
  switch (kind) {
    case ThreatKind::black: return "black";
    case ThreatKind::grayA: return "grayA";
    case ThreatKind::grayB: return "grayB";
    case ThreatKind::white: return "white";
  }
  return "?";
}

ThreatKind threat_kind_from_name(const std::string& name) {
  if (name == "black") return ThreatKind::black;
  if (name == "grayA") return ThreatKind::grayA;
  if (name == "grayB") return ThreatKind::grayB;
  if (name == "white") return ThreatKind::white;
  throw_config("unknown threat model: " + name);
}

ThreatModel build_threat_model(ThreatKind kind, const CheckpointRegistry& registry) {
  auto require = [](const std::shared_ptr<const PurifierCheckpoint>& ckpt,
                    const char* role) {
    if (!ckpt) throw_config(std::string("threat model requires checkpoint: ") + role);
  };
  require(registry.target_classifier, "target_classifier");
  require(registry.target_purifier, "target_purifier");

  ThreatModel tm;
  tm.kind = kind;
  tm.eval_target =
      make_purified_source(registry.target_purifier, registry.target_classifier);
  switch (kind) {
    case ThreatKind::black:
      require(registry.shadow_classifier, "shadow_classifier");
      tm.gradient_source = make_classifier_source(registry.shadow_classifier);
      break;
    case ThreatKind::grayA:
      tm.gradient_source = make_classifier_source(registry.target_classifier);
      break;
    case ThreatKind::grayB:
      require(registry.surrogate_purifier, "surrogate_purifier");
      tm.gradient_source = make_purified_source(registry.surrogate_purifier,
                                                registry.target_classifier);
      break;
    case ThreatKind::white:
      tm.gradient_source = tm.eval_target;
      break;
  }
  return tm;
}

}  // namespace purekit
