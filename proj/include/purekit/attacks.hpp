#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "purekit/data_io.hpp"
#include "purekit/purifier.hpp"
#include "purekit/rng.hpp"

namespace purekit {

enum class LossKind { ce, dlr };
enum class NormKind { linf };

struct AttackBudget {
  NormKind norm = NormKind::linf;
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int iterations = 10;
  int restarts = 1;
  int eot_samples = 20;
  int target_classes = 9;

  void validate() const;
};

// -z_y + log sum_j exp(z_j), evaluated with max subtraction.
double ce_loss(const std::vector<double>& logits, int y);
// -(z_y - max_{i!=y} z_i) / (z_pi1 - z_pi3); requires K >= 4 and
// non-degenerate top logits.
double dlr_loss(const std::vector<double>& logits, int y);

// A differentiable pipeline the attacker queries: loss value plus the gradient
// with respect to the [0,1]-range input image. Stochastic pipelines draw their
// defense randomness from the rng at every call; that is the randomness EOT
// averages over.
class GradientSource {
 public:
  virtual ~GradientSource() = default;
  virtual int class_count() const = 0;
  virtual bool stochastic() const = 0;
  virtual std::vector<double> logits(const Tensor& x01, Rng& rng) const = 0;
  // target >= 0 selects the targeted DLR variant (kind must be dlr)
  virtual double loss_and_grad(const Tensor& x01, int y, LossKind kind, Rng& rng,
                               Tensor* grad_out, int target = -1) const = 0;
  // parameter tensors this pipeline reads, for threat-model introspection
  virtual std::vector<const ParameterSet*> parameter_sets() const = 0;

  int predict(const Tensor& x01, Rng& rng) const;
  double loss_value(const Tensor& x01, int y, LossKind kind, Rng& rng) const {
    return loss_and_grad(x01, y, kind, rng, nullptr);
  }
};

std::shared_ptr<GradientSource> make_classifier_source(
    std::shared_ptr<const PurifierCheckpoint> classifier);
// One-shot purifier in front of the classifier. Iterative checkpoints are
// accepted for prediction but refuse gradient queries (no differentiable
// path through the multi-step sampler).
std::shared_ptr<GradientSource> make_purified_source(
    std::shared_ptr<const PurifierCheckpoint> purifier,
    std::shared_ptr<const PurifierCheckpoint> classifier, PurifyOptions opts = {},
    int t_star = 0);

// Arithmetic mean of n gradients evaluated at the same point with independent
// randomness draws. Returns the mean loss through `loss_out` when non-null.
Tensor eot_gradient(const GradientSource& src, const Tensor& x01, int y, int n,
                    LossKind kind, Rng& rng, double* loss_out = nullptr,
                    int target = -1);

// Single sign step clipped to the pixel range.
Tensor fgsm(const GradientSource& src, const Tensor& x01, int y, double epsilon,
            Rng& rng, LossKind kind = LossKind::ce);

// Iterated sign steps projected onto the eps-ball and pixel range; optional
// uniform random start inside the ball (off by default).
Tensor pgd(const GradientSource& src, const Tensor& x01, int y,
           const AttackBudget& budget, Rng& rng, LossKind kind = LossKind::ce,
           bool random_start = false);

struct ApgdTrace {
  std::vector<double> iterate_losses;
  double best_loss = 0.0;
  int step_halvings = 0;
};

// Momentum PGD with adaptive step size and best-iterate bookkeeping. Gradients
// are EOT averages when budget.eot_samples > 1. Always returns the best-loss
// iterate encountered.
Tensor apgd(const GradientSource& src, const Tensor& x01, int y,
            const AttackBudget& budget, LossKind kind, Rng& rng,
            ApgdTrace* trace = nullptr, int target = -1);

// Targeted-DLR ensemble over the top `budget.target_classes` non-true classes;
// requires K >= 10. Returns the candidate with the best targeted loss that
// flips the prediction, else the best-loss candidate.
Tensor apgd_targeted(const GradientSource& src, const Tensor& x01, int y,
                     const AttackBudget& budget, Rng& rng);

// ------------------------------------------------------------- threat models

enum class ThreatKind { black, grayA, grayB, white };

std::string threat_kind_name(ThreatKind kind);
ThreatKind threat_kind_from_name(const std::string& name);

struct CheckpointRegistry {
  std::shared_ptr<const PurifierCheckpoint> target_classifier;
  std::shared_ptr<const PurifierCheckpoint> target_purifier;
  std::shared_ptr<const PurifierCheckpoint> shadow_classifier;   // black box
  std::shared_ptr<const PurifierCheckpoint> surrogate_purifier;  // grayB
};

// gradient_source is what the attacker differentiates; eval_target is always
// the defended pipeline (target purifier + target classifier).
struct ThreatModel {
  ThreatKind kind = ThreatKind::grayA;
  std::shared_ptr<GradientSource> gradient_source;
  std::shared_ptr<GradientSource> eval_target;
};

ThreatModel build_threat_model(ThreatKind kind, const CheckpointRegistry& registry);

}  // namespace purekit
