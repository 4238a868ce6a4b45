#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "purekit/attacks.hpp"
#include "purekit/data_io.hpp"

namespace purekit {

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  int samples = 0;
  int generator_invocations_per_image = 0;
};

struct RobustResult {
  std::string name;        // attack-config label, e.g. "grayA/pgd"
  double percent = 0.0;    // surviving fraction, in [0,100]
  int attack_failures = 0; // per-image attack errors, counted as survivals
};

struct EvalReport {
  double clean_accuracy = 0.0;
  std::vector<RobustResult> robust_accuracy;
  std::optional<LatencyStats> latency;
  std::map<std::string, std::string> checkpoint_hashes;  // role -> hash
  uint64_t seed = 0;
  std::string dataset_id;
  std::string dataset_fingerprint;
};

struct AttackConfig {
  std::string kind = "pgd";  // fgsm | pgd | apgd-ce | apgd-dlr | apgd-rand | apgd-t
  AttackBudget budget;
  bool random_start = false;

  void validate(int class_count) const;
};

// Fraction of images whose (optionally purified) classification matches the
// label. Purification randomness is fresh per image but a pure function of
// (seed, image index), so reruns reproduce exactly. limit = 0 means all.
double clean_accuracy(const GradientSource& pipeline, const Dataset& dataset,
                      uint64_t seed, size_t limit = 0);

// Crafts adversarial examples with the threat model's gradient source and
// scores them on the eval target. Attack errors are recorded per image and
// counted as attacker failures. With epsilon = 0 and the same seed this equals
// clean_accuracy exactly.
RobustResult robust_accuracy(const GradientSource& gradient_source,
                             const GradientSource& eval_target,
                             const AttackConfig& attack, const Dataset& dataset,
                             uint64_t seed, size_t limit = 0,
                             const std::string& name = "");

// Times pipeline_once per image with a monotonic clock, strictly sequentially,
// excluding `warmup` runs. Cycles through `images`.
LatencyStats latency_benchmark(const std::function<void(const Tensor&)>& pipeline_once,
                               const std::vector<Tensor>& images, int n,
                               int warmup = 3, int invocations_per_image = 0);

// Writes report.json, tables.csv, and per-figure plot data (two-column CSVs).
// Deterministic: re-emitting the same report yields byte-identical files.
void emit_report(const EvalReport& report, const std::string& out_dir);

}  // namespace purekit
