#include "purekit/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "purekit/config_json.hpp"
#include "purekit/errors.hpp"

namespace fs = std::filesystem;

namespace purekit {

namespace {

constexpr uint64_t kAttackStream = 0x61747461636bULL;  // distinct from eval streams

Rng eval_rng(uint64_t seed, size_t image_index) {
  return Rng(mix_seed(seed, static_cast<uint64_t>(image_index)));
}

Rng attack_rng(uint64_t seed, size_t image_index) {
  return Rng(mix_seed(seed ^ kAttackStream, static_cast<uint64_t>(image_index)));
}

}  // namespace

void AttackConfig::validate(int class_count) const {
  budget.validate();
  if (kind != "fgsm" && kind != "pgd" && kind != "apgd-ce" && kind != "apgd-dlr" &&
      kind != "apgd-rand" && kind != "apgd-t") {
    throw_config("unknown attack kind: " + kind);
  }
  if ((kind == "apgd-dlr" || kind == "apgd-rand") && class_count < 4) {
    throw_config("attack '" + kind + "' uses the DLR loss and requires K >= 4 classes (dataset has " +
                 std::to_string(class_count) + ")");
  }
  if (kind == "apgd-t" && class_count < 10) {
    throw_config("attack 'apgd-t' requires K >= 10 classes");
  }
}

double clean_accuracy(const GradientSource& pipeline, const Dataset& dataset,
                      uint64_t seed, size_t limit) {
  if (!dataset.labeled()) throw_parameter("clean_accuracy requires a labeled dataset");
  size_t n = dataset.size();
  if (limit > 0) n = std::min(n, limit);
  if (n == 0) throw_parameter("clean_accuracy: empty dataset");
  size_t correct = 0;
  for (size_t i = 0; i < n; ++i) {
    Rng rng = eval_rng(seed, i);
    if (pipeline.predict(dataset.images[i], rng) == dataset.labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

std::vector<Tensor> craft_candidates(const GradientSource& src, const Tensor& x, int y,
                                     const AttackConfig& cfg, Rng& rng) {
  const AttackBudget& b = cfg.budget;
  if (cfg.kind == "fgsm") return {fgsm(src, x, y, b.epsilon, rng)};
  if (cfg.kind == "pgd") return {pgd(src, x, y, b, rng, LossKind::ce, cfg.random_start)};
  if (cfg.kind == "apgd-ce") return {apgd(src, x, y, b, LossKind::ce, rng)};
  if (cfg.kind == "apgd-dlr") return {apgd(src, x, y, b, LossKind::dlr, rng)};
  if (cfg.kind == "apgd-t") return {apgd_targeted(src, x, y, b, rng)};
  if (cfg.kind == "apgd-rand") {
    // worst case over the CE/DLR ensemble, per image
    return {apgd(src, x, y, b, LossKind::ce, rng), apgd(src, x, y, b, LossKind::dlr, rng)};
  }
  throw_config("unknown attack kind: " + cfg.kind);
}

}  // namespace

RobustResult robust_accuracy(const GradientSource& gradient_source,
                             const GradientSource& eval_target,
                             const AttackConfig& attack, const Dataset& dataset,
                             uint64_t seed, size_t limit, const std::string& name) {
  if (!dataset.labeled()) throw_parameter("robust_accuracy requires a labeled dataset");
  attack.validate(std::max(gradient_source.class_count(), eval_target.class_count()));
  size_t n = dataset.size();
  if (limit > 0) n = std::min(n, limit);
  if (n == 0) throw_parameter("robust_accuracy: empty dataset");

  RobustResult result;
  result.name = name.empty() ? attack.kind : name;
  size_t surviving = 0;
  for (size_t i = 0; i < n; ++i) {
    const Tensor& x = dataset.images[i];
    int y = dataset.labels[i];
    std::vector<Tensor> candidates;
    try {
      Rng rng = attack_rng(seed, i);
      candidates = craft_candidates(gradient_source, x, y, attack, rng);
    } catch (const Error& e) {
      // conservative toward the attacker: a failed attack leaves the image
      // unperturbed and the failure on record
      std::clog << "[purekit] attack failure on image " << i << ": " << e.what() << "\n";
      ++result.attack_failures;
      candidates = {x};
    }
    bool survives = true;
    for (const Tensor& cand : candidates) {
      Rng rng = eval_rng(seed, i);
      if (eval_target.predict(cand, rng) != y) {
        survives = false;
        break;
      }
    }
    if (survives) ++surviving;
  }
  result.percent = 100.0 * static_cast<double>(surviving) / static_cast<double>(n);
  return result;
}

LatencyStats latency_benchmark(const std::function<void(const Tensor&)>& pipeline_once,
                               const std::vector<Tensor>& images, int n, int warmup,
                               int invocations_per_image) {
  if (images.empty()) throw_parameter("latency_benchmark: empty dataset");
  if (n < 1) throw_parameter("latency_benchmark: n must be >= 1");
  using Clock = std::chrono::steady_clock;

  // strictly sequential: one image in flight at a time
  for (int i = 0; i < warmup; ++i) {
    pipeline_once(images[static_cast<size_t>(i) % images.size()]);
  }
  std::vector<double> ms(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Tensor& img = images[static_cast<size_t>(i) % images.size()];
    auto t0 = Clock::now();
    pipeline_once(img);
    auto t1 = Clock::now();
    ms[static_cast<size_t>(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }

  LatencyStats stats;
  stats.samples = n;
  stats.generator_invocations_per_image = invocations_per_image;
  double sum = 0.0;
  for (double v : ms) sum += v;
  stats.mean_ms = sum / n;
  double ss = 0.0;
  for (double v : ms) ss += (v - stats.mean_ms) * (v - stats.mean_ms);
  stats.std_ms = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  std::sort(ms.begin(), ms.end());
  auto pct = [&](double p) {
    size_t rank = static_cast<size_t>(std::ceil(p * n));
    return ms[std::min(ms.size() - 1, rank == 0 ? 0 : rank - 1)];
  };
  stats.p50_ms = pct(0.50);
  stats.p95_ms = pct(0.95);
  return stats;
}

void emit_report(const EvalReport& report, const std::string& out_dir) {
  auto check_pct = [](double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 100.0)) {
      throw_parameter("report: " + what + " outside [0,100]");
    }
  };
  check_pct(report.clean_accuracy, "clean_accuracy");
  for (const auto& r : report.robust_accuracy) check_pct(r.percent, r.name);
  if (report.latency && report.latency->samples <= 0) {
    throw_parameter("report: latency sample count must be positive");
  }
  fs::create_directories(out_dir);

  ordered_json robust = ordered_json::object();
  ordered_json failures = ordered_json::object();
  for (const auto& r : report.robust_accuracy) {
    robust[r.name] = r.percent;
    failures[r.name] = r.attack_failures;
  }
  ordered_json latency;
  if (report.latency) {
    latency = ordered_json{
        {"mean_ms", report.latency->mean_ms},
        {"std_ms", report.latency->std_ms},
        {"p50_ms", report.latency->p50_ms},
        {"p95_ms", report.latency->p95_ms},
        {"samples", report.latency->samples},
        {"generator_invocations_per_image",
         report.latency->generator_invocations_per_image}};
  }
  ordered_json j{{"clean_accuracy", report.clean_accuracy},
                 {"robust_accuracy", std::move(robust)},
                 {"attack_failures", std::move(failures)},
                 {"latency", std::move(latency)},
                 {"provenance",
                  {{"checkpoint_hashes", report.checkpoint_hashes},
                   {"seed", report.seed},
                   {"dataset_id", report.dataset_id},
                   {"dataset_fingerprint", report.dataset_fingerprint}}}};

  auto write_file = [&](const std::string& name, const std::string& content) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::trunc | std::ios::binary);
    if (!f) throw_runtime("cannot write report file: " + name);
    f << content;
  };
  write_file("report.json", j.dump(2) + "\n");

  std::ostringstream tables;
  tables.precision(17);
  tables << "metric,config,value\n";
  tables << "clean_accuracy,," << report.clean_accuracy << "\n";
  for (const auto& r : report.robust_accuracy) {
    tables << "robust_accuracy," << r.name << "," << r.percent << "\n";
  }
  if (report.latency) {
    tables << "latency_mean_ms,," << report.latency->mean_ms << "\n";
    tables << "latency_p95_ms,," << report.latency->p95_ms << "\n";
    tables << "generator_invocations,," << report.latency->generator_invocations_per_image
           << "\n";
  }
  write_file("tables.csv", tables.str());

  std::ostringstream fig_rob, fig_acc, fig_lat;
  fig_rob.precision(17);
  fig_acc.precision(17);
  fig_lat.precision(17);
  fig_rob << "label,value\n";
  for (const auto& r : report.robust_accuracy) {
    fig_rob << r.name << "," << r.percent << "\n";
  }
  fig_acc << "label,value\n";
  fig_acc << "clean," << report.clean_accuracy << "\n";
  fig_lat << "label,value\n";
  if (report.latency) {
    fig_lat << "mean_ms," << report.latency->mean_ms << "\n";
    fig_lat << "p95_ms," << report.latency->p95_ms << "\n";
  }
  write_file("fig_robustness.csv", fig_rob.str());
  write_file("fig_accuracy.csv", fig_acc.str());
  write_file("fig_latency.csv", fig_lat.str());
}

}  // namespace purekit
