#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "purekit/errors.hpp"
#include "purekit/evaluation.hpp"
#include "test_util.hpp"

using namespace purekit;
namespace fs = std::filesystem;

namespace {

// classifier stub driven by a logits function of the image
class StubSource : public GradientSource {
 public:
  using Fn = std::function<std::vector<double>(const Tensor&)>;
  StubSource(Fn fn, int k) : fn_(std::move(fn)), k_(k) {}
  int class_count() const override { return k_; }
  bool stochastic() const override { return false; }
  std::vector<double> logits(const Tensor& x, Rng&) const override { return fn_(x); }
  double loss_and_grad(const Tensor& x, int y, LossKind, Rng&, Tensor* grad,
                       int) const override {
    if (grad) {
      *grad = Tensor(x.shape());
      for (int64_t i = 0; i < x.numel(); ++i) (*grad)[i] = 1.0;  // uniform ascent
    }
    return ce_loss(fn_(x), y);
  }
  std::vector<const ParameterSet*> parameter_sets() const override { return {}; }

 private:
  Fn fn_;
  int k_;
};

Dataset labeled_pixels(int n, int k, Rng& rng) {
  // label is encoded in the first pixel; an oracle classifier can read it
  Dataset ds;
  ds.class_count = k;
  ds.id = "pixel-coded";
  for (int i = 0; i < n; ++i) {
    int y = i % k;
    Tensor img = rng.uniform_tensor({1, 4, 4}, 0.0, 1.0);
    img[0] = (y + 0.5) / k;
    ds.images.push_back(std::move(img));
    ds.labels.push_back(y);
  }
  return ds;
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("purekit_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("clean accuracy: oracle and constant stubs") {
  Rng rng(111);
  Dataset ds = labeled_pixels(40, 4, rng);
  StubSource oracle(
      [&](const Tensor& x) {
        std::vector<double> z(4, 0.0);
        for (int k = 0; k < 4; ++k) z[size_t(k)] = -std::fabs(x[0] * 4.0 - (k + 0.5));
        return z;
      },
      4);
  CHECK(clean_accuracy(oracle, ds, 1) == doctest::Approx(100.0));

  StubSource constant(
      [](const Tensor&) {
        return std::vector<double>{1.0, 0.0, 0.0, 0.0};
      },
      4);
  CHECK(clean_accuracy(constant, ds, 1) == doctest::Approx(25.0));

  Rng rng10(112);
  Dataset balanced = labeled_pixels(100, 10, rng10);
  StubSource const10(
      [](const Tensor&) {
        std::vector<double> z(10, 0.0);
        z[3] = 1.0;
        return z;
      },
      10);
  CHECK(clean_accuracy(const10, balanced, 1) == doctest::Approx(10.0));

  Dataset unlabeled = ds;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(clean_accuracy(oracle, unlabeled, 1), Error);
}

TEST_CASE("robust accuracy equals clean accuracy at epsilon 0 with shared seeds") {
  Rng rng(113);
  Dataset ds = labeled_pixels(30, 4, rng);
  StubSource oracle(
      [&](const Tensor& x) {
        std::vector<double> z(4, 0.0);
        for (int k = 0; k < 4; ++k) z[size_t(k)] = -std::fabs(x[0] * 4.0 - (k + 0.5));
        return z;
      },
      4);
  AttackConfig atk;
  atk.kind = "pgd";
  atk.budget.epsilon = 0.0;
  atk.budget.alpha = 0.0;
  atk.budget.iterations = 3;
  atk.budget.eot_samples = 1;
  double clean = clean_accuracy(oracle, ds, 7);
  RobustResult rr = robust_accuracy(oracle, oracle, atk, ds, 7);
  CHECK(rr.percent == clean);
  CHECK(rr.attack_failures == 0);
}

TEST_CASE("undefended margins collapse under oversized fgsm") {
  // linear decision with tiny margins: s = mean(x) - 0.5
  Rng rng(114);
  Dataset ds;
  ds.class_count = 2;
  for (int i = 0; i < 30; ++i) {
    Tensor img = rng.uniform_tensor({1, 3, 3}, 0.45, 0.55);
    double s = mean_value(img) - 0.5;
    ds.images.push_back(img);
    ds.labels.push_back(s > 0 ? 1 : 0);
  }
  StubSource margin(
      [](const Tensor& x) {
        double s = 20.0 * (mean_value(x) - 0.5);
        return std::vector<double>{-s, s};
      },
      2);
  // gradient of CE wrt x for the true class pushes mean across the boundary
  class MarginSource : public GradientSource {
   public:
    int class_count() const override { return 2; }
    bool stochastic() const override { return false; }
    std::vector<double> logits(const Tensor& x, Rng&) const override {
      double s = 20.0 * (mean_value(x) - 0.5);
      return {-s, s};
    }
    double loss_and_grad(const Tensor& x, int y, LossKind, Rng&, Tensor* grad,
                         int) const override {
      double s = 20.0 * (mean_value(x) - 0.5);
      if (grad) {
        *grad = Tensor(x.shape());
        // d ce / d x = (p1 - [y==1]) * 20 / numel per pixel
        double p1 = 1.0 / (1.0 + std::exp(-2.0 * s));
        double coeff = (p1 - (y == 1 ? 1.0 : 0.0)) * 2.0 * 20.0 / double(x.numel());
        for (int64_t i = 0; i < x.numel(); ++i) (*grad)[i] = coeff;
      }
      static Rng unused(0);
      return ce_loss(logits(x, unused), y);
    }
    std::vector<const ParameterSet*> parameter_sets() const override { return {}; }
  } msrc;

  AttackConfig atk;
  atk.kind = "fgsm";
  atk.budget.epsilon = 0.2;  // larger than every margin (|mean-0.5| <= 0.05)
  RobustResult rr = robust_accuracy(msrc, msrc, atk, ds, 3);
  CHECK(rr.percent == doctest::Approx(0.0));
}

TEST_CASE("per-image attack failures are recorded as survivals") {
  Rng rng(115);
  Dataset ds = labeled_pixels(10, 4, rng);
  struct Failing : GradientSource {
    int class_count() const override { return 4; }
    bool stochastic() const override { return false; }
    std::vector<double> logits(const Tensor&, Rng&) const override {
      return {1.0, 0.0, 0.0, 0.0};
    }
    double loss_and_grad(const Tensor&, int, LossKind, Rng&, Tensor*, int) const override {
      throw Error(ErrorKind::capability, "non-differentiable source");
    }
    std::vector<const ParameterSet*> parameter_sets() const override { return {}; }
  } failing;
  StubSource oracle(
      [&](const Tensor& x) {
        std::vector<double> z(4, 0.0);
        for (int k = 0; k < 4; ++k) z[size_t(k)] = -std::fabs(x[0] * 4.0 - (k + 0.5));
        return z;
      },
      4);
  AttackConfig atk;
  atk.kind = "fgsm";
  atk.budget.epsilon = 0.1;
  RobustResult rr = robust_accuracy(failing, oracle, atk, ds, 3);
  CHECK(rr.attack_failures == 10);
  CHECK(rr.percent == doctest::Approx(100.0));
}

TEST_CASE("latency benchmark: stub timing, warmup exclusion, sequential execution") {
  std::vector<Tensor> images(3, Tensor::zeros({1, 2, 2}));

  std::atomic<int> in_flight{0};
  bool overlapped = false;
  auto sleeper = [&](const Tensor&) {
    if (++in_flight > 1) overlapped = true;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
  };
  LatencyStats stats = latency_benchmark(sleeper, images, 100, 3, 1);
  CHECK(stats.samples == 100);
  CHECK(stats.generator_invocations_per_image == 1);
  CHECK(stats.mean_ms >= 5.0);
  CHECK(stats.mean_ms <= 6.0);
  CHECK(stats.p50_ms >= 5.0);
  CHECK(stats.p95_ms >= stats.p50_ms);
  CHECK(!overlapped);

  // warmup calls are excluded from the statistics
  int call = 0;
  auto staged = [&](const Tensor&) {
    ++call;
    std::this_thread::sleep_for(std::chrono::milliseconds(call <= 3 ? 30 : 1));
  };
  LatencyStats s2 = latency_benchmark(staged, images, 20, 3, 0);
  CHECK(s2.mean_ms < 10.0);

  CHECK_THROWS_AS(latency_benchmark(sleeper, {}, 10), Error);
  CHECK_THROWS_AS(latency_benchmark(sleeper, images, 0), Error);
}

TEST_CASE("report emission: files, determinism, lossless json") {
  fs::path dir = temp_dir("report");
  EvalReport report;
  report.clean_accuracy = 93.25;
  report.robust_accuracy.push_back({"grayA/pgd", 71.5, 0});
  report.robust_accuracy.push_back({"white/apgd-ce", 42.0, 1});
  report.robust_accuracy.push_back({"black/fgsm", 88.0, 0});
  LatencyStats lat;
  lat.mean_ms = 12.5;
  lat.std_ms = 0.8;
  lat.p50_ms = 12.2;
  lat.p95_ms = 14.0;
  lat.samples = 1000;
  lat.generator_invocations_per_image = 1;
  report.latency = lat;
  report.checkpoint_hashes["target_classifier"] = "abc123";
  report.seed = 42;
  report.dataset_id = "synthetic(n=8)";
  report.dataset_fingerprint = "deadbeef";

  emit_report(report, dir.string());
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "tables.csv"));
  CHECK(fs::exists(dir / "fig_robustness.csv"));
  CHECK(fs::exists(dir / "fig_accuracy.csv"));
  CHECK(fs::exists(dir / "fig_latency.csv"));

  // json round-trips losslessly
  auto j = nlohmann::ordered_json::parse(slurp(dir / "report.json"));
  CHECK(j.at("clean_accuracy").get<double>() == 93.25);
  CHECK(j.at("robust_accuracy").size() == 3);
  CHECK(j.at("latency").at("samples").get<int>() == 1000);
  auto j2 = nlohmann::ordered_json::parse(j.dump());
  CHECK(j == j2);

  // one row per robust entry in tables.csv
  std::string tables = slurp(dir / "tables.csv");
  size_t rows = 0, pos = 0;
  while ((pos = tables.find("robust_accuracy,", pos)) != std::string::npos) {
    ++rows;
    pos += 1;
  }
  CHECK(rows == 3);

  // byte-identical re-emission
  std::string first = slurp(dir / "report.json");
  std::string first_tables = slurp(dir / "tables.csv");
  emit_report(report, dir.string());
  CHECK(slurp(dir / "report.json") == first);
  CHECK(slurp(dir / "tables.csv") == first_tables);

  EvalReport bad = report;
  bad.clean_accuracy = 123.0;
  CHECK_THROWS_AS(emit_report(bad, dir.string()), Error);
  EvalReport bad2 = report;
  bad2.latency->samples = 0;
  CHECK_THROWS_AS(emit_report(bad2, dir.string()), Error);
}

TEST_CASE("apgd-rand scores the worst case over both losses") {
  Rng rng(116);
  Dataset ds = labeled_pixels(6, 4, rng);
  StubSource oracle(
      [&](const Tensor& x) {
        std::vector<double> z(4, 0.0);
        for (int k = 0; k < 4; ++k) z[size_t(k)] = -std::fabs(x[0] * 4.0 - (k + 0.5));
        return z;
      },
      4);
  AttackConfig atk;
  atk.kind = "apgd-rand";
  atk.budget.epsilon = 0.0;  // both candidates equal the clean image
  atk.budget.iterations = 2;
  atk.budget.eot_samples = 1;
  RobustResult rr = robust_accuracy(oracle, oracle, atk, ds, 9);
  CHECK(rr.percent == clean_accuracy(oracle, ds, 9));

  AttackConfig bad;
  bad.kind = "apgd-dlr";
  CHECK_THROWS_AS(bad.validate(2), Error);
  bad.kind = "nonsense";
  CHECK_THROWS_AS(bad.validate(10), Error);
}
