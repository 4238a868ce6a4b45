#include "purekit/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include "CLI11.hpp"
#include "purekit/attacks.hpp"
#include "purekit/config_json.hpp"
#include "purekit/errors.hpp"
#include "purekit/evaluation.hpp"
#include "purekit/png_io.hpp"
#include "purekit/purifier.hpp"
#include "purekit/ssim.hpp"
#include "purekit/training.hpp"

namespace fs = std::filesystem;

namespace purekit {

namespace {

constexpr uint64_t kCliAttackSalt = 0x636c69ULL;

// ------------------------------------------------------------ config handling

ordered_json default_config() {
  TrainConfig t;  // carries the reference defaults
  return ordered_json{
      {"dataset",
       {{"kind", "synthetic"},
        {"n", 512},
        {"classes", 2},
        {"size", 32},
        {"difficulty", 0.25},
        {"seed", 7},
        {"path", ""},
        {"resize", 32}}},
      {"train", train_config_to_json(t)},
      {"checkpoints",
       {{"target_classifier", ""},
        {"target_purifier", ""},
        {"shadow_classifier", ""},
        {"surrogate_purifier", ""}}},
      {"attack",
       {{"kind", "pgd"},
        {"threat", "grayA"},
        {"norm", "linf"},
        {"epsilon", 8.0 / 255.0},
        {"alpha", 2.0 / 255.0},
        {"iterations", 10},
        {"restarts", 1},
        {"eot_samples", 20},
        {"target_classes", 9},
        {"random_start", false},
        {"limit", 0}}},
      {"eval", {{"attacks", ordered_json::array()}, {"limit", 0}}},
      {"bench", {{"n", 1000}, {"warmup", 3}, {"pipeline", "purified"}, {"t_star", 10}}},
      {"purify",
       {{"inputs", ordered_json::array()},
        {"rescale_first_step", false},
        {"inference_beta", nullptr},
        {"t_star", 0}}}};
}

struct SchemaNode {
  std::map<std::string, SchemaNode> children;
  bool leaf = false;
  bool list_of_objects = false;  // children describe the element schema
};

SchemaNode leaf_node() { return SchemaNode{{}, true, false}; }

SchemaNode budget_schema() {
  SchemaNode n;
  for (const char* k : {"threat", "kind", "norm", "epsilon", "alpha", "iterations",
                        "restarts", "eot_samples", "target_classes", "random_start"}) {
    n.children[k] = leaf_node();
  }
  return n;
}

const SchemaNode& config_schema() {
  static const SchemaNode schema = [] {
    SchemaNode root;
    SchemaNode dataset;
    for (const char* k : {"kind", "n", "classes", "size", "difficulty", "seed", "path",
                          "resize"}) {
      dataset.children[k] = leaf_node();
    }
    SchemaNode train;
    for (const char* k :
         {"betas", "lambda", "learning_rate", "batch_size", "steps", "adam_beta1",
          "adam_beta2", "seed", "log_every", "r1_gamma", "augment_noise",
          "label_smoothing"}) {
      train.children[k] = leaf_node();
    }
    SchemaNode ddpm;
    for (const char* k : {"timesteps", "beta_min", "beta_max"}) ddpm.children[k] = leaf_node();
    train.children["ddpm"] = ddpm;
    SchemaNode gen;
    for (const char* k : {"image_shape", "latent_dim", "embedding_dim", "base_channels",
                          "channel_multipliers", "res_blocks_per_level",
                          "attention_resolutions"}) {
      gen.children[k] = leaf_node();
    }
    train.children["generator"] = gen;
    SchemaNode disc;
    for (const char* k : {"image_shape", "base_channels", "levels"}) {
      disc.children[k] = leaf_node();
    }
    train.children["discriminator"] = disc;
    SchemaNode cls;
    for (const char* k : {"image_shape", "class_count", "base_channels",
                          "blocks_per_stage", "stages", "use_norm", "flatten_head"}) {
      cls.children[k] = leaf_node();
    }
    train.children["classifier"] = cls;

    SchemaNode ckpts;
    for (const char* k : {"target_classifier", "target_purifier", "shadow_classifier",
                          "surrogate_purifier"}) {
      ckpts.children[k] = leaf_node();
    }
    SchemaNode attack = budget_schema();
    attack.children["limit"] = leaf_node();

    SchemaNode eval;
    SchemaNode attacks_list = budget_schema();
    attacks_list.list_of_objects = true;
    eval.children["attacks"] = attacks_list;
    eval.children["limit"] = leaf_node();

    SchemaNode bench;
    for (const char* k : {"n", "warmup", "pipeline", "t_star"}) bench.children[k] = leaf_node();
    SchemaNode purify;
    for (const char* k : {"inputs", "rescale_first_step", "inference_beta", "t_star"}) {
      purify.children[k] = leaf_node();
    }

    root.children["dataset"] = dataset;
    root.children["train"] = train;
    root.children["checkpoints"] = ckpts;
    root.children["attack"] = attack;
    root.children["eval"] = eval;
    root.children["bench"] = bench;
    root.children["purify"] = purify;
    return root;
  }();
  return schema;
}

void validate_keys(const ordered_json& j, const SchemaNode& schema, const std::string& path) {
  if (schema.list_of_objects) {
    if (!j.is_array()) throw_config("config key '" + path + "' must be an array");
    int i = 0;
    for (const auto& item : j) {
      SchemaNode element = schema;
      element.list_of_objects = false;
      validate_keys(item, element, path + "[" + std::to_string(i++) + "]");
    }
    return;
  }
  if (schema.leaf) return;
  if (!j.is_object()) throw_config("config key '" + path + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    auto it = schema.children.find(key);
    if (it == schema.children.end()) {
      throw_config("unknown config key: " + (path.empty() ? key : path + "." + key));
    }
    validate_keys(value, it->second, path.empty() ? key : path + "." + key);
  }
}

void deep_merge(ordered_json& base, const ordered_json& overlay) {
  if (!overlay.is_object() || !base.is_object()) {
    base = overlay;
    return;
  }
  for (const auto& [key, value] : overlay.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      deep_merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

void apply_override(ordered_json& cfg, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw_config("override '" + spec + "' must have the form key.path=value");
  }
  std::string path = spec.substr(0, eq);
  std::string raw = spec.substr(eq + 1);
  ordered_json value;
  try {
    value = ordered_json::parse(raw);
  } catch (const std::exception&) {
    value = raw;  // plain string
  }
  ordered_json* node = &cfg;
  size_t start = 0;
  while (true) {
    size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw_config("override '" + spec + "': empty key segment");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

struct RunContext {
  std::string workflow;
  uint64_t seed = 0;
  std::string out_dir;
  ordered_json config;
};

std::string default_out_dir(const std::string& workflow) {
  const char* root = std::getenv("PUREKIT_OUT");
  fs::path base = root && *root ? fs::path(root) : fs::path(".");
  return (base / (workflow + "_out")).string();
}

ordered_json snapshot_json(const RunContext& ctx) {
  return ordered_json{{"workflow", ctx.workflow},
                      {"seed", ctx.seed},
                      {"out", ctx.out_dir},
                      {"config", ctx.config}};
}

void write_snapshot(const RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  std::ofstream f(fs::path(ctx.out_dir) / "config_snapshot.json",
                  std::ios::trunc | std::ios::binary);
  if (!f) throw_runtime("cannot write config snapshot");
  f << snapshot_json(ctx).dump(2) << "\n";
}

// ------------------------------------------------------------------- datasets

Dataset dataset_from_config(const ordered_json& d) {
  std::string kind = d.at("kind").get<std::string>();
  if (kind == "synthetic") {
    Rng rng(d.at("seed").get<uint64_t>());
    return make_synthetic(d.at("n").get<int>(), d.at("classes").get<int>(),
                          d.at("size").get<int>(), rng, d.at("difficulty").get<double>());
  }
  if (kind == "cifar10") {
    return load_dataset(d.at("path").get<std::string>(), DatasetFormat::cifar10);
  }
  if (kind == "image_dir") {
    return load_dataset(d.at("path").get<std::string>(), DatasetFormat::image_dir_csv,
                        d.at("resize").get<int>());
  }
  throw_config("unknown dataset kind: " + kind);
}

std::shared_ptr<const PurifierCheckpoint> load_ckpt_role(const ordered_json& cfg,
                                                         const std::string& role,
                                                         bool required) {
  std::string path = cfg.at("checkpoints").at(role).get<std::string>();
  if (path.empty()) {
    if (required) throw_config("checkpoints." + role + " is required for this run");
    return nullptr;
  }
  return std::make_shared<PurifierCheckpoint>(load_checkpoint(path));
}

AttackConfig attack_config_from_json(const ordered_json& a) {
  AttackConfig cfg;
  cfg.kind = a.at("kind").get<std::string>();
  if (a.contains("norm") && a.at("norm").get<std::string>() != "linf") {
    throw_config("attack.norm: only 'linf' is supported");
  }
  cfg.budget.epsilon = a.at("epsilon").get<double>();
  cfg.budget.alpha = a.at("alpha").get<double>();
  cfg.budget.iterations = a.at("iterations").get<int>();
  cfg.budget.restarts = a.at("restarts").get<int>();
  cfg.budget.eot_samples = a.at("eot_samples").get<int>();
  cfg.budget.target_classes = a.at("target_classes").get<int>();
  cfg.random_start = a.at("random_start").get<bool>();
  return cfg;
}

// resolve image shapes and class count against the actual dataset
void adapt_train_config(ordered_json& train, const Dataset& ds) {
  if (ds.size() == 0) return;
  const Shape& s = ds.images[0].shape();
  ordered_json shape = {s[0], s[1], s[2]};
  train["generator"]["image_shape"] = shape;
  train["discriminator"]["image_shape"] = shape;
  train["classifier"]["image_shape"] = shape;
  if (ds.class_count >= 2) train["classifier"]["class_count"] = ds.class_count;
}

// ------------------------------------------------------------------ workflows

int run_train(RunContext& ctx, const std::string& mode) {
  Dataset ds = dataset_from_config(ctx.config.at("dataset"));
  adapt_train_config(ctx.config["train"], ds);
  ctx.config["train"]["seed"] = ctx.seed;
  write_snapshot(ctx);

  TrainConfig cfg = train_config_from_json(ctx.config.at("train"));
  cfg.validate(mode);
  Rng rng(ctx.seed);
  PurifierCheckpoint ckpt;
  if (mode == "lightpure") {
    ckpt = train_lightpure(UnlabeledView(ds), cfg, rng);
  } else if (mode == "single_step") {
    ckpt = train_bgan(UnlabeledView(ds), cfg, rng);
  } else if (mode == "iterative") {
    ckpt = train_ddpm_denoiser(UnlabeledView(ds), cfg, rng);
  } else if (mode == "classifier") {
    ckpt = train_classifier(ds, cfg, rng);
  } else {
    throw_config("unknown training mode: " + mode);
  }
  std::string ckpt_dir = (fs::path(ctx.out_dir) / "checkpoint").string();
  save_checkpoint(ckpt, ckpt_dir);
  write_train_log_csv(ckpt.log, (fs::path(ctx.out_dir) / "train_log.csv").string());
  std::cout << "trained mode=" << mode << " steps=" << ckpt.trained_steps
            << " params=" << [&] {
                 int64_t n = 0;
                 for (const auto& [name, net] : ckpt.nets) n += param_count(net);
                 return n;
               }()
            << " checkpoint=" << ckpt_dir << " hash=" << checkpoint_hash(ckpt) << "\n";
  return 0;
}

int run_attack(RunContext& ctx) {
  Dataset ds = dataset_from_config(ctx.config.at("dataset"));
  if (!ds.labeled()) throw_config("attack workflow requires a labeled dataset");
  write_snapshot(ctx);

  const ordered_json& a = ctx.config.at("attack");
  AttackConfig atk = attack_config_from_json(a);
  atk.validate(ds.class_count);
  ThreatKind threat = threat_kind_from_name(a.at("threat").get<std::string>());

  CheckpointRegistry reg;
  reg.target_classifier = load_ckpt_role(ctx.config, "target_classifier", true);
  reg.target_purifier = load_ckpt_role(ctx.config, "target_purifier", true);
  reg.shadow_classifier =
      load_ckpt_role(ctx.config, "shadow_classifier", threat == ThreatKind::black);
  reg.surrogate_purifier =
      load_ckpt_role(ctx.config, "surrogate_purifier", threat == ThreatKind::grayB);
  ThreatModel tm = build_threat_model(threat, reg);

  size_t limit = a.at("limit").get<size_t>();
  size_t n = limit > 0 ? std::min(ds.size(), limit) : ds.size();
  fs::path img_dir = fs::path(ctx.out_dir) / "adversarial";
  fs::create_directories(img_dir);

  ordered_json entries = ordered_json::array();
  for (size_t i = 0; i < n; ++i) {
    const Tensor& x = ds.images[i];
    int y = ds.labels[i];
    Rng rng(mix_seed(ctx.seed ^ kCliAttackSalt, i));
    Tensor adv;
    try {
      if (atk.kind == "fgsm") {
        adv = fgsm(*tm.gradient_source, x, y, atk.budget.epsilon, rng);
      } else if (atk.kind == "pgd") {
        adv = pgd(*tm.gradient_source, x, y, atk.budget, rng, LossKind::ce,
                  atk.random_start);
      } else if (atk.kind == "apgd-ce") {
        adv = apgd(*tm.gradient_source, x, y, atk.budget, LossKind::ce, rng);
      } else if (atk.kind == "apgd-dlr") {
        adv = apgd(*tm.gradient_source, x, y, atk.budget, LossKind::dlr, rng);
      } else if (atk.kind == "apgd-t") {
        adv = apgd_targeted(*tm.gradient_source, x, y, atk.budget, rng);
      } else {  // apgd-rand: keep the worst candidate against the eval target
        Tensor ce = apgd(*tm.gradient_source, x, y, atk.budget, LossKind::ce, rng);
        Tensor dlr = apgd(*tm.gradient_source, x, y, atk.budget, LossKind::dlr, rng);
        Rng eval_rng_ce(mix_seed(ctx.seed, i));
        adv = tm.eval_target->predict(ce, eval_rng_ce) != y ? ce : dlr;
      }
    } catch (const Error& e) {
      std::clog << "[purekit] attack failure on image " << i << ": " << e.what() << "\n";
      adv = x;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "adv_%05zu.png", i);
    write_png((img_dir / name).string(), adv);
    entries.push_back(ordered_json{{"index", i},
                                   {"file", std::string("adversarial/") + name},
                                   {"label", y},
                                   {"linf", linf_dist(adv, x)}});
  }
  ordered_json manifest{{"attack", atk.kind},
                        {"threat", threat_kind_name(threat)},
                        {"seed", ctx.seed},
                        {"epsilon", atk.budget.epsilon},
                        {"images", std::move(entries)}};
  std::ofstream mf(fs::path(ctx.out_dir) / "manifest.json", std::ios::trunc | std::ios::binary);
  mf << manifest.dump(2) << "\n";
  std::cout << "attacked " << n << " images -> " << img_dir.string() << "\n";
  return 0;
}

int run_eval(RunContext& ctx) {
  Dataset ds = dataset_from_config(ctx.config.at("dataset"));
  if (!ds.labeled()) throw_config("eval workflow requires a labeled dataset");
  write_snapshot(ctx);

  CheckpointRegistry reg;
  reg.target_classifier = load_ckpt_role(ctx.config, "target_classifier", true);
  reg.target_purifier = load_ckpt_role(ctx.config, "target_purifier", false);
  reg.shadow_classifier = load_ckpt_role(ctx.config, "shadow_classifier", false);
  reg.surrogate_purifier = load_ckpt_role(ctx.config, "surrogate_purifier", false);

  std::shared_ptr<GradientSource> eval_pipeline =
      reg.target_purifier ? make_purified_source(reg.target_purifier, reg.target_classifier)
                          : make_classifier_source(reg.target_classifier);

  size_t limit = ctx.config.at("eval").at("limit").get<size_t>();
  EvalReport report;
  report.seed = ctx.seed;
  report.dataset_id = ds.id;
  {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(dataset_fingerprint(ds)));
    report.dataset_fingerprint = buf;
  }
  report.checkpoint_hashes["target_classifier"] = checkpoint_hash(*reg.target_classifier);
  if (reg.target_purifier) {
    report.checkpoint_hashes["target_purifier"] = checkpoint_hash(*reg.target_purifier);
  }
  if (reg.shadow_classifier) {
    report.checkpoint_hashes["shadow_classifier"] = checkpoint_hash(*reg.shadow_classifier);
  }
  if (reg.surrogate_purifier) {
    report.checkpoint_hashes["surrogate_purifier"] =
        checkpoint_hash(*reg.surrogate_purifier);
  }

  report.clean_accuracy = clean_accuracy(*eval_pipeline, ds, ctx.seed, limit);
  for (const auto& spec : ctx.config.at("eval").at("attacks")) {
    AttackConfig atk = attack_config_from_json(spec);
    atk.validate(ds.class_count);
    ThreatKind threat = threat_kind_from_name(spec.at("threat").get<std::string>());
    ThreatModel tm = build_threat_model(threat, reg);
    std::string label = threat_kind_name(threat) + "/" + atk.kind;
    report.robust_accuracy.push_back(robust_accuracy(
        *tm.gradient_source, *tm.eval_target, atk, ds, ctx.seed, limit, label));
  }

  emit_report(report, ctx.out_dir);
  std::cout << "eval report written to " << ctx.out_dir << " (clean "
            << report.clean_accuracy << "%)\n";
  return 0;
}

int run_bench(RunContext& ctx) {
  Dataset ds = dataset_from_config(ctx.config.at("dataset"));
  write_snapshot(ctx);
  const ordered_json& b = ctx.config.at("bench");
  int n = b.at("n").get<int>();
  int warmup = b.at("warmup").get<int>();
  std::string pipeline = b.at("pipeline").get<std::string>();

  auto classifier = load_ckpt_role(ctx.config, "target_classifier", true);
  std::function<void(const Tensor&)> once;
  int invocations = 0;
  uint64_t seed = ctx.seed;
  std::shared_ptr<const PurifierCheckpoint> purifier;
  if (pipeline == "classifier") {
    once = [classifier](const Tensor& img) {
      classifier_forward(classifier->net("classifier"), classifier->config.classifier,
                         to_internal_range(img));
    };
  } else if (pipeline == "purified" || pipeline == "iterative") {
    purifier = load_ckpt_role(ctx.config, "target_purifier", true);
    if (pipeline == "purified") {
      invocations = 1;
      auto counter = std::make_shared<uint64_t>(0);
      once = [purifier, classifier, seed, counter](const Tensor& img) {
        Rng rng(mix_seed(seed, (*counter)++));
        Tensor purified = purify_oneshot(*purifier, img, rng).first;
        classifier_forward(classifier->net("classifier"), classifier->config.classifier,
                           to_internal_range(purified));
      };
    } else {
      int t_star = b.at("t_star").get<int>();
      invocations = t_star;
      auto counter = std::make_shared<uint64_t>(0);
      once = [purifier, classifier, seed, counter, t_star](const Tensor& img) {
        Rng rng(mix_seed(seed, (*counter)++));
        Tensor purified = purify_iterative(*purifier, img, t_star, rng).first;
        classifier_forward(classifier->net("classifier"), classifier->config.classifier,
                           to_internal_range(purified));
      };
    }
  } else {
    throw_config("bench.pipeline must be classifier, purified, or iterative");
  }

  LatencyStats stats = latency_benchmark(once, ds.images, n, warmup, invocations);
  ordered_json j{{"pipeline", pipeline},
                 {"mean_ms", stats.mean_ms},
                 {"std_ms", stats.std_ms},
                 {"p50_ms", stats.p50_ms},
                 {"p95_ms", stats.p95_ms},
                 {"samples", stats.samples},
                 {"generator_invocations_per_image", stats.generator_invocations_per_image}};
  std::ofstream f(fs::path(ctx.out_dir) / "bench.json", std::ios::trunc | std::ios::binary);
  f << j.dump(2) << "\n";
  std::cout << "bench " << pipeline << ": mean " << stats.mean_ms << " ms over "
            << stats.samples << " samples\n";
  return 0;
}

int run_purify(RunContext& ctx) {
  write_snapshot(ctx);
  const ordered_json& p = ctx.config.at("purify");
  auto purifier = load_ckpt_role(ctx.config, "target_purifier", true);
  std::vector<std::string> inputs = p.at("inputs").get<std::vector<std::string>>();
  if (inputs.empty()) throw_config("purify.inputs must name at least one image file");

  PurifyOptions opts;
  opts.rescale_first_step = p.at("rescale_first_step").get<bool>();
  if (!p.at("inference_beta").is_null()) {
    opts.inference_beta = p.at("inference_beta").get<double>();
  }
  int t_star = p.at("t_star").get<int>();
  if (t_star == 0 && purifier->mode == "iterative") {
    t_star = purifier->config.ddpm.timesteps;
  }

  ordered_json traces = ordered_json::array();
  for (size_t i = 0; i < inputs.size(); ++i) {
    Tensor img = read_png(inputs[i]);
    Rng rng(mix_seed(ctx.seed, i));
    std::pair<Tensor, PurifyTrace> out =
        purifier->mode == "iterative"
            ? purify_iterative(*purifier, img, t_star, rng)
            : purify_oneshot(*purifier, img, rng, opts);
    std::string out_name = fs::path(inputs[i]).stem().string() + "_purified.png";
    write_png((fs::path(ctx.out_dir) / out_name).string(), out.first);
    traces.push_back(ordered_json{{"input", inputs[i]},
                                  {"output", out_name},
                                  {"mode", out.second.mode},
                                  {"generator_invocations", out.second.generator_invocations},
                                  {"wall_seconds", out.second.wall_seconds}});
  }
  std::ofstream f(fs::path(ctx.out_dir) / "traces.json", std::ios::trunc | std::ios::binary);
  f << traces.dump(2) << "\n";
  std::cout << "purified " << inputs.size() << " image(s) -> " << ctx.out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"adversarial image purification toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode = "lightpure", threat, attack_kind;
  uint64_t seed = 0;
  int steps = -1, bench_n = -1;
  std::vector<std::string> overrides;
  bool dump_config = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "run seed");
    sub->add_option("--set", overrides, "dotted-key config overrides (key=value)");
    sub->add_flag("--dump-config", dump_config,
                  "print the resolved config snapshot and exit");
  };

  CLI::App* train = app.add_subcommand("train", "train a purifier or classifier");
  add_common(train);
  train->add_option("--mode", mode, "lightpure|single_step|iterative|classifier");
  train->add_option("--steps", steps, "override train.steps");

  CLI::App* attack = app.add_subcommand("attack", "craft adversarial examples");
  add_common(attack);
  attack->add_option("--threat", threat, "black|grayA|grayB|white");
  attack->add_option("--attack", attack_kind,
                     "fgsm|pgd|apgd-ce|apgd-dlr|apgd-rand|apgd-t");

  CLI::App* eval = app.add_subcommand("eval", "clean/robust accuracy report");
  add_common(eval);

  CLI::App* bench = app.add_subcommand("bench", "per-image latency benchmark");
  add_common(bench);
  bench->add_option("--n", bench_n, "sample count");

  CLI::App* purify = app.add_subcommand("purify", "purify image files");
  add_common(purify);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunContext ctx;
    ctx.seed = seed;
    ctx.config = default_config();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw_config("cannot open config file: " + config_path);
      ordered_json file_cfg;
      try {
        f >> file_cfg;
      } catch (const std::exception& e) {
        throw_config("config file " + config_path + ": invalid JSON: " + e.what());
      }
      validate_keys(file_cfg, config_schema(), "");
      deep_merge(ctx.config, file_cfg);
    }
    CLI::App* sub = app.get_subcommands().front();
    ctx.workflow = sub->get_name();
    if (sub == train && steps >= 0) ctx.config["train"]["steps"] = steps;
    if (sub == attack && !threat.empty()) ctx.config["attack"]["threat"] = threat;
    if (sub == attack && !attack_kind.empty()) ctx.config["attack"]["kind"] = attack_kind;
    if (sub == bench && bench_n >= 0) ctx.config["bench"]["n"] = bench_n;
    for (const std::string& o : overrides) apply_override(ctx.config, o);
    validate_keys(ctx.config, config_schema(), "");
    ctx.out_dir = out_dir.empty() ? default_out_dir(ctx.workflow) : out_dir;

    if (sub == train) ctx.config["train"]["seed"] = ctx.seed;
    if (dump_config) {
      std::cout << snapshot_json(ctx).dump(2) << "\n";
      return 0;
    }
    if (sub == train) return run_train(ctx, mode);
    if (sub == attack) return run_attack(ctx);
    if (sub == eval) return run_eval(ctx);
    if (sub == bench) return run_bench(ctx);
    if (sub == purify) return run_purify(ctx);
    throw_config("unknown workflow");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::config ? 3 : 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace purekit
