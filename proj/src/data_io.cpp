#include "purekit/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "purekit/config_json.hpp"
#include "purekit/errors.hpp"
#include "purekit/png_io.hpp"

namespace fs = std::filesystem;

namespace purekit {

// ------------------------------------------------------------- config <-> json

ordered_json generator_to_json(const GeneratorConfig& cfg) {
  return ordered_json{{"image_shape", cfg.image_shape},
                      {"latent_dim", cfg.latent_dim},
                      {"embedding_dim", cfg.embedding_dim},
                      {"base_channels", cfg.base_channels},
                      {"channel_multipliers", cfg.channel_multipliers},
                      {"res_blocks_per_level", cfg.res_blocks_per_level},
                      {"attention_resolutions", cfg.attention_resolutions}};
}

GeneratorConfig generator_from_json(const ordered_json& j) {
  GeneratorConfig cfg;
  auto shape = j.at("image_shape").get<std::vector<int64_t>>();
  if (shape.size() != 3) throw_parse("image_shape must have 3 entries");
  std::copy(shape.begin(), shape.end(), cfg.image_shape.begin());
  cfg.latent_dim = j.at("latent_dim").get<int>();
  cfg.embedding_dim = j.at("embedding_dim").get<int>();
  cfg.base_channels = j.at("base_channels").get<int>();
  cfg.channel_multipliers = j.at("channel_multipliers").get<std::vector<int>>();
  cfg.res_blocks_per_level = j.at("res_blocks_per_level").get<int>();
  cfg.attention_resolutions = j.at("attention_resolutions").get<std::vector<int>>();
  return cfg;
}

ordered_json discriminator_to_json(const DiscriminatorConfig& cfg) {
  return ordered_json{{"image_shape", cfg.image_shape},
                      {"base_channels", cfg.base_channels},
                      {"levels", cfg.levels}};
}

DiscriminatorConfig discriminator_from_json(const ordered_json& j) {
  DiscriminatorConfig cfg;
  auto shape = j.at("image_shape").get<std::vector<int64_t>>();
  if (shape.size() != 3) throw_parse("image_shape must have 3 entries");
  std::copy(shape.begin(), shape.end(), cfg.image_shape.begin());
  cfg.base_channels = j.at("base_channels").get<int>();
  cfg.levels = j.at("levels").get<int>();
  return cfg;
}

ordered_json classifier_to_json(const ClassifierConfig& cfg) {
  return ordered_json{{"image_shape", cfg.image_shape},
                      {"class_count", cfg.class_count},
                      {"base_channels", cfg.base_channels},
                      {"blocks_per_stage", cfg.blocks_per_stage},
                      {"stages", cfg.stages},
                      {"use_norm", cfg.use_norm},
                      {"flatten_head", cfg.flatten_head}};
}

ClassifierConfig classifier_from_json(const ordered_json& j) {
  ClassifierConfig cfg;
  auto shape = j.at("image_shape").get<std::vector<int64_t>>();
  if (shape.size() != 3) throw_parse("image_shape must have 3 entries");
  std::copy(shape.begin(), shape.end(), cfg.image_shape.begin());
  cfg.class_count = j.at("class_count").get<int>();
  cfg.base_channels = j.at("base_channels").get<int>();
  cfg.blocks_per_stage = j.at("blocks_per_stage").get<int>();
  cfg.stages = j.at("stages").get<int>();
  cfg.use_norm = j.at("use_norm").get<bool>();
  cfg.flatten_head = j.at("flatten_head").get<bool>();
  return cfg;
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
  return ordered_json{
      {"betas", cfg.betas},
      {"lambda", cfg.lambda},
      {"learning_rate", cfg.learning_rate},
      {"batch_size", cfg.batch_size},
      {"steps", cfg.steps},
      {"adam_beta1", cfg.adam_beta1},
      {"adam_beta2", cfg.adam_beta2},
      {"seed", cfg.seed},
      {"log_every", cfg.log_every},
      {"r1_gamma", cfg.r1_gamma},
      {"augment_noise", cfg.augment_noise},
      {"label_smoothing", cfg.label_smoothing},
      {"ddpm",
       {{"timesteps", cfg.ddpm.timesteps},
        {"beta_min", cfg.ddpm.beta_min},
        {"beta_max", cfg.ddpm.beta_max}}},
      {"generator", generator_to_json(cfg.generator)},
      {"discriminator", discriminator_to_json(cfg.discriminator)},
      {"classifier", classifier_to_json(cfg.classifier)}};
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig cfg;
  cfg.betas = j.at("betas").get<std::vector<double>>();
  cfg.lambda = j.at("lambda").get<double>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.steps = j.at("steps").get<int>();
  cfg.adam_beta1 = j.at("adam_beta1").get<double>();
  cfg.adam_beta2 = j.at("adam_beta2").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.log_every = j.at("log_every").get<int>();
  cfg.r1_gamma = j.at("r1_gamma").get<double>();
  cfg.augment_noise = j.at("augment_noise").get<double>();
  cfg.label_smoothing = j.at("label_smoothing").get<double>();
  const auto& d = j.at("ddpm");
  cfg.ddpm.timesteps = d.at("timesteps").get<int>();
  cfg.ddpm.beta_min = d.at("beta_min").get<double>();
  cfg.ddpm.beta_max = d.at("beta_max").get<double>();
  cfg.generator = generator_from_json(j.at("generator"));
  cfg.discriminator = discriminator_from_json(j.at("discriminator"));
  cfg.classifier = classifier_from_json(j.at("classifier"));
  return cfg;
}

// --------------------------------------------------------------- range mapping

Tensor to_internal_range(const Tensor& x01) {
  Tensor out(x01.shape());
  for (int64_t i = 0; i < x01.numel(); ++i) out[i] = 2.0 * x01[i] - 1.0;
  return out;
}

Tensor to_external_range(const Tensor& xpm1) {
  Tensor out(xpm1.shape());
  for (int64_t i = 0; i < xpm1.numel(); ++i) out[i] = (xpm1[i] + 1.0) / 2.0;
  return out;
}

// -------------------------------------------------------------------- loading

Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w) {
  if (image.rank() != 3) throw_parameter("resize expects (C,H,W)");
  int64_t c = image.size(0), h = image.size(1), w = image.size(2);
  if (h == out_h && w == out_w) return image;
  Tensor out({c, out_h, out_w});
  double sy = static_cast<double>(h) / out_h;
  double sx = static_cast<double>(w) / out_w;
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t r = 0; r < out_h; ++r) {
      double fy = (r + 0.5) * sy - 0.5;
      int64_t y0 = static_cast<int64_t>(std::floor(fy));
      double wy = fy - y0;
      int64_t y1 = std::min(y0 + 1, h - 1);
      y0 = std::max<int64_t>(y0, 0);
      for (int64_t col = 0; col < out_w; ++col) {
        double fx = (col + 0.5) * sx - 0.5;
        int64_t x0 = static_cast<int64_t>(std::floor(fx));
        double wx = fx - x0;
        int64_t x1 = std::min(x0 + 1, w - 1);
        x0 = std::max<int64_t>(x0, 0);
        double top = image.at(ch, y0, x0) * (1 - wx) + image.at(ch, y0, x1) * wx;
        double bot = image.at(ch, y1, x0) * (1 - wx) + image.at(ch, y1, x1) * wx;
        out.at(ch, r, col) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

namespace {

Dataset load_image_dir_csv(const std::string& dir, int resize_to) {
  fs::path csv_path = fs::path(dir) / "labels.csv";
  std::ifstream csv(csv_path);
  if (!csv) throw_parse("cannot open labels file: " + csv_path.string());
  std::string line;
  if (!std::getline(csv, line) || (line != "filename,label" && line != "filename,label\r")) {
    throw_parse(csv_path.string() + ": expected header 'filename,label'");
  }
  Dataset ds;
  int max_label = -1;
  int row = 1;
  while (std::getline(csv, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw_parse(csv_path.string() + ": row " + std::to_string(row) + ": missing comma");
    }
    std::string fname = line.substr(0, comma);
    int label;
    try {
      label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw_parse(csv_path.string() + ": row " + std::to_string(row) + ": bad label");
    }
    if (label < 0) {
      throw_parameter(csv_path.string() + ": row " + std::to_string(row) +
                      ": label out of range");
    }
    fs::path img_path = fs::path(dir) / fname;
    if (!fs::exists(img_path)) {
      throw_parse(csv_path.string() + ": row " + std::to_string(row) + ": image file '" +
                  fname + "' not found");
    }
    Tensor img = read_png(img_path.string());
    if (img.size(1) != resize_to || img.size(2) != resize_to) {
      img = resize_bilinear(img, resize_to, resize_to);
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  ds.class_count = max_label + 1;
  ds.id = "image_dir(" + dir + ")";
  return ds;
}

Dataset load_cifar10(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_parse("cannot open CIFAR-10 batch: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  constexpr size_t kRecord = 3073;  // 1 label byte + 3*1024 pixel bytes
  if (bytes.empty() || bytes.size() % kRecord != 0) {
    throw_parse(path + ": size " + std::to_string(bytes.size()) +
                " is not a multiple of the 3073-byte record (offset " +
                std::to_string(bytes.size() % kRecord) + " trailing)");
  }
  Dataset ds;
  ds.class_count = 10;
  size_t n = bytes.size() / kRecord;
  for (size_t i = 0; i < n; ++i) {
    const unsigned char* rec =
        reinterpret_cast<const unsigned char*>(bytes.data()) + i * kRecord;
    int label = rec[0];
    if (label > 9) {
      throw_parameter(path + ": record " + std::to_string(i) + ": label out of range");
    }
    Tensor img({3, 32, 32});
    for (int64_t j = 0; j < 3072; ++j) img[j] = rec[1 + j] / 255.0;
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  ds.id = "cifar10(" + path + ")";
  return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path, DatasetFormat format, int resize_to) {
  switch (format) {
    case DatasetFormat::image_dir_csv:
      return load_image_dir_csv(path, resize_to);
    case DatasetFormat::cifar10:
      return load_cifar10(path);
  }
  throw_parameter("unknown dataset format");
}

// ------------------------------------------------------------------- synthetic

namespace {

struct Rgb {
  double r, g, b;
};

constexpr Rgb kPalette[10] = {
    {0.85, 0.25, 0.22}, {0.22, 0.78, 0.30}, {0.25, 0.38, 0.88}, {0.90, 0.84, 0.25},
    {0.80, 0.28, 0.78}, {0.25, 0.78, 0.80}, {0.92, 0.55, 0.20}, {0.55, 0.30, 0.80},
    {0.88, 0.88, 0.85}, {0.30, 0.55, 0.45}};

// signed distance to the class shape; negative inside
double shape_sdf(int kind, double dx, double dy, double radius) {
  double ax = std::fabs(dx), ay = std::fabs(dy);
  switch (kind % 6) {
    case 0:  // disk
      return std::hypot(dx, dy) - radius;
    case 1:  // filled square
      return std::max(ax, ay) - radius;
    case 2: {  // ring
      double d = std::hypot(dx, dy);
      return std::max(d - radius, 0.55 * radius - d);
    }
    case 3: {  // cross
      double bar_w = 0.35 * radius;
      double h_bar = std::max(ax - radius, ay - bar_w);
      double v_bar = std::max(ax - bar_w, ay - radius);
      return std::min(h_bar, v_bar);
    }
    case 4:  // diamond
      return (ax + ay) - 1.2 * radius;
    default: {  // horizontal bar
      return std::max(ax - radius, ay - 0.45 * radius);
    }
  }
}

}  // namespace

Dataset make_synthetic(int n, int classes, int size, Rng& rng, double difficulty) {
  if (size < 8) throw_parameter("make_synthetic: size too small to render (< 8)");
  if (classes < 2) throw_parameter("make_synthetic: need at least 2 classes");
  if (n < classes) throw_parameter("make_synthetic: need n >= classes");
  difficulty = std::clamp(difficulty, 0.0, 1.0);

  double pos_jitter = (0.06 + 0.14 * difficulty) * size;
  double color_jitter = 0.04 + 0.16 * difficulty;
  double noise_sigma = 0.01 + 0.07 * difficulty;
  double max_rot = 0.5 * difficulty;  // radians; shapes lose axis alignment
  // Low-amplitude class-keyed interior texture. It is the sample's most
  // linearly separable cue but sits within the reach of small L-inf budgets,
  // while the shape geometry stays robust; the two are class-coupled.
  double tex_amp = 0.025;
  double aa = 1.2;

  Dataset ds;
  ds.class_count = classes;
  for (int i = 0; i < n; ++i) {
    int label = i % classes;
    const Rgb& base = kPalette[label % 10];
    double cx = size / 2.0 + rng.uniform(-pos_jitter, pos_jitter);
    double cy = size / 2.0 + rng.uniform(-pos_jitter, pos_jitter);
    double radius = size * (0.30 + 0.06 * rng.uniform(-1.0, 1.0));
    double angle = rng.uniform(-max_rot, max_rot);
    double cos_a = std::cos(angle), sin_a = std::sin(angle);
    double tex_sign = (label % 2 == 0) ? 1.0 : -1.0;
    Rgb fg{std::clamp(base.r + rng.uniform(-color_jitter, color_jitter), 0.0, 1.0),
           std::clamp(base.g + rng.uniform(-color_jitter, color_jitter), 0.0, 1.0),
           std::clamp(base.b + rng.uniform(-color_jitter, color_jitter), 0.0, 1.0)};
    double bg = 0.12 + 0.06 * rng.uniform(0.0, 1.0);

    Tensor img({3, size, size});
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        double dx = c + 0.5 - cx, dy = r + 0.5 - cy;
        double rx = cos_a * dx - sin_a * dy;
        double ry = sin_a * dx + cos_a * dy;
        double sdf = shape_sdf(label, rx, ry, radius);
        double alpha = std::clamp(0.5 - sdf / aa, 0.0, 1.0);
        double checker = ((r / 2 + c / 2) % 2 == 0) ? 1.0 : -1.0;
        double tex = tex_amp * tex_sign * checker * alpha;
        double px[3] = {bg * (1 - alpha) + fg.r * alpha, bg * (1 - alpha) + fg.g * alpha,
                        bg * (1 - alpha) + fg.b * alpha};
        for (int ch = 0; ch < 3; ++ch) {
          double v = px[ch] + tex + noise_sigma * rng.normal();
          img.at(ch, r, c) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }

  // balanced by construction; randomize presentation order
  std::vector<size_t> order(ds.images.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  Dataset shuffled;
  shuffled.class_count = classes;
  std::ostringstream id;
  id << "synthetic(n=" << n << ",classes=" << classes << ",size=" << size
     << ",difficulty=" << difficulty << ")";
  shuffled.id = id.str();
  for (size_t i : order) {
    shuffled.images.push_back(std::move(ds.images[i]));
    shuffled.labels.push_back(ds.labels[i]);
  }
  return shuffled;
}

// ------------------------------------------------------------------ checkpoint

const ParameterSet& PurifierCheckpoint::net(const std::string& name) const {
  auto it = nets.find(name);
  if (it == nets.end()) {
    throw_capability("checkpoint (mode=" + mode + ") has no '" + name + "' network");
  }
  return it->second;
}

bool is_purifier_mode(const std::string& mode) {
  return mode == "lightpure" || mode == "single_step" || mode == "iterative";
}

namespace {

bool valid_mode(const std::string& mode) {
  return is_purifier_mode(mode) || mode == "classifier";
}

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 14695981039346656037ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

struct SerializedCheckpoint {
  std::string manifest;
  std::vector<float> blob;
};

SerializedCheckpoint serialize_checkpoint(const PurifierCheckpoint& ckpt) {
  if (!valid_mode(ckpt.mode)) throw_parameter("unknown checkpoint mode: " + ckpt.mode);
  SerializedCheckpoint out;
  ordered_json tensors = ordered_json::array();
  int64_t offset = 0;
  for (const auto& [net_name, params] : ckpt.nets) {
    for (const auto& [param_name, tensor] : params) {
      ordered_json entry{{"name", net_name + "." + param_name},
                         {"shape", tensor.shape()},
                         {"dtype", "f32"},
                         {"offset", offset},
                         {"count", tensor.numel()}};
      tensors.push_back(std::move(entry));
      for (int64_t i = 0; i < tensor.numel(); ++i) {
        out.blob.push_back(static_cast<float>(tensor[i]));
      }
      offset += tensor.numel();
    }
  }
  ordered_json log = ordered_json::array();
  for (const auto& rec : ckpt.log) {
    log.push_back({rec.step, rec.d_loss, rec.g_adv, rec.ssim_term});
  }
  ordered_json manifest{{"format_version", PurifierCheckpoint::kFormatVersion},
                        {"mode", ckpt.mode},
                        {"trained_steps", ckpt.trained_steps},
                        {"config", train_config_to_json(ckpt.config)},
                        {"log", std::move(log)},
                        {"tensors", std::move(tensors)}};
  out.manifest = manifest.dump(2);
  out.manifest.push_back('\n');
  return out;
}

void atomic_write(const fs::path& path, const void* data, size_t len) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw_runtime("cannot open for writing: " + tmp.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!f) throw_runtime("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

void save_checkpoint(const PurifierCheckpoint& ckpt, const std::string& dir) {
  SerializedCheckpoint s = serialize_checkpoint(ckpt);
  fs::create_directories(dir);
  atomic_write(fs::path(dir) / "tensors.bin", s.blob.data(), s.blob.size() * sizeof(float));
  atomic_write(fs::path(dir) / "manifest.json", s.manifest.data(), s.manifest.size());
}

PurifierCheckpoint load_checkpoint(const std::string& dir) {
  fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream mf(mpath);
  if (!mf) throw_parse("cannot open checkpoint manifest: " + mpath.string());
  ordered_json manifest;
  try {
    mf >> manifest;
  } catch (const std::exception& e) {
    throw_parse(mpath.string() + ": invalid JSON: " + e.what());
  }

  PurifierCheckpoint ckpt;
  try {
    int version = manifest.at("format_version").get<int>();
    if (version != PurifierCheckpoint::kFormatVersion) {
      throw_integrity("unsupported checkpoint format version " + std::to_string(version));
    }
    ckpt.mode = manifest.at("mode").get<std::string>();
    if (!valid_mode(ckpt.mode)) throw_integrity("unknown checkpoint mode: " + ckpt.mode);
    ckpt.trained_steps = manifest.at("trained_steps").get<int>();
    ckpt.config = train_config_from_json(manifest.at("config"));
    for (const auto& rec : manifest.at("log")) {
      TrainLogRecord r;
      r.step = rec.at(0).get<int>();
      r.d_loss = rec.at(1).get<double>();
      r.g_adv = rec.at(2).get<double>();
      r.ssim_term = rec.at(3).get<double>();
      ckpt.log.push_back(r);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw_parse(mpath.string() + ": bad manifest: " + e.what());
  }

  fs::path bpath = fs::path(dir) / "tensors.bin";
  std::ifstream bf(bpath, std::ios::binary);
  if (!bf) throw_integrity("missing tensor payload: " + bpath.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bf)),
                          std::istreambuf_iterator<char>());

  int64_t expected_total = 0;
  for (const auto& entry : manifest.at("tensors")) {
    std::string full_name = entry.at("name").get<std::string>();
    Shape shape = entry.at("shape").get<Shape>();
    int64_t offset = entry.at("offset").get<int64_t>();
    int64_t count = entry.at("count").get<int64_t>();
    if (entry.at("dtype").get<std::string>() != "f32") {
      throw_integrity("tensor '" + full_name + "': unsupported dtype");
    }
    if (shape_numel(shape) != count) {
      throw_integrity("tensor '" + full_name + "': shape/count mismatch");
    }
    if ((offset + count) * static_cast<int64_t>(sizeof(float)) >
        static_cast<int64_t>(bytes.size())) {
      throw_integrity("tensor '" + full_name + "': payload truncated");
    }
    auto dot = full_name.find('.');
    if (dot == std::string::npos) throw_integrity("tensor '" + full_name + "': bad name");
    std::string net_name = full_name.substr(0, dot);
    std::string param_name = full_name.substr(dot + 1);
    Tensor t(shape);
    const float* src = reinterpret_cast<const float*>(bytes.data()) + offset;
    for (int64_t i = 0; i < count; ++i) t[i] = static_cast<double>(src[i]);
    if (!ckpt.nets[net_name].emplace(param_name, std::move(t)).second) {
      throw_integrity("tensor '" + full_name + "': duplicate entry");
    }
    expected_total += count;
  }
  if (expected_total * static_cast<int64_t>(sizeof(float)) !=
      static_cast<int64_t>(bytes.size())) {
    throw_integrity("tensor payload size mismatch: manifest expects " +
                    std::to_string(expected_total * sizeof(float)) + " bytes, file has " +
                    std::to_string(bytes.size()));
  }
  return ckpt;
}

std::string checkpoint_hash(const PurifierCheckpoint& ckpt) {
  SerializedCheckpoint s = serialize_checkpoint(ckpt);
  uint64_t h = fnv1a(s.manifest.data(), s.manifest.size());
  h = fnv1a(s.blob.data(), s.blob.size() * sizeof(float), h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

uint64_t dataset_fingerprint(const Dataset& ds) {
  uint64_t h = 14695981039346656037ULL;
  for (const Tensor& img : ds.images) {
    std::vector<float> f(static_cast<size_t>(img.numel()));
    for (int64_t i = 0; i < img.numel(); ++i) f[static_cast<size_t>(i)] = static_cast<float>(img[i]);
    h = fnv1a(f.data(), f.size() * sizeof(float), h);
  }
  if (!ds.labels.empty()) {
    h = fnv1a(ds.labels.data(), ds.labels.size() * sizeof(int), h);
  }
  return h;
}

void write_train_log_csv(const std::vector<TrainLogRecord>& log, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_runtime("cannot open training log for writing: " + path);
  f << "step,d_loss,g_adv,ssim_term,seconds\n";
  f.precision(17);
  for (const auto& r : log) {
    f << r.step << "," << r.d_loss << "," << r.g_adv << "," << r.ssim_term << ","
      << r.seconds << "\n";
  }
}

}  // namespace purekit
