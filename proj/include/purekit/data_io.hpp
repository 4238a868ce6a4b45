#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "purekit/networks.hpp"
#include "purekit/rng.hpp"
#include "purekit/tensor.hpp"
#include "purekit/train_config.hpp"

namespace purekit {

struct Dataset {
  std::vector<Tensor> images;  // (C,H,W), values in [0,1]
  std::vector<int> labels;     // empty when unlabeled
  int class_count = 0;
  std::string split;
  std::string id;  // provenance tag for reports

  bool labeled() const { return !labels.empty(); }
  size_t size() const { return images.size(); }
};

// Label-free view handed to purifier trainers; the training path cannot read
// labels through it.
class UnlabeledView {
 public:
  explicit UnlabeledView(const Dataset& ds) : images_(&ds.images) {}
  explicit UnlabeledView(const std::vector<Tensor>& images) : images_(&images) {}
  size_t size() const { return images_->size(); }
  const Tensor& operator[](size_t i) const { return (*images_)[i]; }

 private:
  const std::vector<Tensor>* images_;
};

enum class DatasetFormat { image_dir_csv, cifar10 };

// image_dir_csv: directory containing labels.csv (header "filename,label") and
// the referenced PNG files; images are resized to `resize_to` when needed.
// cifar10: a binary batch file of 3073-byte records (1 label + 3072 pixels,
// channel-planar).
Dataset load_dataset(const std::string& path, DatasetFormat format, int resize_to = 32);

// Parametric shape dataset: class-determined geometry and color, randomized
// pose and noise. `difficulty` in [0,1] widens pose/color jitter and noise.
Dataset make_synthetic(int n, int classes, int size, Rng& rng, double difficulty = 0.25);

Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w);

// [0,1] <-> [-1,1] pixel range conversion (exact inverses)
Tensor to_internal_range(const Tensor& x01);
Tensor to_external_range(const Tensor& xpm1);

// ------------------------------------------------------------------ checkpoint

// Persisted artifact: JSON manifest plus one raw blob of concatenated
// row-major little-endian float32 tensors with per-tensor offsets.
struct PurifierCheckpoint {
  static constexpr int kFormatVersion = 1;
  std::string mode;  // lightpure | single_step | iterative | classifier
  TrainConfig config;
  int trained_steps = 0;
  std::map<std::string, ParameterSet> nets;  // generator/discriminator/denoiser/classifier
  std::vector<TrainLogRecord> log;

  const ParameterSet& net(const std::string& name) const;
};

bool is_purifier_mode(const std::string& mode);

// `dir` is a directory; writes manifest.json and tensors.bin atomically
// (temp file + rename).
void save_checkpoint(const PurifierCheckpoint& ckpt, const std::string& dir);
PurifierCheckpoint load_checkpoint(const std::string& dir);

// FNV-1a over the canonical serialized form; stable across save/load cycles.
std::string checkpoint_hash(const PurifierCheckpoint& ckpt);
uint64_t dataset_fingerprint(const Dataset& ds);

void write_train_log_csv(const std::vector<TrainLogRecord>& log, const std::string& path);

}  // namespace purekit
