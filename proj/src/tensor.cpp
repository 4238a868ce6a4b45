#include "purekit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "purekit/errors.hpp"

namespace purekit {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (int64_t d : shape_) {
    if (d < 0) throw_parameter("tensor dimension must be nonnegative");
  }
  data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
    throw_parameter("tensor data size does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

double& Tensor::at(int64_t a, int64_t b) {
  return data_[static_cast<size_t>(a * shape_[1] + b)];
}
double Tensor::at(int64_t a, int64_t b) const {
  return data_[static_cast<size_t>(a * shape_[1] + b)];
}
double& Tensor::at(int64_t a, int64_t b, int64_t c) {
  return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
}
double Tensor::at(int64_t a, int64_t b, int64_t c) const {
  return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
}
double& Tensor::at(int64_t a, int64_t b, int64_t c, int64_t d) {
  return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
}
double Tensor::at(int64_t a, int64_t b, int64_t c, int64_t d) const {
  return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
}

double Tensor::item() const {
  if (numel() != 1) throw_parameter("item() on tensor with numel != 1");
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw_parameter("reshape to incompatible shape " + shape_str(new_shape));
  }
  return Tensor(std::move(new_shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw_parameter(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                    " vs " + shape_str(b.shape()));
  }
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor scaled(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
  return out;
}

Tensor affine_combine(const Tensor& a, double sa, const Tensor& b, double sb) {
  check_same_shape(a, b, "affine_combine");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * sa + b[i] * sb;
  return out;
}

Tensor clamped(const Tensor& a, double lo, double hi) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = std::clamp(a[i], lo, hi);
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double mean_value(const Tensor& a) {
  if (a.numel() == 0) throw_parameter("mean of empty tensor");
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a[i];
  return s / static_cast<double>(a.numel());
}

}  // namespace purekit
