#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace purekit {

using Shape = std::vector<int64_t>;

// Dense row-major tensor of doubles. All numerical state in the project lives
// in these; float32 only appears at the checkpoint serialization boundary.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size(int dim) const { return shape_[static_cast<size_t>(dim)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Row-major multi-index accessors for the common ranks.
  double& at(int64_t a, int64_t b);
  double at(int64_t a, int64_t b) const;
  double& at(int64_t a, int64_t b, int64_t c);
  double at(int64_t a, int64_t b, int64_t c) const;
  double& at(int64_t a, int64_t b, int64_t c, int64_t d);
  double at(int64_t a, int64_t b, int64_t c, int64_t d) const;

  double item() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  Tensor reshaped(Shape new_shape) const;

  void fill(double v);

 private:
  Shape shape_;
  std::vector<double> data_;
};

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Allocating elementwise helpers used by the non-autograd math paths.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double s);
// a*sa + b*sb, shapes must match.
Tensor affine_combine(const Tensor& a, double sa, const Tensor& b, double sb);
Tensor clamped(const Tensor& a, double lo, double hi);

double max_abs_diff(const Tensor& a, const Tensor& b);
double mean_value(const Tensor& a);

}  // namespace purekit
