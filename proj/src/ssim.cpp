#include "purekit/ssim.hpp"

#include <cmath>

#include "purekit/errors.hpp"

namespace purekit {

int effective_window(const SsimConfig& cfg, int64_t h, int64_t w) {
  if (cfg.window_size < 1 || cfg.window_size % 2 == 0) {
    throw_parameter("ssim window size must be a positive odd integer");
  }
  int64_t m = std::min({static_cast<int64_t>(cfg.window_size), h, w});
  if (m < 1) throw_parameter("ssim: image too small");
  if (m % 2 == 0) --m;
  return static_cast<int>(m);
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size));
  double half = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    double d = i - half;
    w[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[static_cast<size_t>(i)];
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

ag::Var lift_nchw(const ag::Var& x) {
  if (x->value.rank() == 3) {
    Shape s = x->value.shape();
    return ag::reshape(x, {1, s[0], s[1], s[2]});
  }
  if (x->value.rank() == 4) return x;
  throw_parameter("ssim expects (C,H,W) or (N,C,H,W) images");
}

// depthwise smoothing with the 2-D gaussian window, valid positions only
ag::Var smooth(const ag::Var& x, const ag::Var& kernel, int64_t channels) {
  (void)channels;
  return ag::conv2d(x, kernel, nullptr, /*stride=*/1, /*pad=*/0,
                    /*groups=*/static_cast<int>(x->value.size(1)));
}

}  // namespace

ag::Var ssim(const ag::Var& x_in, const ag::Var& y_in, const SsimConfig& cfg) {
  if (!x_in->value.same_shape(y_in->value)) {
    throw_parameter("ssim: image shapes differ");
  }
  ag::Var x = lift_nchw(x_in);
  ag::Var y = lift_nchw(y_in);
  int64_t c = x->value.size(1), h = x->value.size(2), w = x->value.size(3);
  int k = effective_window(cfg, h, w);
  std::vector<double> g1 = gaussian_window(k, cfg.sigma);
  Tensor kern({c, 1, k, k});
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        kern.at(ch, 0, i, j) = g1[static_cast<size_t>(i)] * g1[static_cast<size_t>(j)];
      }
    }
  }
  ag::Var kv = ag::constant(std::move(kern));

  ag::Var mu_x = smooth(x, kv, c);
  ag::Var mu_y = smooth(y, kv, c);
  ag::Var mu_xx = ag::mul(mu_x, mu_x);
  ag::Var mu_yy = ag::mul(mu_y, mu_y);
  ag::Var mu_xy = ag::mul(mu_x, mu_y);
  ag::Var sxx = ag::sub(smooth(ag::mul(x, x), kv, c), mu_xx);
  ag::Var syy = ag::sub(smooth(ag::mul(y, y), kv, c), mu_yy);
  ag::Var sxy = ag::sub(smooth(ag::mul(x, y), kv, c), mu_xy);

  double c1 = cfg.c1(), c2 = cfg.c2();
  ag::Var num = ag::mul(ag::add_scalar(ag::mul_scalar(mu_xy, 2.0), c1),
                        ag::add_scalar(ag::mul_scalar(sxy, 2.0), c2));
  ag::Var den = ag::mul(ag::add_scalar(ag::add(mu_xx, mu_yy), c1),
                        ag::add_scalar(ag::add(sxx, syy), c2));
  return ag::mean(ag::div(num, den));
}

double ssim(const Tensor& x, const Tensor& y, const SsimConfig& cfg) {
  return ssim(ag::constant(x), ag::constant(y), cfg)->value.item();
}

ag::Var ssim_loss(const ag::Var& x, const ag::Var& y, double lambda,
                  const SsimConfig& cfg) {
  if (lambda < 0.0) throw_parameter("ssim_loss: lambda must be nonnegative");
  return ag::mul_scalar(ag::add_scalar(ag::mul_scalar(ssim(x, y, cfg), -1.0), 1.0),
                        lambda);
}

double ssim_loss(const Tensor& x, const Tensor& y, double lambda,
                 const SsimConfig& cfg) {
  return ssim_loss(ag::constant(x), ag::constant(y), lambda, cfg)->value.item();
}

double linf_dist(const Tensor& x, const Tensor& y) {
  if (!x.same_shape(y)) throw_parameter("linf_dist: shape mismatch");
  return max_abs_diff(x, y);
}

}  // namespace purekit
