#pragma once

#include "purekit/autograd.hpp"
#include "purekit/tensor.hpp"

namespace purekit {

// Standard SSIM configuration: gaussian window, C1=(k1*L)^2, C2=(k2*L)^2.
// Scores are computed on [0,1]-range images with L=1 unless configured
// otherwise.
struct SsimConfig {
  int window_size = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

// Largest odd window that fits the image; images smaller than the configured
// window reduce it rather than failing.
int effective_window(const SsimConfig& cfg, int64_t h, int64_t w);

// Normalized 1-D gaussian weights.
std::vector<double> gaussian_window(int size, double sigma);

// Mean SSIM over all valid window positions and channels. Accepts (C,H,W) or
// (N,C,H,W); both images must share a shape.
double ssim(const Tensor& x, const Tensor& y, const SsimConfig& cfg = {});
ag::Var ssim(const ag::Var& x, const ag::Var& y, const SsimConfig& cfg = {});

// lambda * (1 - ssim(x,y))
double ssim_loss(const Tensor& x, const Tensor& y, double lambda,
                 const SsimConfig& cfg = {});
ag::Var ssim_loss(const ag::Var& x, const ag::Var& y, double lambda,
                  const SsimConfig& cfg = {});

// max elementwise absolute difference
double linf_dist(const Tensor& x, const Tensor& y);

}  // namespace purekit
