#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "purekit/tensor.hpp"

namespace purekit::ag {

// Define-by-run reverse-mode autodiff over Tensor. Each op allocates a Node
// holding the forward value and a closure that scatters the upstream gradient
// into its inputs. backward() walks the graph once in reverse topological
// order. Everything is double precision, which is what the finite-difference
// checks in the test suite rely on.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<Var> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_ref();  // zeros-of-value-shape on first touch
};

Var constant(Tensor value);
Var leaf(Tensor value);  // requires_grad = true

// Accumulates into the grads of every reachable leaf. `root` must be scalar.
void backward(const Var& root);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double c);
Var mul_scalar(const Var& a, double c);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh_op(const Var& a);
Var sigmoid(const Var& a);
Var log_op(const Var& a);
// clamp with zero gradient outside [lo, hi]
Var clamp(const Var& a, double lo, double hi);

// ---- reductions ----
Var sum(const Var& a);
Var mean(const Var& a);
Var mse(const Var& a, const Var& b);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);              // (m,k)x(k,n)
Var add_rowvec(const Var& x, const Var& b);          // (N,M)+(M,)
Var linear(const Var& x, const Var& w, const Var& b);  // x*w + b
Var bmm(const Var& a, const Var& b);                 // (B,m,k)x(B,k,n)
Var transpose_last2(const Var& a);                   // (B,m,n)->(B,n,m)
Var reshape(const Var& a, Shape shape);
Var slice_cols(const Var& x, int64_t start, int64_t len);  // (N,M)->(N,len)
Var select_row(const Var& x, int64_t row);                 // (T,E)->(1,E)
Var repeat_rows(const Var& x, int64_t n);                  // (1,E)->(n,E)
Var softmax_lastdim(const Var& a);

// ---- image ops (NCHW) ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad,
           int groups = 1);
Var upsample_nearest2x(const Var& x);
Var global_avg_pool(const Var& x);                     // (N,C,H,W)->(N,C)
Var concat_channels(const Var& a, const Var& b);
Var group_norm(const Var& x, int groups, double eps);  // no learned affine
Var channel_affine(const Var& x, const Var& scale, const Var& shift);

// ---- classification losses ----
// mean over batch of -z_y + logsumexp(z), computed with max subtraction;
// label_smoothing spreads the target mass uniformly over the other classes
Var cross_entropy(const Var& logits, const std::vector<int>& labels,
                  double label_smoothing = 0.0);
// mean over batch of -(z_y - max_{i!=y} z_i) / (z_{pi1} - z_{pi3})
Var dlr_loss_op(const Var& logits, const std::vector<int>& labels);
// targeted variant: -(z_y - z_t) / (z_{pi1} - (z_{pi3}+z_{pi4})/2)
Var dlr_targeted_op(const Var& logits, const std::vector<int>& labels,
                    const std::vector<int>& targets);

}  // namespace purekit::ag
