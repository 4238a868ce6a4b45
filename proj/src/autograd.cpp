#include "purekit/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "purekit/errors.hpp"

namespace purekit::ag {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Tensor& Node::grad_ref() {
  if (grad.empty() && value.numel() > 0) grad = Tensor::zeros(value.shape());
  return grad;
}

namespace {

Var make_node(Tensor value, std::vector<Var> inputs,
              std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& in : n->inputs) {
    if (in->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

void accum(Node& n, int64_t i, double v) { n.grad_ref()[i] += v; }

void check_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value)) {
    throw_parameter(std::string(op) + ": shape mismatch " +
                    shape_str(a->value.shape()) + " vs " + shape_str(b->value.shape()));
  }
}

}  // namespace

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = false;
  return n;
}

Var leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

void backward(const Var& root) {
  if (root->value.numel() != 1) throw_parameter("backward: root must be scalar");
  if (!root->requires_grad) return;

  // reverse topological order via iterative post-order DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_ref()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  check_shape(a, b, "add");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      double g = n.grad[i];
      if (n.inputs[0]->requires_grad) accum(*n.inputs[0], i, g);
      if (n.inputs[1]->requires_grad) accum(*n.inputs[1], i, g);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_shape(a, b, "sub");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      double g = n.grad[i];
      if (n.inputs[0]->requires_grad) accum(*n.inputs[0], i, g);
      if (n.inputs[1]->requires_grad) accum(*n.inputs[1], i, -g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_shape(a, b, "mul");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const Tensor& bv = n.inputs[1]->value;
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      double g = n.grad[i];
      if (n.inputs[0]->requires_grad) accum(*n.inputs[0], i, g * bv[i]);
      if (n.inputs[1]->requires_grad) accum(*n.inputs[1], i, g * av[i]);
    }
  });
}

Var div(const Var& a, const Var& b) {
  check_shape(a, b, "div");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] / b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const Tensor& bv = n.inputs[1]->value;
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      double g = n.grad[i];
      if (n.inputs[0]->requires_grad) accum(*n.inputs[0], i, g / bv[i]);
      if (n.inputs[1]->requires_grad)
        accum(*n.inputs[1], i, -g * av[i] / (bv[i] * bv[i]));
    }
  });
}

Var add_scalar(const Var& a, double c) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + c;
  return make_node(std::move(out), {a}, [](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) accum(*n.inputs[0], i, n.grad[i]);
  });
}

Var mul_scalar(const Var& a, double c) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * c;
  return make_node(std::move(out), {a}, [c](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) accum(*n.inputs[0], i, n.grad[i] * c);
  });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var leaky_relu(const Var& a, double slope) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    double v = a->value[i];
    out[i] = v > 0.0 ? v : slope * v;
  }
  return make_node(std::move(out), {a}, [slope](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      accum(*n.inputs[0], i, n.grad[i] * (av[i] > 0.0 ? 1.0 : slope));
    }
  });
}

Var tanh_op(const Var& a) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a->value[i]);
  return make_node(std::move(out), {a}, [](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      double y = n.value[i];
      accum(*n.inputs[0], i, n.grad[i] * (1.0 - y * y));
    }
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
  }
  return make_node(std::move(out), {a}, [](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      double y = n.value[i];
      accum(*n.inputs[0], i, n.grad[i] * y * (1.0 - y));
    }
  });
}

Var log_op(const Var& a) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(a->value[i]);
  return make_node(std::move(out), {a}, [](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      accum(*n.inputs[0], i, n.grad[i] / av[i]);
    }
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(a->value[i], lo, hi);
  return make_node(std::move(out), {a}, [lo, hi](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    for (int64_t i = 0; i < n.value.numel(); ++i) {
      if (av[i] >= lo && av[i] <= hi) accum(*n.inputs[0], i, n.grad[i]);
    }
  });
}

// ----------------------------------------------------------------- reductions

Var sum(const Var& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a->value.numel(); ++i) s += a->value[i];
  return make_node(Tensor::scalar(s), {a}, [](Node& n) {
    double g = n.grad[0];
    Node& in = *n.inputs[0];
    for (int64_t i = 0; i < in.value.numel(); ++i) accum(in, i, g);
  });
}

Var mean(const Var& a) {
  int64_t n_el = a->value.numel();
  if (n_el == 0) throw_parameter("mean of empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(n_el));
}

Var mse(const Var& a, const Var& b) {
  check_shape(a, b, "mse");
  int64_t n_el = a->value.numel();
  double s = 0.0;
  for (int64_t i = 0; i < n_el; ++i) {
    double d = a->value[i] - b->value[i];
    s += d * d;
  }
  return make_node(Tensor::scalar(s / static_cast<double>(n_el)), {a, b}, [](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const Tensor& bv = n.inputs[1]->value;
    double g = 2.0 * n.grad[0] / static_cast<double>(av.numel());
    for (int64_t i = 0; i < av.numel(); ++i) {
      double d = g * (av[i] - bv[i]);
      if (n.inputs[0]->requires_grad) accum(*n.inputs[0], i, d);
      if (n.inputs[1]->requires_grad) accum(*n.inputs[1], i, -d);
    }
  });
}

// ------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 2 || bv.rank() != 2 || av.size(1) != bv.size(0)) {
    throw_parameter("matmul: incompatible shapes " + shape_str(av.shape()) + " x " +
                    shape_str(bv.shape()));
  }
  int64_t m = av.size(0), k = av.size(1), n_cols = bv.size(1);
  Tensor out({m, n_cols});
  MapMat(out.data(), m, n_cols).noalias() =
      CMapMat(av.data(), m, k) * CMapMat(bv.data(), k, n_cols);
  return make_node(std::move(out), {a, b}, [m, k, n_cols](Node& n) {
    CMapMat gy(n.grad.data(), m, n_cols);
    if (n.inputs[0]->requires_grad) {
      MapMat ga(n.inputs[0]->grad_ref().data(), m, k);
      ga.noalias() += gy * CMapMat(n.inputs[1]->value.data(), k, n_cols).transpose();
    }
    if (n.inputs[1]->requires_grad) {
      MapMat gb(n.inputs[1]->grad_ref().data(), k, n_cols);
      gb.noalias() += CMapMat(n.inputs[0]->value.data(), m, k).transpose() * gy;
    }
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  const Tensor& xv = x->value;
  const Tensor& bv = b->value;
  if (xv.rank() != 2 || bv.rank() != 1 || bv.size(0) != xv.size(1)) {
    throw_parameter("add_rowvec: incompatible shapes");
  }
  int64_t rows = xv.size(0), cols = xv.size(1);
  Tensor out({rows, cols});
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) out.at(r, c) = xv.at(r, c) + bv[c];
  }
  return make_node(std::move(out), {x, b}, [rows, cols](Node& n) {
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < cols; ++c) {
        double g = n.grad.at(r, c);
        if (n.inputs[0]->requires_grad) accum(*n.inputs[0], r * cols + c, g);
        if (n.inputs[1]->requires_grad) accum(*n.inputs[1], c, g);
      }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  return add_rowvec(matmul(x, w), b);
}

Var bmm(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 3 || bv.rank() != 3 || av.size(0) != bv.size(0) ||
      av.size(2) != bv.size(1)) {
    throw_parameter("bmm: incompatible shapes");
  }
  int64_t bsz = av.size(0), m = av.size(1), k = av.size(2), n_cols = bv.size(2);
  Tensor out({bsz, m, n_cols});
  for (int64_t i = 0; i < bsz; ++i) {
    MapMat(out.data() + i * m * n_cols, m, n_cols).noalias() =
        CMapMat(av.data() + i * m * k, m, k) *
        CMapMat(bv.data() + i * k * n_cols, k, n_cols);
  }
  return make_node(std::move(out), {a, b}, [bsz, m, k, n_cols](Node& n) {
    for (int64_t i = 0; i < bsz; ++i) {
      CMapMat gy(n.grad.data() + i * m * n_cols, m, n_cols);
      if (n.inputs[0]->requires_grad) {
        MapMat ga(n.inputs[0]->grad_ref().data() + i * m * k, m, k);
        ga.noalias() +=
            gy * CMapMat(n.inputs[1]->value.data() + i * k * n_cols, k, n_cols).transpose();
      }
      if (n.inputs[1]->requires_grad) {
        MapMat gb(n.inputs[1]->grad_ref().data() + i * k * n_cols, k, n_cols);
        gb.noalias() +=
            CMapMat(n.inputs[0]->value.data() + i * m * k, m, k).transpose() * gy;
      }
    }
  });
}

Var transpose_last2(const Var& a) {
  const Tensor& av = a->value;
  if (av.rank() != 3) throw_parameter("transpose_last2 expects rank-3 tensor");
  int64_t bsz = av.size(0), m = av.size(1), n_cols = av.size(2);
  Tensor out({bsz, n_cols, m});
  for (int64_t i = 0; i < bsz; ++i) {
    for (int64_t r = 0; r < m; ++r) {
      for (int64_t c = 0; c < n_cols; ++c) out.at(i, c, r) = av.at(i, r, c);
    }
  }
  return make_node(std::move(out), {a}, [bsz, m, n_cols](Node& n) {
    Node& in = *n.inputs[0];
    in.grad_ref();
    for (int64_t i = 0; i < bsz; ++i) {
      for (int64_t r = 0; r < m; ++r) {
        for (int64_t c = 0; c < n_cols; ++c) {
          in.grad.at(i, r, c) += n.grad.at(i, c, r);
        }
      }
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a->value.reshaped(std::move(shape));
  return make_node(std::move(out), {a}, [](Node& n) {
    for (int64_t i = 0; i < n.value.numel(); ++i) accum(*n.inputs[0], i, n.grad[i]);
  });
}

Var slice_cols(const Var& x, int64_t start, int64_t len) {
  const Tensor& xv = x->value;
  if (xv.rank() != 2 || start < 0 || start + len > xv.size(1)) {
    throw_parameter("slice_cols: bad slice");
  }
  int64_t rows = xv.size(0), cols = xv.size(1);
  Tensor out({rows, len});
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < len; ++c) out.at(r, c) = xv.at(r, start + c);
  }
  return make_node(std::move(out), {x}, [rows, cols, start, len](Node& n) {
    Node& in = *n.inputs[0];
    in.grad_ref();
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < len; ++c) {
        in.grad[r * cols + start + c] += n.grad.at(r, c);
      }
    }
  });
}

Var select_row(const Var& x, int64_t row) {
  const Tensor& xv = x->value;
  if (xv.rank() != 2 || row < 0 || row >= xv.size(0)) {
    throw_parameter("select_row: bad row index");
  }
  int64_t cols = xv.size(1);
  Tensor out({1, cols});
  for (int64_t c = 0; c < cols; ++c) out[c] = xv.at(row, c);
  return make_node(std::move(out), {x}, [row, cols](Node& n) {
    Node& in = *n.inputs[0];
    in.grad_ref();
    for (int64_t c = 0; c < cols; ++c) in.grad[row * cols + c] += n.grad[c];
  });
}

Var repeat_rows(const Var& x, int64_t n_rows) {
  const Tensor& xv = x->value;
  if (xv.rank() != 2 || xv.size(0) != 1) throw_parameter("repeat_rows expects (1,E)");
  int64_t cols = xv.size(1);
  Tensor out({n_rows, cols});
  for (int64_t r = 0; r < n_rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) out.at(r, c) = xv[c];
  }
  return make_node(std::move(out), {x}, [n_rows, cols](Node& n) {
    Node& in = *n.inputs[0];
    in.grad_ref();
    for (int64_t r = 0; r < n_rows; ++r) {
      for (int64_t c = 0; c < cols; ++c) in.grad[c] += n.grad.at(r, c);
    }
  });
}

Var softmax_lastdim(const Var& a) {
  const Tensor& av = a->value;
  if (av.rank() < 1) throw_parameter("softmax on scalar");
  int64_t m = av.size(av.rank() - 1);
  int64_t rows = av.numel() / m;
  Tensor out(av.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = av.data() + r * m;
    double* o = out.data() + r * m;
    double mx = in[0];
    for (int64_t i = 1; i < m; ++i) mx = std::max(mx, in[i]);
    double z = 0.0;
    for (int64_t i = 0; i < m; ++i) {
      o[i] = std::exp(in[i] - mx);
      z += o[i];
    }
    for (int64_t i = 0; i < m; ++i) o[i] /= z;
  }
  return make_node(std::move(out), {a}, [rows, m](Node& n) {
    Node& in = *n.inputs[0];
    in.grad_ref();
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = n.value.data() + r * m;
      const double* gy = n.grad.data() + r * m;
      double dot = 0.0;
      for (int64_t i = 0; i < m; ++i) dot += gy[i] * y[i];
      double* gx = in.grad.data() + r * m;
      for (int64_t i = 0; i < m; ++i) gx[i] += y[i] * (gy[i] - dot);
    }
  });
}

// ------------------------------------------------------------------ image ops

namespace {

struct ConvDims {
  int64_t n, ci, h, w, co, cig, kh, kw, ho, wo;
  int stride, pad, groups;
  int64_t cog() const { return co / groups; }
  int64_t col_rows() const { return cig * kh * kw; }
  int64_t col_cols() const { return ho * wo; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad, int groups) {
  if (x.rank() != 4 || w.rank() != 4) throw_parameter("conv2d expects NCHW tensors");
  ConvDims d;
  d.n = x.size(0);
  d.ci = x.size(1);
  d.h = x.size(2);
  d.w = x.size(3);
  d.co = w.size(0);
  d.cig = w.size(1);
  d.kh = w.size(2);
  d.kw = w.size(3);
  d.stride = stride;
  d.pad = pad;
  d.groups = groups;
  if (groups < 1 || d.ci % groups != 0 || d.co % groups != 0 ||
      d.cig != d.ci / groups) {
    throw_parameter("conv2d: inconsistent channel/group configuration");
  }
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.ho < 1 || d.wo < 1) throw_parameter("conv2d: kernel larger than padded input");
  return d;
}

// gather one (sample, group) patch matrix: (cig*kh*kw, ho*wo)
void im2col(const ConvDims& d, const double* x, int64_t n, int64_t g, double* col) {
  for (int64_t ci = 0; ci < d.cig; ++ci) {
    const double* xc = x + ((n * d.ci + g * d.cig + ci) * d.h) * d.w;
    for (int64_t ki = 0; ki < d.kh; ++ki) {
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        double* row = col + ((ci * d.kh + ki) * d.kw + kj) * d.col_cols();
        for (int64_t ho = 0; ho < d.ho; ++ho) {
          int64_t hi = ho * d.stride - d.pad + ki;
          for (int64_t wo = 0; wo < d.wo; ++wo) {
            int64_t wi = wo * d.stride - d.pad + kj;
            row[ho * d.wo + wo] =
                (hi >= 0 && hi < d.h && wi >= 0 && wi < d.w) ? xc[hi * d.w + wi] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_accum(const ConvDims& d, const double* col, int64_t n, int64_t g,
                  double* gx) {
  for (int64_t ci = 0; ci < d.cig; ++ci) {
    double* xc = gx + ((n * d.ci + g * d.cig + ci) * d.h) * d.w;
    for (int64_t ki = 0; ki < d.kh; ++ki) {
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        const double* row = col + ((ci * d.kh + ki) * d.kw + kj) * d.col_cols();
        for (int64_t ho = 0; ho < d.ho; ++ho) {
          int64_t hi = ho * d.stride - d.pad + ki;
          if (hi < 0 || hi >= d.h) continue;
          for (int64_t wo = 0; wo < d.wo; ++wo) {
            int64_t wi = wo * d.stride - d.pad + kj;
            if (wi < 0 || wi >= d.w) continue;
            xc[hi * d.w + wi] += row[ho * d.wo + wo];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int groups) {
  ConvDims d = conv_dims(x->value, w->value, stride, pad, groups);
  if (b && b->value.numel() > 0 && (b->value.rank() != 1 || b->value.size(0) != d.co)) {
    throw_parameter("conv2d: bias shape mismatch");
  }
  Tensor out({d.n, d.co, d.ho, d.wo});
  std::vector<double> col(static_cast<size_t>(d.col_rows() * d.col_cols()));
  for (int64_t n_i = 0; n_i < d.n; ++n_i) {
    for (int g = 0; g < groups; ++g) {
      im2col(d, x->value.data(), n_i, g, col.data());
      CMapMat wm(w->value.data() + g * d.cog() * d.col_rows(), d.cog(), d.col_rows());
      MapMat om(out.data() + (n_i * d.co + g * d.cog()) * d.col_cols(), d.cog(),
                d.col_cols());
      om.noalias() = wm * CMapMat(col.data(), d.col_rows(), d.col_cols());
    }
  }
  if (b && b->value.numel() > 0) {
    for (int64_t n_i = 0; n_i < d.n; ++n_i) {
      for (int64_t c = 0; c < d.co; ++c) {
        double bias = b->value[c];
        double* o = out.data() + (n_i * d.co + c) * d.col_cols();
        for (int64_t i = 0; i < d.col_cols(); ++i) o[i] += bias;
      }
    }
  }
  std::vector<Var> inputs = {x, w};
  if (b) inputs.push_back(b);
  return make_node(std::move(out), std::move(inputs), [d](Node& n) {
    Node& xn = *n.inputs[0];
    Node& wn = *n.inputs[1];
    Node* bn = n.inputs.size() > 2 ? n.inputs[2].get() : nullptr;
    if (bn && bn->requires_grad && bn->value.numel() > 0) {
      Tensor& gb = bn->grad_ref();
      for (int64_t n_i = 0; n_i < d.n; ++n_i) {
        for (int64_t c = 0; c < d.co; ++c) {
          const double* g = n.grad.data() + (n_i * d.co + c) * d.col_cols();
          double s = 0.0;
          for (int64_t i = 0; i < d.col_cols(); ++i) s += g[i];
          gb[c] += s;
        }
      }
    }
    std::vector<double> col(static_cast<size_t>(d.col_rows() * d.col_cols()));
    std::vector<double> dcol(static_cast<size_t>(d.col_rows() * d.col_cols()));
    bool need_x = xn.requires_grad;
    bool need_w = wn.requires_grad;
    if (need_x) xn.grad_ref();
    if (need_w) wn.grad_ref();
    for (int64_t n_i = 0; n_i < d.n; ++n_i) {
      for (int g = 0; g < d.groups; ++g) {
        CMapMat gy(n.grad.data() + (n_i * d.co + g * d.cog()) * d.col_cols(), d.cog(),
                   d.col_cols());
        if (need_w) {
          im2col(d, xn.value.data(), n_i, g, col.data());
          MapMat gw(wn.grad.data() + g * d.cog() * d.col_rows(), d.cog(), d.col_rows());
          gw.noalias() += gy * CMapMat(col.data(), d.col_rows(), d.col_cols()).transpose();
        }
        if (need_x) {
          CMapMat wm(wn.value.data() + g * d.cog() * d.col_rows(), d.cog(), d.col_rows());
          MapMat dc(dcol.data(), d.col_rows(), d.col_cols());
          dc.noalias() = wm.transpose() * gy;
          col2im_accum(d, dcol.data(), n_i, g, xn.grad.data());
        }
      }
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 4) throw_parameter("upsample expects NCHW");
  int64_t n = xv.size(0), c = xv.size(1), h = xv.size(2), w = xv.size(3);
  Tensor out({n, c, 2 * h, 2 * w});
  for (int64_t i = 0; i < n * c; ++i) {
    const double* src = xv.data() + i * h * w;
    double* dst = out.data() + i * 4 * h * w;
    for (int64_t r = 0; r < h; ++r) {
      for (int64_t cc = 0; cc < w; ++cc) {
        double v = src[r * w + cc];
        dst[(2 * r) * 2 * w + 2 * cc] = v;
        dst[(2 * r) * 2 * w + 2 * cc + 1] = v;
        dst[(2 * r + 1) * 2 * w + 2 * cc] = v;
        dst[(2 * r + 1) * 2 * w + 2 * cc + 1] = v;
      }
    }
  }
  return make_node(std::move(out), {x}, [n, c, h, w](Node& nd) {
    Node& in = *nd.inputs[0];
    in.grad_ref();
    for (int64_t i = 0; i < n * c; ++i) {
      double* gsrc = in.grad.data() + i * h * w;
      const double* gdst = nd.grad.data() + i * 4 * h * w;
      for (int64_t r = 0; r < h; ++r) {
        for (int64_t cc = 0; cc < w; ++cc) {
          gsrc[r * w + cc] += gdst[(2 * r) * 2 * w + 2 * cc] +
                              gdst[(2 * r) * 2 * w + 2 * cc + 1] +
                              gdst[(2 * r + 1) * 2 * w + 2 * cc] +
                              gdst[(2 * r + 1) * 2 * w + 2 * cc + 1];
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 4) throw_parameter("global_avg_pool expects NCHW");
  int64_t n = xv.size(0), c = xv.size(1), hw = xv.size(2) * xv.size(3);
  Tensor out({n, c});
  for (int64_t i = 0; i < n * c; ++i) {
    const double* src = xv.data() + i * hw;
    double s = 0.0;
    for (int64_t j = 0; j < hw; ++j) s += src[j];
    out[i] = s / static_cast<double>(hw);
  }
  return make_node(std::move(out), {x}, [n, c, hw](Node& nd) {
    Node& in = *nd.inputs[0];
    in.grad_ref();
    for (int64_t i = 0; i < n * c; ++i) {
      double g = nd.grad[i] / static_cast<double>(hw);
      double* dst = in.grad.data() + i * hw;
      for (int64_t j = 0; j < hw; ++j) dst[j] += g;
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 4 || bv.rank() != 4 || av.size(0) != bv.size(0) ||
      av.size(2) != bv.size(2) || av.size(3) != bv.size(3)) {
    throw_parameter("concat_channels: incompatible shapes");
  }
  int64_t n = av.size(0), ca = av.size(1), cb = bv.size(1);
  int64_t hw = av.size(2) * av.size(3);
  Tensor out({n, ca + cb, av.size(2), av.size(3)});
  for (int64_t i = 0; i < n; ++i) {
    std::copy(av.data() + i * ca * hw, av.data() + (i + 1) * ca * hw,
              out.data() + i * (ca + cb) * hw);
    std::copy(bv.data() + i * cb * hw, bv.data() + (i + 1) * cb * hw,
              out.data() + (i * (ca + cb) + ca) * hw);
  }
  return make_node(std::move(out), {a, b}, [n, ca, cb, hw](Node& nd) {
    for (int64_t i = 0; i < n; ++i) {
      const double* g = nd.grad.data() + i * (ca + cb) * hw;
      if (nd.inputs[0]->requires_grad) {
        double* ga = nd.inputs[0]->grad_ref().data() + i * ca * hw;
        for (int64_t j = 0; j < ca * hw; ++j) ga[j] += g[j];
      }
      if (nd.inputs[1]->requires_grad) {
        double* gb = nd.inputs[1]->grad_ref().data() + i * cb * hw;
        for (int64_t j = 0; j < cb * hw; ++j) gb[j] += g[ca * hw + j];
      }
    }
  });
}

Var group_norm(const Var& x, int groups, double eps) {
  const Tensor& xv = x->value;
  if (xv.rank() != 4) throw_parameter("group_norm expects NCHW");
  int64_t n = xv.size(0), c = xv.size(1);
  if (groups < 1 || c % groups != 0) throw_parameter("group_norm: bad group count");
  int64_t slab = (c / groups) * xv.size(2) * xv.size(3);
  int64_t n_slabs = n * groups;
  Tensor out(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(n_slabs);
  for (int64_t s = 0; s < n_slabs; ++s) {
    const double* src = xv.data() + s * slab;
    double mu = 0.0;
    for (int64_t j = 0; j < slab; ++j) mu += src[j];
    mu /= static_cast<double>(slab);
    double var = 0.0;
    for (int64_t j = 0; j < slab; ++j) {
      double dv = src[j] - mu;
      var += dv * dv;
    }
    var /= static_cast<double>(slab);
    double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[s] = inv;
    double* dst = out.data() + s * slab;
    for (int64_t j = 0; j < slab; ++j) dst[j] = (src[j] - mu) * inv;
  }
  return make_node(std::move(out), {x}, [n_slabs, slab, inv_std](Node& nd) {
    Node& in = *nd.inputs[0];
    in.grad_ref();
    for (int64_t s = 0; s < n_slabs; ++s) {
      const double* xhat = nd.value.data() + s * slab;
      const double* gy = nd.grad.data() + s * slab;
      double mean_gy = 0.0, mean_gy_xhat = 0.0;
      for (int64_t j = 0; j < slab; ++j) {
        mean_gy += gy[j];
        mean_gy_xhat += gy[j] * xhat[j];
      }
      mean_gy /= static_cast<double>(slab);
      mean_gy_xhat /= static_cast<double>(slab);
      double inv = (*inv_std)[s];
      double* gx = in.grad.data() + s * slab;
      for (int64_t j = 0; j < slab; ++j) {
        gx[j] += inv * (gy[j] - mean_gy - xhat[j] * mean_gy_xhat);
      }
    }
  });
}

Var channel_affine(const Var& x, const Var& scale, const Var& shift) {
  const Tensor& xv = x->value;
  const Tensor& sv = scale->value;
  const Tensor& tv = shift->value;
  if (xv.rank() != 4 || sv.rank() != 2 || tv.rank() != 2 || sv.size(0) != xv.size(0) ||
      sv.size(1) != xv.size(1) || !sv.same_shape(tv)) {
    throw_parameter("channel_affine: incompatible shapes");
  }
  int64_t nc = xv.size(0) * xv.size(1), hw = xv.size(2) * xv.size(3);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < nc; ++i) {
    double s = sv[i], t = tv[i];
    const double* src = xv.data() + i * hw;
    double* dst = out.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) dst[j] = src[j] * s + t;
  }
  return make_node(std::move(out), {x, scale, shift}, [nc, hw](Node& nd) {
    const Tensor& xv2 = nd.inputs[0]->value;
    const Tensor& sv2 = nd.inputs[1]->value;
    for (int64_t i = 0; i < nc; ++i) {
      const double* g = nd.grad.data() + i * hw;
      if (nd.inputs[0]->requires_grad) {
        double s = sv2[i];
        double* gx = nd.inputs[0]->grad_ref().data() + i * hw;
        for (int64_t j = 0; j < hw; ++j) gx[j] += g[j] * s;
      }
      if (nd.inputs[1]->requires_grad) {
        const double* src = xv2.data() + i * hw;
        double acc = 0.0;
        for (int64_t j = 0; j < hw; ++j) acc += g[j] * src[j];
        nd.inputs[1]->grad_ref()[i] += acc;
      }
      if (nd.inputs[2]->requires_grad) {
        double acc = 0.0;
        for (int64_t j = 0; j < hw; ++j) acc += g[j];
        nd.inputs[2]->grad_ref()[i] += acc;
      }
    }
  });
}

// --------------------------------------------------------------------- losses

Var cross_entropy(const Var& logits, const std::vector<int>& labels,
                  double label_smoothing) {
  const Tensor& lv = logits->value;
  if (lv.rank() != 2) throw_parameter("cross_entropy expects (N,K) logits");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw_parameter("cross_entropy: label_smoothing must lie in [0,1)");
  }
  int64_t n = lv.size(0), k = lv.size(1);
  if (static_cast<int64_t>(labels.size()) != n) {
    throw_parameter("cross_entropy: label count mismatch");
  }
  double q_off = label_smoothing / static_cast<double>(k);
  double q_on = 1.0 - label_smoothing + q_off;
  auto probs = std::make_shared<Tensor>(Shape{n, k});
  double total = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    int y = labels[r];
    if (y < 0 || y >= k) throw_parameter("cross_entropy: label out of range");
    const double* z = lv.data() + r * k;
    double mx = z[0];
    for (int64_t i = 1; i < k; ++i) mx = std::max(mx, z[i]);
    double sum_exp = 0.0;
    for (int64_t i = 0; i < k; ++i) sum_exp += std::exp(z[i] - mx);
    double lse = mx + std::log(sum_exp);
    for (int64_t i = 0; i < k; ++i) {
      total += -(i == y ? q_on : q_off) * (z[i] - lse);
    }
    double* p = probs->data() + r * k;
    for (int64_t i = 0; i < k; ++i) p[i] = std::exp(z[i] - mx) / sum_exp;
  }
  return make_node(Tensor::scalar(total / static_cast<double>(n)), {logits},
                   [n, k, labels, probs, q_on, q_off](Node& nd) {
                     double g = nd.grad[0] / static_cast<double>(n);
                     Node& in = *nd.inputs[0];
                     in.grad_ref();
                     for (int64_t r = 0; r < n; ++r) {
                       const double* p = probs->data() + r * k;
                       double* gx = in.grad.data() + r * k;
                       for (int64_t i = 0; i < k; ++i) {
                         gx[i] += g * (p[i] - (i == labels[r] ? q_on : q_off));
                       }
                     }
                   });
}

namespace {

struct DlrRow {
  int y, runner_up, pi1, pi3, pi4;
  double a, b;
};

DlrRow dlr_row(const double* z, int64_t k, int y) {
  DlrRow r;
  r.y = y;
  std::vector<int> idx(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) idx[static_cast<size_t>(i)] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return z[a] > z[b]; });
  r.pi1 = idx[0];
  r.pi3 = idx[2];
  r.pi4 = k > 3 ? idx[3] : idx[2];
  r.runner_up = idx[0] != y ? idx[0] : idx[1];
  r.a = z[y] - z[r.runner_up];
  r.b = z[r.pi1] - z[r.pi3];
  return r;
}

}  // namespace

Var dlr_loss_op(const Var& logits, const std::vector<int>& labels) {
  const Tensor& lv = logits->value;
  if (lv.rank() != 2) throw_parameter("dlr expects (N,K) logits");
  int64_t n = lv.size(0), k = lv.size(1);
  if (k < 4) throw_parameter("dlr loss requires at least 4 classes");
  if (static_cast<int64_t>(labels.size()) != n) throw_parameter("dlr: label count mismatch");
  auto rows = std::make_shared<std::vector<DlrRow>>();
  double total = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    int y = labels[r];
    if (y < 0 || y >= k) throw_parameter("dlr: label out of range");
    DlrRow row = dlr_row(lv.data() + r * k, k, y);
    if (row.b == 0.0) {
      throw_parameter("dlr loss undefined: top-1 and top-3 logits are equal (constant logits?)");
    }
    total += -row.a / row.b;
    rows->push_back(row);
  }
  return make_node(Tensor::scalar(total / static_cast<double>(n)), {logits},
                   [n, k, rows](Node& nd) {
                     double g = nd.grad[0] / static_cast<double>(n);
                     Node& in = *nd.inputs[0];
                     in.grad_ref();
                     for (int64_t r = 0; r < n; ++r) {
                       const DlrRow& row = (*rows)[static_cast<size_t>(r)];
                       double* gx = in.grad.data() + r * k;
                       gx[row.y] += g * (-1.0 / row.b);
                       gx[row.runner_up] += g * (1.0 / row.b);
                       double db = g * row.a / (row.b * row.b);
                       gx[row.pi1] += db;
                       gx[row.pi3] -= db;
                     }
                   });
}

Var dlr_targeted_op(const Var& logits, const std::vector<int>& labels,
                    const std::vector<int>& targets) {
  const Tensor& lv = logits->value;
  if (lv.rank() != 2) throw_parameter("dlr expects (N,K) logits");
  int64_t n = lv.size(0), k = lv.size(1);
  if (k < 4) throw_parameter("targeted dlr loss requires at least 4 classes");
  if (static_cast<int64_t>(labels.size()) != n ||
      static_cast<int64_t>(targets.size()) != n) {
    throw_parameter("dlr targeted: label/target count mismatch");
  }
  auto rows = std::make_shared<std::vector<DlrRow>>();
  double total = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    const double* z = lv.data() + r * k;
    DlrRow row = dlr_row(z, k, labels[r]);
    row.runner_up = targets[r];  // reuse slot for the target class
    row.a = z[row.y] - z[row.runner_up];
    row.b = z[row.pi1] - 0.5 * (z[row.pi3] + z[row.pi4]);
    if (row.b == 0.0) throw_parameter("targeted dlr loss undefined: degenerate logits");
    total += -row.a / row.b;
    rows->push_back(row);
  }
  return make_node(Tensor::scalar(total / static_cast<double>(n)), {logits},
                   [n, k, rows](Node& nd) {
                     double g = nd.grad[0] / static_cast<double>(n);
                     Node& in = *nd.inputs[0];
                     in.grad_ref();
                     for (int64_t r = 0; r < n; ++r) {
                       const DlrRow& row = (*rows)[static_cast<size_t>(r)];
                       double* gx = in.grad.data() + r * k;
                       gx[row.y] += g * (-1.0 / row.b);
                       gx[row.runner_up] += g * (1.0 / row.b);
                       double db = g * row.a / (row.b * row.b);
                       gx[row.pi1] += db;
                       gx[row.pi3] -= 0.5 * db;
                       gx[row.pi4] -= 0.5 * db;
                     }
                   });
}

}  // namespace purekit::ag
