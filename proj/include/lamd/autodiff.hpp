#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lamd/error.hpp"
#include "lamd/tensor.hpp"

// Reverse-mode automatic differentiation over dense Tensors.
//
// A Tape records every primitive applied to its Vars. Each recorded node keeps
// its forward value and, when any input requires a gradient, a backward rule
// that accumulates into the inputs' gradients. Tape::backward walks the nodes
// in reverse recording order, which is a valid reverse topological order
// because a node can only consume nodes recorded before it.

namespace lamd::ad {

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient of a scalar output with respect to every requires_grad leaf.
class Gradients {
 public:
  const Tensor& operator[](Var v) const {
    auto it = grads_.find(v.id());
    if (it == grads_.end()) throw Error("no gradient recorded for node " + std::to_string(v.id()));
    return it->second;
  }
  bool contains(Var v) const { return grads_.count(v.id()) != 0; }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  friend class Tape;
  std::map<std::size_t, Tensor> grads_;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad) {
    check_finite(value, "leaf");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.is_leaf = true;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Constant leaf that borrows `value` instead of copying it; `value` must
  /// outlive the tape.
  Var constant_ref(const Tensor& value) {
    Node n;
    n.borrowed = &value;
    n.is_leaf = true;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  /// Records an op output. The backward rule is kept only when some input
  /// requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, const char* op, BackwardFn backward) {
    check_finite(value, op);
    bool needs = false;
    for (const Var& in : inputs) {
      if (in.tape() != this) throw Error(std::string(op) + ": input belongs to another tape");
      needs = needs || nodes_[in.id()].requires_grad;
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = needs;
    if (needs) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed ? *n.borrowed : n.value;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient buffer of node `id`, zero-initialised on first use. Backward
  /// rules call this only for inputs that require a gradient.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor(value(id).shape(), 0.0);
      n.has_grad = true;
    }
    return n.grad;
  }

  Gradients backward(Var output) {
    if (output.tape() != this) throw Error("backward: output belongs to another tape");
    if (value(output.id()).size() != 1) {
      throw ShapeError("backward requires a scalar output, got shape " +
                       shape_str(value(output.id()).shape()));
    }
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    if (nodes_[output.id()].requires_grad) {
      grad(output.id()).fill(1.0);
      for (std::size_t i = output.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.backward) continue;
        n.backward(*this, n.grad);
      }
    }
    Gradients out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!n.is_leaf || !n.requires_grad) continue;
      out.grads_.emplace(i, n.has_grad ? std::move(n.grad) : Tensor(value(i).shape(), 0.0));
      n.has_grad = false;
    }
    return out;
  }

 private:
  struct Node {
    Tensor value;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn backward;
  };

  static void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

inline void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

// Elementwise unary op given f(x) and f'(x, f(x)).
template <typename F, typename DF>
Var unary(const Var& x, const char* op, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const std::size_t xid = x.id();
  Tape& tape = *x.tape();
  const std::size_t out_id = tape.size();
  return tape.record(std::move(out), {x}, op, [xid, out_id, df](Tape& t, const Tensor& g) {
    const Tensor& in = t.value(xid);
    const Tensor& y = t.value(out_id);
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(in[i], y[i]);
  });
}

// C(n x m) += A(n x k) B(k x m)
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                    std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// A(n x k) += C(n x m) B(k x m)^T
inline void gemm_nt(const double* c, const double* b, double* a, std::size_t n, std::size_t k,
                    std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += crow[j] * brow[j];
      a[i * k + p] += s;
    }
  }
}

// B(k x m) += A(n x k)^T C(n x m)
inline void gemm_tn(const double* a, const double* c, double* b, std::size_t n, std::size_t k,
                    std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) brow[j] += av * crow[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape()->record(std::move(out), {a, b}, "add", [aid, bid](Tape& t, const Tensor& g) {
    for (std::size_t id : {aid, bid}) {
      if (!t.requires_grad(id)) continue;
      Tensor& gi = t.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape()->record(std::move(out), {a, b}, "sub", [aid, bid](Tape& t, const Tensor& g) {
    if (t.requires_grad(aid)) {
      Tensor& ga = t.grad(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bid)) {
      Tensor& gb = t.grad(bid);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape()->record(std::move(out), {a, b}, "mul", [aid, bid](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(aid);
    const Tensor& bv = t.value(bid);
    if (t.requires_grad(aid)) {
      Tensor& ga = t.grad(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bid)) {
      Tensor& gb = t.grad(bid);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

inline Var scale(const Var& x, double s) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= s;
  const std::size_t xid = x.id();
  return x.tape()->record(std::move(out), {x}, "scale", [xid, s](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
  });
}

/// Multiplies by a constant mask. The mask either matches x's shape or x's
/// shape without the leading batch dimension (then it repeats per item).
inline Var mask_mul(const Var& x, const Tensor& mask) {
  const Tensor& xv = x.value();
  const bool per_item = xv.rank() >= 1 && mask.shape() == Shape(xv.shape().begin() + 1, xv.shape().end());
  if (mask.shape() != xv.shape() && !per_item) {
    throw ShapeError("mask_mul: mask shape " + shape_str(mask.shape()) + " incompatible with " +
                     shape_str(xv.shape()));
  }
  const std::size_t period = mask.size();
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i % period];
  const std::size_t xid = x.id();
  return x.tape()->record(std::move(out), {x}, "mask_mul", [xid, mask, period](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i % period];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and layers

inline Var matmul(const Var& a, const Var& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  Tensor out({n, m});
  detail::gemm_nn(a.value().ptr(), b.value().ptr(), out.ptr(), n, k, m);
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape()->record(std::move(out), {a, b}, "matmul", [aid, bid, n, k, m](Tape& t, const Tensor& g) {
    if (t.requires_grad(aid)) detail::gemm_nt(g.ptr(), t.value(bid).ptr(), t.grad(aid).ptr(), n, k, m);
    if (t.requires_grad(bid)) detail::gemm_tn(t.value(aid).ptr(), g.ptr(), t.grad(bid).ptr(), n, k, m);
  });
}

/// Adds a bias vector: over the last dimension of a rank-2 input, or over the
/// channel dimension of a rank-4 (n, c, h, w) input.
inline Var add_bias(const Var& x, const Var& bias) {
  detail::require_rank(bias, 1, "add_bias");
  const Tensor& xv = x.value();
  const std::size_t features = bias.shape()[0];
  std::size_t inner = 1, channel_dim;
  if (xv.rank() == 2) {
    channel_dim = 1;
  } else if (xv.rank() == 4) {
    channel_dim = 1;
    inner = xv.dim(2) * xv.dim(3);
  } else {
    throw ShapeError("add_bias: expected rank 2 or 4, got " + shape_str(xv.shape()));
  }
  if (xv.dim(channel_dim) != features) throw ShapeError("add_bias: feature count mismatch");
  Tensor out = xv;
  const Tensor& bv = bias.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[(i / inner) % features];
  const std::size_t xid = x.id(), bid = bias.id();
  return x.tape()->record(std::move(out), {x, bias}, "add_bias",
                          [xid, bid, inner, features](Tape& t, const Tensor& g) {
                            if (t.requires_grad(xid)) {
                              Tensor& gx = t.grad(xid);
                              for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                            }
                            if (t.requires_grad(bid)) {
                              Tensor& gb = t.grad(bid);
                              for (std::size_t i = 0; i < g.size(); ++i) gb[(i / inner) % features] += g[i];
                            }
                          });
}

/// 2-D convolution, stride 1, zero padding that preserves spatial size.
/// x: (n, c, h, w); weight: (o, c, k, k) with odd k.
inline Var conv2d(const Var& x, const Var& weight) {
  detail::require_rank(x, 4, "conv2d");
  detail::require_rank(weight, 4, "conv2d");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const std::size_t o = ws[0], k = ws[2];
  if (ws[1] != c || ws[3] != k || k % 2 == 0) throw ShapeError("conv2d: bad kernel shape " + shape_str(ws));
  const long r = static_cast<long>(k / 2);

  // Visits every (output pixel, input pixel, weight) triple once.
  auto for_each_tap = [=](auto&& body) {
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t oc = 0; oc < o; ++oc)
        for (std::size_t ic = 0; ic < c; ++ic)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long dy = static_cast<long>(ky) - r, dx = static_cast<long>(kx) - r;
              const long y0 = std::max(0L, -dy), y1 = std::min(static_cast<long>(h), static_cast<long>(h) - dy);
              const long x0 = std::max(0L, -dx), x1 = std::min(static_cast<long>(w), static_cast<long>(w) - dx);
              const std::size_t out_base = (b * o + oc) * h * w;
              const std::size_t in_base = (b * c + ic) * h * w;
              const std::size_t w_index = ((oc * c + ic) * k + ky) * k + kx;
              body(out_base, in_base, w_index, dy, dx, y0, y1, x0, x1);
            }
  };

  Tensor out({n, o, h, w});
  const double* in = x.value().ptr();
  const double* wt = weight.value().ptr();
  double* po = out.ptr();
  for_each_tap([&](std::size_t ob, std::size_t ib, std::size_t wi, long dy, long dx, long y0, long y1,
                   long x0, long x1) {
    const double wv = wt[wi];
    for (long y = y0; y < y1; ++y) {
      double* orow = po + ob + static_cast<std::size_t>(y) * w;
      const long irow = static_cast<long>(ib) + (y + dy) * static_cast<long>(w) + dx;
      for (long xx = x0; xx < x1; ++xx) orow[xx] += wv * in[irow + xx];
    }
  });

  const std::size_t xid = x.id(), wid = weight.id();
  return x.tape()->record(std::move(out), {x, weight}, "conv2d", [=](Tape& t, const Tensor& g) {
    const double* gp = g.ptr();
    const bool need_x = t.requires_grad(xid), need_w = t.requires_grad(wid);
    const double* inv = t.value(xid).ptr();
    const double* wv = t.value(wid).ptr();
    double* gx = need_x ? t.grad(xid).ptr() : nullptr;
    double* gw = need_w ? t.grad(wid).ptr() : nullptr;
    for_each_tap([&](std::size_t ob, std::size_t ib, std::size_t wi, long dy, long dx, long y0, long y1,
                     long x0, long x1) {
      double acc = 0.0;
      for (long y = y0; y < y1; ++y) {
        const double* grow = gp + ob + static_cast<std::size_t>(y) * w;
        const long irow = static_cast<long>(ib) + (y + dy) * static_cast<long>(w) + dx;
        if (need_x) {
          const double wval = wv[wi];
          for (long xx = x0; xx < x1; ++xx) gx[irow + xx] += wval * grow[xx];
        }
        if (need_w) {
          for (long xx = x0; xx < x1; ++xx) acc += grow[xx] * inv[irow + xx];
        }
      }
      if (need_w) gw[wi] += acc;
    });
  });
}

/// Nearest-neighbour upsampling by 2 of (n, c, h, w).
inline Var upsample2x(const Var& x) {
  detail::require_rank(x, 4, "upsample2x");
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  Tensor out({s[0], s[1], 2 * h, 2 * w});
  const Tensor& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx)
        out[(p * 2 * h + y) * 2 * w + xx] = xv[(p * h + y / 2) * w + xx / 2];
  const std::size_t xid = x.id();
  return x.tape()->record(std::move(out), {x}, "upsample2x", [=](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t xx = 0; xx < 2 * w; ++xx)
          gx[(p * h + y / 2) * w + xx / 2] += g[(p * 2 * h + y) * 2 * w + xx];
  });
}

/// Average pooling over non-overlapping k x k blocks of (n, c, h, w).
inline Var avg_pool(const Var& x, std::size_t k) {
  detail::require_rank(x, 4, "avg_pool");
  const Shape& s = x.shape();
  if (k == 0 || s[2] % k != 0 || s[3] % k != 0) {
    throw ShapeError("avg_pool: factor " + std::to_string(k) + " does not divide " + shape_str(s));
  }
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h / k, ow = w / k;
  const double inv = 1.0 / static_cast<double>(k * k);
  Tensor out({s[0], s[1], oh, ow});
  const Tensor& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) out[(p * oh + y / k) * ow + xx / k] += xv[(p * h + y) * w + xx];
  for (double& v : out.data()) v *= inv;
  const std::size_t xid = x.id();
  return x.tape()->record(std::move(out), {x}, "avg_pool", [=](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) gx[(p * h + y) * w + xx] += inv * g[(p * oh + y / k) * ow + xx / k];
  });
}

/// Extracts rows [top, top+height) and columns [left, left+width) of every
/// plane of (n, c, h, w).
inline Var crop(const Var& x, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  detail::require_rank(x, 4, "crop");
  const Shape& s = x.shape();
  if (height == 0 || width == 0 || top + height > s[2] || left + width > s[3]) {
    throw ShapeError("crop: rectangle outside " + shape_str(s));
  }
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  Tensor out({s[0], s[1], height, width});
  const Tensor& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t xx = 0; xx < width; ++xx)
        out[(p * height + y) * width + xx] = xv[(p * h + top + y) * w + left + xx];
  const std::size_t xid = x.id();
  return x.tape()->record(std::move(out), {x}, "crop", [=](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t xx = 0; xx < width; ++xx)
          gx[(p * h + top + y) * w + left + xx] += g[(p * height + y) * width + xx];
  });
}

inline Var reshape(const Var& x, Shape shape) {
  if (shape_numel(shape) != x.value().size()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t xid = x.id();
  return x.tape()->record(std::move(out), {x}, "reshape", [xid](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Activations

inline Var relu(const Var& x) {
  return detail::unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var leaky_relu(const Var& x, double slope = 0.2) {
  return detail::unary(
      x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

inline Var tanh(const Var& x) {
  return detail::unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(const Var& x) {
  return detail::unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var log(const Var& x) {
  return detail::unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

// ---------------------------------------------------------------------------
// Reductions (all produce rank-0 tensors)

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t xid = x.id();
  return x.tape()->record(Tensor::scalar(s), {x}, "sum", [xid](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    const double gv = g[0];
    for (double& v : gx.data()) v += gv;
  });
}

inline Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

inline Var squared_l2(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v * v;
  const std::size_t xid = x.id();
  return x.tape()->record(Tensor::scalar(s), {x}, "squared_l2", [xid](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(xid);
    Tensor& gx = t.grad(xid);
    const double gv = 2.0 * g[0];
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gv * xv[i];
  });
}

/// Sum of absolute values; the subgradient at 0 is taken as 0.
inline Var l1_norm(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += std::abs(v);
  const std::size_t xid = x.id();
  return x.tape()->record(Tensor::scalar(s), {x}, "l1_norm", [xid](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(xid);
    Tensor& gx = t.grad(xid);
    const double gv = g[0];
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gv * static_cast<double>((xv[i] > 0.0) - (xv[i] < 0.0));
  });
}

inline Var mse(const Var& a, const Var& b) {
  return scale(squared_l2(sub(a, b)), 1.0 / static_cast<double>(a.value().size()));
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& x) { return scale(x, s); }

}  // namespace lamd::ad
