#ifndef FNET_AUTODIFF_HPP
#define FNET_AUTODIFF_HPP

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fnet/tensor.hpp"

// Reverse-mode autodiff over a small, fixed op set. A forward pass builds a
// DAG of nodes (acyclic by construction: an op node only ever references
// nodes that already exist); backward() replays it in reverse topological
// order. Single-threaded and deterministic: identical inputs give bit
// identical forward values and gradients.

namespace fnet {

namespace detail {

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;  // allocated on demand during backward()
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor<Scalar>(value.shape());
  }
  void accumulate(const typename Tensor<Scalar>::Storage& g) {
    ensure_grad();
    grad.array() += g;
  }
};

}  // namespace detail

template <typename Scalar>
class Var {
 public:
  using NodePtr = std::shared_ptr<detail::Node<Scalar>>;

  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var constant(Tensor<Scalar> v) {
    auto n = std::make_shared<detail::Node<Scalar>>();
    n->value = std::move(v);
    n->needs_grad = false;
    return Var(std::move(n));
  }

  static Var parameter(Tensor<Scalar> v) {
    auto n = std::make_shared<detail::Node<Scalar>>();
    n->value = std::move(v);
    n->needs_grad = true;
    return Var(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<Scalar>& value() const { return node_->value; }
  Tensor<Scalar>& value() { return node_->value; }
  const Tensor<Scalar>& grad() const { return node_->grad; }
  bool needs_grad() const { return node_->needs_grad; }

  // Gradient as a zero tensor when the parameter never entered a graph.
  Tensor<Scalar> grad_or_zero() const {
    if (node_->grad.numel() == node_->value.numel()) return node_->grad;
    return Tensor<Scalar>(node_->value.shape());
  }

  void zero_grad() {
    node_->ensure_grad();
    node_->grad.set_zero();
  }

  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

namespace detail {

template <typename Scalar>
Var<Scalar> make_op(Tensor<Scalar> value,
                    std::vector<typename Var<Scalar>::NodePtr> inputs,
                    std::function<void(Node<Scalar>&)> backward_fn) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& in : n->inputs) {
    if (in->needs_grad) n->needs_grad = true;
  }
  if (n->needs_grad) n->backward_fn = std::move(backward_fn);
  return Var<Scalar>(std::move(n));
}

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Gather padded input windows into a (C*K*K) x (OH*OW) column matrix.
template <typename Scalar>
void im2col(const Scalar* x, int C, int H, int W, int K, int stride, int pad,
            int OH, int OW, Scalar* col) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < K; ++ki) {
      for (int kj = 0; kj < K; ++kj) {
        Scalar* row = col + (static_cast<std::int64_t>((c * K + ki) * K + kj)) *
                                OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride + ki - pad;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride + kj - pad;
            row[oy * OW + ox] = (iy >= 0 && iy < H && ix >= 0 && ix < W)
                                    ? x[(c * H + iy) * W + ix]
                                    : Scalar(0);
          }
        }
      }
    }
  }
}

// Scatter-add of a column matrix back onto the (unpadded) input.
template <typename Scalar>
void col2im(const Scalar* col, int C, int H, int W, int K, int stride, int pad,
            int OH, int OW, Scalar* x) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < K; ++ki) {
      for (int kj = 0; kj < K; ++kj) {
        const Scalar* row =
            col + (static_cast<std::int64_t>((c * K + ki) * K + kj)) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride + ki - pad;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride + kj - pad;
            if (ix < 0 || ix >= W) continue;
            x[(c * H + iy) * W + ix] += row[oy * OW + ox];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void require(bool cond, const char* what) {
  if (!cond) throw TensorError(TensorErrc::ShapeMismatch, what);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ops. Inputs x are NCHW unless stated otherwise.
// ---------------------------------------------------------------------------

// Cross-correlation of NCHW input with OIKK weights.
// Output spatial dim = floor((H + 2*pad - K) / stride) + 1.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, int stride,
                   int pad) {
  using detail::require;
  const auto& xv = x.value();
  const auto& wv = w.value();
  require<Scalar>(xv.rank() == 4, "conv2d: input must be NCHW");
  require<Scalar>(wv.rank() == 4, "conv2d: weights must be OIKK");
  require<Scalar>(wv.dim(2) == wv.dim(3), "conv2d: kernel must be square");
  require<Scalar>(xv.dim(1) == wv.dim(1), "conv2d: channel count mismatch");
  require<Scalar>(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int O = wv.dim(0), K = wv.dim(2);
  const int OH = detail::conv_out_dim(H, K, stride, pad);
  const int OW = detail::conv_out_dim(W, K, stride, pad);
  require<Scalar>(OH >= 1 && OW >= 1, "conv2d: kernel does not fit input");

  Tensor<Scalar> out({N, O, OH, OW});
  Tensor<Scalar> col({C * K * K, OH * OW});
  auto wmat = wv.as_matrix(O, C * K * K);
  for (int n = 0; n < N; ++n) {
    detail::im2col(xv.data() + static_cast<std::int64_t>(n) * C * H * W, C, H,
                   W, K, stride, pad, OH, OW, col.data());
    auto cmat = col.as_matrix(C * K * K, OH * OW);
    auto omat = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                         Eigen::RowMajor>>(
        out.data() + static_cast<std::int64_t>(n) * O * OH * OW, O, OH * OW);
    omat.noalias() = wmat * cmat;
  }

  auto xn = x.node();
  auto wn = w.node();
  return detail::make_op<Scalar>(
      std::move(out), {xn, wn},
      [xn, wn, stride, pad, N, C, H, W, O, K, OH, OW](detail::Node<Scalar>& nd) {
        Tensor<Scalar> col({C * K * K, OH * OW});
        auto wmat = wn->value.as_matrix(O, C * K * K);
        if (wn->needs_grad) wn->ensure_grad();
        if (xn->needs_grad) xn->ensure_grad();
        for (int n = 0; n < N; ++n) {
          auto gmat = Eigen::Map<const Eigen::Matrix<
              Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
              nd.grad.data() + static_cast<std::int64_t>(n) * O * OH * OW, O,
              OH * OW);
          if (wn->needs_grad) {
            detail::im2col(xn->value.data() +
                               static_cast<std::int64_t>(n) * C * H * W,
                           C, H, W, K, stride, pad, OH, OW, col.data());
            auto cmat = col.as_matrix(C * K * K, OH * OW);
            auto dw = wn->grad.as_matrix(O, C * K * K);
            dw.noalias() += gmat * cmat.transpose();
          }
          if (xn->needs_grad) {
            auto dcol = col.as_matrix(C * K * K, OH * OW);
            dcol.noalias() = wmat.transpose() * gmat;
            detail::col2im(col.data(), C, H, W, K, stride, pad, OH, OW,
                           xn->grad.data() +
                               static_cast<std::int64_t>(n) * C * H * W);
          }
        }
      });
}

// Per-channel KxK convolution (groups == channels). Weights are C x K x K.
template <typename Scalar>
Var<Scalar> depthwise_conv2d(const Var<Scalar>& x, const Var<Scalar>& w,
                             int stride, int pad) {
  using detail::require;
  const auto& xv = x.value();
  const auto& wv = w.value();
  require<Scalar>(xv.rank() == 4, "depthwise: input must be NCHW");
  require<Scalar>(wv.rank() == 3, "depthwise: weights must be CxKxK");
  require<Scalar>(wv.dim(1) == wv.dim(2), "depthwise: kernel must be square");
  require<Scalar>(xv.dim(1) == wv.dim(0), "depthwise: channel count mismatch");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int K = wv.dim(1);
  const int OH = detail::conv_out_dim(H, K, stride, pad);
  const int OW = detail::conv_out_dim(W, K, stride, pad);
  require<Scalar>(OH >= 1 && OW >= 1, "depthwise: kernel does not fit input");

  Tensor<Scalar> out({N, C, OH, OW});
  const Scalar* xd = xv.data();
  const Scalar* wd = wv.data();
  Scalar* od = out.data();
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Scalar* xp = xd + (static_cast<std::int64_t>(n) * C + c) * H * W;
      const Scalar* wp = wd + static_cast<std::int64_t>(c) * K * K;
      Scalar* op = od + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
      for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
          Scalar acc = 0;
          for (int ki = 0; ki < K; ++ki) {
            const int iy = oy * stride + ki - pad;
            if (iy < 0 || iy >= H) continue;
            for (int kj = 0; kj < K; ++kj) {
              const int ix = ox * stride + kj - pad;
              if (ix < 0 || ix >= W) continue;
              acc += xp[iy * W + ix] * wp[ki * K + kj];
            }
          }
          op[oy * OW + ox] = acc;
        }
      }
    }
  }

  auto xn = x.node();
  auto wn = w.node();
  return detail::make_op<Scalar>(
      std::move(out), {xn, wn},
      [xn, wn, stride, pad, N, C, H, W, K, OH, OW](detail::Node<Scalar>& nd) {
        if (wn->needs_grad) wn->ensure_grad();
        if (xn->needs_grad) xn->ensure_grad();
        for (int n = 0; n < N; ++n) {
          for (int c = 0; c < C; ++c) {
            const std::int64_t xoff =
                (static_cast<std::int64_t>(n) * C + c) * H * W;
            const std::int64_t woff = static_cast<std::int64_t>(c) * K * K;
            const Scalar* gp =
                nd.grad.data() + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
            for (int oy = 0; oy < OH; ++oy) {
              for (int ox = 0; ox < OW; ++ox) {
                const Scalar g = gp[oy * OW + ox];
                if (g == Scalar(0)) continue;
                for (int ki = 0; ki < K; ++ki) {
                  const int iy = oy * stride + ki - pad;
                  if (iy < 0 || iy >= H) continue;
                  for (int kj = 0; kj < K; ++kj) {
                    const int ix = ox * stride + kj - pad;
                    if (ix < 0 || ix >= W) continue;
                    if (wn->needs_grad) {
                      wn->grad[woff + ki * K + kj] +=
                          g * xn->value[xoff + iy * W + ix];
                    }
                    if (xn->needs_grad) {
                      xn->grad[xoff + iy * W + ix] +=
                          g * wn->value[woff + ki * K + kj];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

// 1x1 cross-channel convolution, optionally strided (spatial subsampling).
// Weights are O x I x 1 x 1.
template <typename Scalar>
Var<Scalar> pointwise_conv(const Var<Scalar>& x, const Var<Scalar>& w,
                           int stride = 1) {
  using detail::require;
  const auto& xv = x.value();
  const auto& wv = w.value();
  require<Scalar>(xv.rank() == 4, "pointwise: input must be NCHW");
  require<Scalar>(wv.rank() == 4 && wv.dim(2) == 1 && wv.dim(3) == 1,
                  "pointwise: weights must be OxIx1x1");
  require<Scalar>(xv.dim(1) == wv.dim(1), "pointwise: channel count mismatch");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int O = wv.dim(0);
  const int OH = detail::conv_out_dim(H, 1, stride, 0);
  const int OW = detail::conv_out_dim(W, 1, stride, 0);

  // Subsampled input as an I x (OH*OW) matrix per batch element.
  auto gather = [=](const Scalar* xp, Tensor<Scalar>& sub) {
    for (int c = 0; c < C; ++c) {
      Scalar* row = sub.data() + static_cast<std::int64_t>(c) * OH * OW;
      for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
          row[oy * OW + ox] = xp[(c * H + oy * stride) * W + ox * stride];
        }
      }
    }
  };

  Tensor<Scalar> out({N, O, OH, OW});
  auto wmat = wv.as_matrix(O, C);
  Tensor<Scalar> sub({C, OH * OW});
  for (int n = 0; n < N; ++n) {
    const Scalar* xp = xv.data() + static_cast<std::int64_t>(n) * C * H * W;
    const Scalar* src = xp;
    if (stride != 1) {
      gather(xp, sub);
      src = sub.data();
    }
    auto xmat = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic,
                                               Eigen::Dynamic, Eigen::RowMajor>>(
        src, C, OH * OW);
    auto omat = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                         Eigen::RowMajor>>(
        out.data() + static_cast<std::int64_t>(n) * O * OH * OW, O, OH * OW);
    omat.noalias() = wmat * xmat;
  }

  auto xn = x.node();
  auto wn = w.node();
  return detail::make_op<Scalar>(
      std::move(out), {xn, wn},
      [xn, wn, gather, stride, N, C, H, W, O, OH, OW](detail::Node<Scalar>& nd) {
        auto wmat = wn->value.as_matrix(O, C);
        if (wn->needs_grad) wn->ensure_grad();
        if (xn->needs_grad) xn->ensure_grad();
        Tensor<Scalar> sub({C, OH * OW});
        Tensor<Scalar> dsub({C, OH * OW});
        for (int n = 0; n < N; ++n) {
          const std::int64_t xoff = static_cast<std::int64_t>(n) * C * H * W;
          auto gmat = Eigen::Map<const Eigen::Matrix<
              Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
              nd.grad.data() + static_cast<std::int64_t>(n) * O * OH * OW, O,
              OH * OW);
          if (wn->needs_grad) {
            const Scalar* src = xn->value.data() + xoff;
            if (stride != 1) {
              gather(xn->value.data() + xoff, sub);
              src = sub.data();
            }
            auto xmat =
                Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic,
                                               Eigen::Dynamic, Eigen::RowMajor>>(
                    src, C, OH * OW);
            auto dw = wn->grad.as_matrix(O, C);
            dw.noalias() += gmat * xmat.transpose();
          }
          if (xn->needs_grad) {
            auto dmat = dsub.as_matrix(C, OH * OW);
            dmat.noalias() = wmat.transpose() * gmat;
            Scalar* dst = xn->grad.data() + xoff;
            for (int c = 0; c < C; ++c) {
              const Scalar* row = dsub.data() + static_cast<std::int64_t>(c) * OH * OW;
              for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                  dst[(c * H + oy * stride) * W + ox * stride] +=
                      row[oy * OW + ox];
                }
              }
            }
          }
        }
      });
}

// Fully connected layer: x is N x F, w is F x G, b is G.
template <typename Scalar>
Var<Scalar> dense(const Var<Scalar>& x, const Var<Scalar>& w,
                  const Var<Scalar>& b) {
  using detail::require;
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  require<Scalar>(xv.rank() == 2 && wv.rank() == 2, "dense: x NxF, w FxG");
  require<Scalar>(xv.dim(1) == wv.dim(0), "dense: feature dim mismatch");
  require<Scalar>(bv.numel() == wv.dim(1), "dense: bias dim mismatch");
  const int N = xv.dim(0), F = xv.dim(1), G = wv.dim(1);

  Tensor<Scalar> out({N, G});
  auto om = out.as_matrix(N, G);
  om.noalias() = xv.as_matrix(N, F) * wv.as_matrix(F, G);
  for (int n = 0; n < N; ++n) {
    for (int g = 0; g < G; ++g) out[n * G + g] += bv[g];
  }

  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  return detail::make_op<Scalar>(
      std::move(out), {xn, wn, bn}, [xn, wn, bn, N, F, G](detail::Node<Scalar>& nd) {
        auto gm = nd.grad.as_matrix(N, G);
        if (wn->needs_grad) {
          wn->ensure_grad();
          auto dw = wn->grad.as_matrix(F, G);
          dw.noalias() += xn->value.as_matrix(N, F).transpose() * gm;
        }
        if (bn->needs_grad) {
          bn->ensure_grad();
          for (int n = 0; n < N; ++n) {
            for (int g = 0; g < G; ++g) bn->grad[g] += nd.grad[n * G + g];
          }
        }
        if (xn->needs_grad) {
          xn->ensure_grad();
          auto dx = xn->grad.as_matrix(N, F);
          dx.noalias() += gm * wn->value.as_matrix(F, G).transpose();
        }
      });
}

// Per-channel bias over NCHW.
template <typename Scalar>
Var<Scalar> bias_add(const Var<Scalar>& x, const Var<Scalar>& b) {
  using detail::require;
  const auto& xv = x.value();
  const auto& bv = b.value();
  require<Scalar>(xv.rank() == 4, "bias_add: input must be NCHW");
  require<Scalar>(bv.numel() == xv.dim(1), "bias_add: bias dim mismatch");
  const int N = xv.dim(0), C = xv.dim(1);
  const std::int64_t HW = static_cast<std::int64_t>(xv.dim(2)) * xv.dim(3);

  Tensor<Scalar> out = xv;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      Scalar* p = out.data() + (static_cast<std::int64_t>(n) * C + c) * HW;
      const Scalar bc = bv[c];
      for (std::int64_t i = 0; i < HW; ++i) p[i] += bc;
    }
  }

  auto xn = x.node();
  auto bn = b.node();
  return detail::make_op<Scalar>(
      std::move(out), {xn, bn}, [xn, bn, N, C, HW](detail::Node<Scalar>& nd) {
        if (xn->needs_grad) xn->accumulate(nd.grad.array());
        if (bn->needs_grad) {
          bn->ensure_grad();
          for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
              const Scalar* g =
                  nd.grad.data() + (static_cast<std::int64_t>(n) * C + c) * HW;
              Scalar acc = 0;
              for (std::int64_t i = 0; i < HW; ++i) acc += g[i];
              bn->grad[c] += acc;
            }
          }
        }
      });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  Tensor<Scalar> out = x.value();
  out.array() = out.array().max(Scalar(0));
  auto xn = x.node();
  return detail::make_op<Scalar>(std::move(out), {xn},
                                 [xn](detail::Node<Scalar>& nd) {
                                   if (!xn->needs_grad) return;
                                   xn->ensure_grad();
                                   for (std::int64_t i = 0; i < nd.grad.numel();
                                        ++i) {
                                     if (xn->value[i] > Scalar(0)) {
                                       xn->grad[i] += nd.grad[i];
                                     }
                                   }
                                 });
}

// NCHW -> NxC spatial mean.
template <typename Scalar>
Var<Scalar> global_avg_pool(const Var<Scalar>& x) {
  const auto& xv = x.value();
  detail::require<Scalar>(xv.rank() == 4, "global_avg_pool: input must be NCHW");
  const int N = xv.dim(0), C = xv.dim(1);
  const std::int64_t HW = static_cast<std::int64_t>(xv.dim(2)) * xv.dim(3);

  Tensor<Scalar> out({N, C});
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Scalar* p =
          xv.data() + (static_cast<std::int64_t>(n) * C + c) * HW;
      Scalar acc = 0;
      for (std::int64_t i = 0; i < HW; ++i) acc += p[i];
      out[n * C + c] = acc / static_cast<Scalar>(HW);
    }
  }

  auto xn = x.node();
  return detail::make_op<Scalar>(
      std::move(out), {xn}, [xn, N, C, HW](detail::Node<Scalar>& nd) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        const Scalar inv = Scalar(1) / static_cast<Scalar>(HW);
        for (int n = 0; n < N; ++n) {
          for (int c = 0; c < C; ++c) {
            const Scalar g = nd.grad[n * C + c] * inv;
            Scalar* p =
                xn->grad.data() + (static_cast<std::int64_t>(n) * C + c) * HW;
            for (std::int64_t i = 0; i < HW; ++i) p[i] += g;
          }
        }
      });
}

// Non-overlapping k x k average pooling (window == stride == k).
template <typename Scalar>
Var<Scalar> avg_pool2d(const Var<Scalar>& x, int k) {
  using detail::require;
  const auto& xv = x.value();
  require<Scalar>(xv.rank() == 4, "avg_pool2d: input must be NCHW");
  require<Scalar>(k >= 1 && xv.dim(2) >= k && xv.dim(3) >= k,
                  "avg_pool2d: window does not fit");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int OH = H / k, OW = W / k;

  Tensor<Scalar> out({N, C, OH, OW});
  const Scalar inv = Scalar(1) / static_cast<Scalar>(k * k);
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Scalar* xp =
          xv.data() + (static_cast<std::int64_t>(n) * C + c) * H * W;
      Scalar* op =
          out.data() + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
      for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
          Scalar acc = 0;
          for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
              acc += xp[(oy * k + dy) * W + ox * k + dx];
            }
          }
          op[oy * OW + ox] = acc * inv;
        }
      }
    }
  }

  auto xn = x.node();
  return detail::make_op<Scalar>(
      std::move(out), {xn}, [xn, k, N, C, H, W, OH, OW](detail::Node<Scalar>& nd) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        const Scalar inv = Scalar(1) / static_cast<Scalar>(k * k);
        for (int n = 0; n < N; ++n) {
          for (int c = 0; c < C; ++c) {
            const Scalar* gp =
                nd.grad.data() + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
            Scalar* dp =
                xn->grad.data() + (static_cast<std::int64_t>(n) * C + c) * H * W;
            for (int oy = 0; oy < OH; ++oy) {
              for (int ox = 0; ox < OW; ++ox) {
                const Scalar g = gp[oy * OW + ox] * inv;
                for (int dy = 0; dy < k; ++dy) {
                  for (int dx = 0; dx < k; ++dx) {
                    dp[(oy * k + dy) * W + ox * k + dx] += g;
                  }
                }
              }
            }
          }
        }
      });
}

// Concatenate along `axis`; all other dims must agree.
template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& xs, int axis) {
  using detail::require;
  require<Scalar>(!xs.empty(), "concat: empty input list");
  const auto& first = xs.front().value();
  require<Scalar>(axis >= 0 && axis < first.rank(), "concat: bad axis");
  std::vector<int> shape = first.shape();
  int axis_total = 0;
  for (const auto& x : xs) {
    const auto& v = x.value();
    require<Scalar>(v.rank() == first.rank(), "concat: rank mismatch");
    for (int d = 0; d < first.rank(); ++d) {
      if (d != axis) {
        require<Scalar>(v.dim(d) == first.dim(d), "concat: dim mismatch");
      }
    }
    axis_total += v.dim(axis);
  }
  shape[static_cast<std::size_t>(axis)] = axis_total;

  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= first.dim(d);
  for (int d = axis + 1; d < first.rank(); ++d) inner *= first.dim(d);

  Tensor<Scalar> out(shape);
  const std::int64_t out_stride = static_cast<std::int64_t>(axis_total) * inner;
  std::int64_t off = 0;
  for (const auto& x : xs) {
    const auto& v = x.value();
    const std::int64_t blk = static_cast<std::int64_t>(v.dim(axis)) * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy(v.data() + o * blk, v.data() + (o + 1) * blk,
                out.data() + o * out_stride + off);
    }
    off += blk;
  }

  std::vector<typename Var<Scalar>::NodePtr> nodes;
  std::vector<std::int64_t> blocks;
  nodes.reserve(xs.size());
  for (const auto& x : xs) {
    nodes.push_back(x.node());
    blocks.push_back(static_cast<std::int64_t>(x.value().dim(axis)) * inner);
  }
  return detail::make_op<Scalar>(
      std::move(out), nodes,
      [nodes, blocks, outer, inner, out_stride](detail::Node<Scalar>& nd) {
        std::int64_t off = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          const std::int64_t blk = blocks[i];
          if (nodes[i]->needs_grad) {
            nodes[i]->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o) {
              Scalar* dst = nodes[i]->grad.data() + o * blk;
              const Scalar* src = nd.grad.data() + o * out_stride + off;
              for (std::int64_t j = 0; j < blk; ++j) dst[j] += src[j];
            }
          }
          off += blk;
        }
      });
}

template <typename Scalar>
Var<Scalar> residual_add(const Var<Scalar>& x, const Var<Scalar>& y) {
  detail::require<Scalar>(x.value().same_shape(y.value()),
                          "residual_add: shape mismatch");
  Tensor<Scalar> out = x.value();
  out.array() += y.value().array();
  auto xn = x.node();
  auto yn = y.node();
  return detail::make_op<Scalar>(std::move(out), {xn, yn},
                                 [xn, yn](detail::Node<Scalar>& nd) {
                                   if (xn->needs_grad)
                                     xn->accumulate(nd.grad.array());
                                   if (yn->needs_grad)
                                     yn->accumulate(nd.grad.array());
                                 });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& x, const Var<Scalar>& y) {
  detail::require<Scalar>(x.value().same_shape(y.value()),
                          "mul: shape mismatch");
  Tensor<Scalar> out = x.value();
  out.array() *= y.value().array();
  auto xn = x.node();
  auto yn = y.node();
  return detail::make_op<Scalar>(
      std::move(out), {xn, yn}, [xn, yn](detail::Node<Scalar>& nd) {
        if (xn->needs_grad)
          xn->accumulate(nd.grad.array() * yn->value.array());
        if (yn->needs_grad)
          yn->accumulate(nd.grad.array() * xn->value.array());
      });
}

// Mean absolute error; the subgradient at exact ties is taken as 0.
template <typename Scalar>
Var<Scalar> mae_loss(const Var<Scalar>& pred, const Var<Scalar>& target) {
  detail::require<Scalar>(pred.value().same_shape(target.value()),
                          "mae_loss: shape mismatch");
  const std::int64_t n = pred.value().numel();
  Tensor<Scalar> out({1});
  out[0] = (pred.value().array() - target.value().array()).abs().sum() /
           static_cast<Scalar>(n);
  auto pn = pred.node();
  auto tn = target.node();
  return detail::make_op<Scalar>(
      std::move(out), {pn, tn}, [pn, tn, n](detail::Node<Scalar>& nd) {
        const Scalar g = nd.grad[0] / static_cast<Scalar>(n);
        for (std::int64_t i = 0; i < n; ++i) {
          const Scalar d = pn->value[i] - tn->value[i];
          const Scalar s = d > 0 ? g : (d < 0 ? -g : Scalar(0));
          if (pn->needs_grad) {
            pn->ensure_grad();
            pn->grad[i] += s;
          }
          if (tn->needs_grad) {
            tn->ensure_grad();
            tn->grad[i] -= s;
          }
        }
      });
}

// Reverse-mode sweep from a scalar loss. Parameter gradients accumulate, so
// callers zero them between steps.
template <typename Scalar>
void backward(const Var<Scalar>& loss) {
  detail::require<Scalar>(loss.value().numel() == 1,
                          "backward: loss must be scalar");
  using NodeT = detail::Node<Scalar>;

  // Iterative post-order DFS; inputs visited in construction order keeps the
  // accumulation order deterministic.
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      NodeT* child = node->inputs[idx++].get();
      if (child->needs_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  auto* root = loss.node().get();
  root->ensure_grad();
  root->grad.fill(Scalar(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* node = *it;
    if (node->backward_fn && node->grad.numel() == node->value.numel()) {
      node->backward_fn(*node);
    }
  }
}

}  // namespace fnet

#endif  // FNET_AUTODIFF_HPP
