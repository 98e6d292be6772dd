#include "metalgan/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace metalgan::ag {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// Geometry of a convolution from an image (c, h, w) to an output grid
// (out_h, out_w). Column matrices have c*k*k rows and n*out_h*out_w columns.
struct Geometry {
  int n, c, h, w, k, stride, pad, out_h, out_w;
  std::size_t rows() const { return static_cast<std::size_t>(c) * k * k; }
  std::size_t cols() const { return static_cast<std::size_t>(n) * out_h * out_w; }
};

template <typename T>
void im2col(const T* x, const Geometry& g, T* cols) {
  const std::size_t ncols = g.cols();
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  for (int c = 0; c < g.c; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        T* dst = cols + (static_cast<std::size_t>(c * g.k + ki) * g.k + kj) * ncols;
        for (int n = 0; n < g.n; ++n) {
          const T* src = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          T* d = dst + n * plane;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ki;
            T* row = d + static_cast<std::size_t>(oy) * g.out_w;
            if (iy < 0 || iy >= g.h) {
              std::fill(row, row + g.out_w, T(0));
              continue;
            }
            const T* srow = src + static_cast<std::size_t>(iy) * g.w;
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.pad + kj;
              row[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back onto the image.
template <typename T>
void col2im(const T* cols, const Geometry& g, T* x) {
  const std::size_t ncols = g.cols();
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  for (int c = 0; c < g.c; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const T* srcc = cols + (static_cast<std::size_t>(c * g.k + ki) * g.k + kj) * ncols;
        for (int n = 0; n < g.n; ++n) {
          T* dst = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          const T* s = srcc + n * plane;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ki;
            if (iy < 0 || iy >= g.h) continue;
            const T* row = s + static_cast<std::size_t>(oy) * g.out_w;
            T* drow = dst + static_cast<std::size_t>(iy) * g.w;
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.pad + kj;
              if (ix >= 0 && ix < g.w) drow[ix] += row[ox];
            }
          }
        }
      }
    }
  }
}

// (N, C, P) <-> (C, N*P)
template <typename T>
void nchw_to_cn(const T* src, int n, int c, std::size_t plane, T* dst) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j)
      std::copy_n(src + (static_cast<std::size_t>(i) * c + j) * plane, plane,
                  dst + static_cast<std::size_t>(j) * n * plane + i * plane);
}

template <typename T>
void cn_to_nchw_add(const T* src, int n, int c, std::size_t plane, T* dst) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T* s = src + static_cast<std::size_t>(j) * n * plane + i * plane;
      T* d = dst + (static_cast<std::size_t>(i) * c + j) * plane;
      for (std::size_t p = 0; p < plane; ++p) d[p] += s[p];
    }
}

// Direct stride-1 convolution for layers with very few output channels, where
// im2col produces a huge column matrix feeding a degenerate GEMM. Inputs are
// zero-padded and outputs are computed on rows of the padded width, so each
// kernel tap is a single contiguous multiply-add over the whole plane; the
// extra columns are discarded.
template <typename T>
struct DirectConv {
  using CVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  const Geometry& g;
  int o;

  int wp() const { return g.w + 2 * g.pad; }
  int hp() const { return g.h + 2 * g.pad; }
  std::size_t wide() const { return static_cast<std::size_t>(g.out_h) * wp(); }
  std::size_t padded() const { return static_cast<std::size_t>(hp()) * wp() + g.k; }  // slack for the last tap

  void pad_plane(const T* src, T* dst) const {
    std::fill(dst, dst + padded(), T(0));
    for (int y = 0; y < g.h; ++y)
      std::copy_n(src + static_cast<std::size_t>(y) * g.w, g.w,
                  dst + static_cast<std::size_t>(y + g.pad) * wp() + g.pad);
  }

  void forward(const T* x, const T* w, T* y) const {
    const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
    const std::size_t len = wide();
    std::vector<T> xpad(static_cast<std::size_t>(g.c) * padded());
    std::vector<T> acc(static_cast<std::size_t>(o) * len);
    for (int n = 0; n < g.n; ++n) {
      for (int c = 0; c < g.c; ++c)
        pad_plane(x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w, xpad.data() + c * padded());
      std::fill(acc.begin(), acc.end(), T(0));
      for (int oc = 0; oc < o; ++oc) {
        T* yo = acc.data() + oc * len;
        for (int c = 0; c < g.c; ++c) {
          const T* xc = xpad.data() + c * padded();
          const T* wk = w + (static_cast<std::size_t>(oc) * g.c + c) * g.k * g.k;
          for (int ki = 0; ki < g.k; ++ki)
            for (int kj = 0; kj < g.k; ++kj) {
              const T wv = wk[ki * g.k + kj];
              const T* xs = xc + static_cast<std::size_t>(ki) * wp() + kj;
              for (std::size_t t = 0; t < len; ++t) yo[t] += wv * xs[t];
            }
        }
        T* dst = y + (static_cast<std::size_t>(n) * o + oc) * plane;
        for (int r = 0; r < g.out_h; ++r)
          std::copy_n(yo + static_cast<std::size_t>(r) * wp(), g.out_w, dst + static_cast<std::size_t>(r) * g.out_w);
      }
    }
  }

  void backward(const T* x, const T* w, const T* dy, T* dx, T* dw) const {
    const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
    const std::size_t len = wide();
    std::vector<T> xpad(dw ? static_cast<std::size_t>(g.c) * padded() : 0);
    std::vector<T> dxpad(dx ? static_cast<std::size_t>(g.c) * padded() : 0);
    std::vector<T> dyw(static_cast<std::size_t>(o) * len);
    for (int n = 0; n < g.n; ++n) {
      if (dw)
        for (int c = 0; c < g.c; ++c)
          pad_plane(x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w, xpad.data() + c * padded());
      if (dx) std::fill(dxpad.begin(), dxpad.end(), T(0));
      std::fill(dyw.begin(), dyw.end(), T(0));
      for (int oc = 0; oc < o; ++oc) {
        const T* src = dy + (static_cast<std::size_t>(n) * o + oc) * plane;
        for (int r = 0; r < g.out_h; ++r)
          std::copy_n(src + static_cast<std::size_t>(r) * g.out_w, g.out_w,
                      dyw.data() + oc * len + static_cast<std::size_t>(r) * wp());
      }
      for (int oc = 0; oc < o; ++oc) {
        const T* d = dyw.data() + oc * len;
        for (int c = 0; c < g.c; ++c) {
          const std::size_t wo = (static_cast<std::size_t>(oc) * g.c + c) * g.k * g.k;
          for (int ki = 0; ki < g.k; ++ki)
            for (int kj = 0; kj < g.k; ++kj) {
              const std::size_t shift = static_cast<std::size_t>(ki) * wp() + kj;
              if (dw) {
                const T* xs = xpad.data() + c * padded() + shift;
                dw[wo + ki * g.k + kj] += CVec(d, len).dot(CVec(xs, len));
              }
              if (dx) {
                const T wv = w[wo + ki * g.k + kj];
                T* xs = dxpad.data() + c * padded() + shift;
                for (std::size_t t = 0; t < len; ++t) xs[t] += wv * d[t];
              }
            }
        }
      }
      if (dx)
        for (int c = 0; c < g.c; ++c) {
          T* dst = dx + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          const T* src = dxpad.data() + c * padded();
          for (int y = 0; y < g.h; ++y)
            for (int xx = 0; xx < g.w; ++xx)
              dst[static_cast<std::size_t>(y) * g.w + xx] += src[static_cast<std::size_t>(y + g.pad) * wp() + xx + g.pad];
        }
    }
  }
};

constexpr int kDirectConvMaxOutputs = 4;

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank)
    throw ConfigError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                      shape_string(s));
}

template <typename T>
void accumulate(Node<T>& target, const T* src) {
  Tensor<T>& g = target.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
}

}  // namespace

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Var<T>(std::move(n));
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var<T>(std::move(n));
}

template <typename T>
Var<T> detach(const Var<T>& v) {
  return constant(v.value());
}

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    for (auto& in : inputs)
      if (in.defined()) n->inputs.push_back(in.node());
    n->backward = std::move(backward_fn);
  }
  return Var<T>(std::move(n));
}

template <typename T>
void backward(const Var<T>& root) {
  if (!root.requires_grad()) return;
  if (root.value().size() != 1) throw ConfigError("backward: root must be a scalar");
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
  require_rank(x.shape(), 4, "conv2d input");
  require_rank(weight.shape(), 4, "conv2d weight");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int o = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c || weight.dim(3) != k)
    throw ConfigError("conv2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
                      shape_string(x.shape()));
  const int out_h = (h + 2 * pad - k) / stride + 1;
  const int out_w = (w + 2 * pad - k) / stride + 1;
  if (out_h < 1 || out_w < 1) throw ConfigError("conv2d: input " + shape_string(x.shape()) + " too small");
  const Geometry g{n, c, h, w, k, stride, pad, out_h, out_w};
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;

  if (stride == 1 && o <= kDirectConvMaxOutputs) {
    Tensor<T> out({n, o, out_h, out_w});
    DirectConv<T>{g, o}.forward(x.value().data(), weight.value().data(), out.data());
    if (bias.defined())
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) {
          T* dst = out.data() + (static_cast<std::size_t>(i) * o + j) * plane;
          for (std::size_t p = 0; p < plane; ++p) dst[p] += bias.value()[j];
        }
    return make_result<T>(std::move(out), {x, weight, bias}, [x, weight, bias, g, o, plane](Node<T>& self) {
      const T* dy = self.grad.data();
      if (bias.defined() && bias.requires_grad()) {
        Tensor<T>& gb = bias.node()->ensure_grad();
        for (int i = 0; i < g.n; ++i)
          for (int j = 0; j < o; ++j) {
            const T* s = dy + (static_cast<std::size_t>(i) * o + j) * plane;
            T acc = 0;
            for (std::size_t p = 0; p < plane; ++p) acc += s[p];
            gb[j] += acc;
          }
      }
      T* dx = x.requires_grad() ? x.node()->ensure_grad().data() : nullptr;
      T* dw = weight.requires_grad() ? weight.node()->ensure_grad().data() : nullptr;
      if (dx || dw) {
        const Geometry gg = g;
        DirectConv<T>{gg, o}.backward(x.value().data(), weight.value().data(), dy, dx, dw);
      }
    });
  }

  std::vector<T> cols(g.rows() * g.cols());
  im2col(x.value().data(), g, cols.data());
  RowMat<T> y = CMapMat<T>(weight.value().data(), o, g.rows()) * CMapMat<T>(cols.data(), g.rows(), g.cols());
  Tensor<T> out({n, o, out_h, out_w});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) {
      const T b = bias.defined() ? bias.value()[j] : T(0);
      const T* src = y.data() + static_cast<std::size_t>(j) * g.cols() + i * plane;
      T* dst = out.data() + (static_cast<std::size_t>(i) * o + j) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] + b;
    }

  const bool need_cols = weight.requires_grad();
  if (!need_cols) cols.clear();
  return make_result<T>(
      std::move(out), {x, weight, bias},
      [x, weight, bias, g, o, plane, cols = std::move(cols)](Node<T>& self) {
        const T* dout = self.grad.data();
        RowMat<T> dy(o, g.cols());
        for (int i = 0; i < g.n; ++i)
          for (int j = 0; j < o; ++j)
            std::copy_n(dout + (static_cast<std::size_t>(i) * o + j) * plane, plane,
                        dy.data() + static_cast<std::size_t>(j) * g.cols() + i * plane);
        if (weight.requires_grad()) {
          Tensor<T>& gw = weight.node()->ensure_grad();
          MapMat<T>(gw.data(), o, g.rows()).noalias() +=
              dy * CMapMat<T>(cols.data(), g.rows(), g.cols()).transpose();
        }
        if (bias.defined() && bias.requires_grad()) {
          Tensor<T>& gb = bias.node()->ensure_grad();
          for (int j = 0; j < o; ++j) gb[j] += dy.row(j).sum();
        }
        if (x.requires_grad()) {
          RowMat<T> dcols = CMapMat<T>(weight.value().data(), o, g.rows()).transpose() * dy;
          col2im(dcols.data(), g, x.node()->ensure_grad().data());
        }
      });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
  require_rank(x.shape(), 4, "conv_transpose2d input");
  require_rank(weight.shape(), 4, "conv_transpose2d weight");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int cout = weight.dim(1), k = weight.dim(2);
  if (weight.dim(0) != cin || weight.dim(3) != k)
    throw ConfigError("conv_transpose2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
                      shape_string(x.shape()));
  const int out_h = (h - 1) * stride - 2 * pad + k;
  const int out_w = (w - 1) * stride - 2 * pad + k;
  // The output image plays the role of the convolution input.
  const Geometry g{n, cout, out_h, out_w, k, stride, pad, h, w};
  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;

  RowMat<T> xm(cin, g.cols());
  nchw_to_cn(x.value().data(), n, cin, in_plane, xm.data());
  RowMat<T> cols = CMapMat<T>(weight.value().data(), cin, g.rows()).transpose() * xm;
  Tensor<T> out({n, cout, out_h, out_w});
  col2im(cols.data(), g, out.data());
  if (bias.defined())
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < cout; ++j) {
        T* dst = out.data() + (static_cast<std::size_t>(i) * cout + j) * out_plane;
        const T b = bias.value()[j];
        for (std::size_t p = 0; p < out_plane; ++p) dst[p] += b;
      }

  if (!weight.requires_grad()) xm.resize(0, 0);
  return make_result<T>(std::move(out), {x, weight, bias},
                        [x, weight, bias, g, cin, cout, in_plane, out_plane, xm = std::move(xm)](Node<T>& self) {
                          const T* dout = self.grad.data();
                          if (bias.defined() && bias.requires_grad()) {
                            Tensor<T>& gb = bias.node()->ensure_grad();
                            for (int i = 0; i < g.n; ++i)
                              for (int j = 0; j < cout; ++j) {
                                const T* s = dout + (static_cast<std::size_t>(i) * cout + j) * out_plane;
                                T acc = 0;
                                for (std::size_t p = 0; p < out_plane; ++p) acc += s[p];
                                gb[j] += acc;
                              }
                          }
                          if (!weight.requires_grad() && !x.requires_grad()) return;
                          RowMat<T> dcols(g.rows(), g.cols());
                          im2col(dout, g, dcols.data());
                          if (weight.requires_grad()) {
                            Tensor<T>& gw = weight.node()->ensure_grad();
                            MapMat<T>(gw.data(), cin, g.rows()).noalias() += xm * dcols.transpose();
                          }
                          if (x.requires_grad()) {
                            RowMat<T> dx = CMapMat<T>(weight.value().data(), cin, g.rows()) * dcols;
                            cn_to_nchw_add(dx.data(), g.n, cin, in_plane, x.node()->ensure_grad().data());
                          }
                        });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  require_rank(x.shape(), 4, "instance_norm input");
  const int n = x.dim(0), c = x.dim(1);
  if (gamma.value().size() != static_cast<std::size_t>(c) || beta.value().size() != static_cast<std::size_t>(c))
    throw ConfigError("instance_norm: affine parameters do not match channel count " + std::to_string(c));
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(static_cast<std::size_t>(n) * c);
  Tensor<T> out(x.shape());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const std::size_t off = (static_cast<std::size_t>(i) * c + j) * plane;
      const T* src = x.value().data() + off;
      T mean = 0;
      for (std::size_t p = 0; p < plane; ++p) mean += src[p];
      mean /= static_cast<T>(plane);
      T var = 0;
      for (std::size_t p = 0; p < plane; ++p) var += (src[p] - mean) * (src[p] - mean);
      var /= static_cast<T>(plane);
      const T is = T(1) / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(i) * c + j] = is;
      const T gm = gamma.value()[j], bt = beta.value()[j];
      for (std::size_t p = 0; p < plane; ++p) {
        const T xh = (src[p] - mean) * is;
        xhat[off + p] = xh;
        out[off + p] = gm * xh + bt;
      }
    }
  return make_result<T>(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, n, c, plane, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        const T* dy = self.grad.data();
        T* gx = x.requires_grad() ? x.node()->ensure_grad().data() : nullptr;
        T* gg = gamma.requires_grad() ? gamma.node()->ensure_grad().data() : nullptr;
        T* gb = beta.requires_grad() ? beta.node()->ensure_grad().data() : nullptr;
        const T m = static_cast<T>(plane);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < c; ++j) {
            const std::size_t off = (static_cast<std::size_t>(i) * c + j) * plane;
            T sum_dy = 0, sum_dy_xh = 0;
            for (std::size_t p = 0; p < plane; ++p) {
              sum_dy += dy[off + p];
              sum_dy_xh += dy[off + p] * xhat[off + p];
            }
            if (gg) gg[j] += sum_dy_xh;
            if (gb) gb[j] += sum_dy;
            if (gx) {
              const T gm = gamma.value()[j];
              const T k = gm * inv_std[static_cast<std::size_t>(i) * c + j] / m;
              for (std::size_t p = 0; p < plane; ++p)
                gx[off + p] += k * (m * dy[off + p] - sum_dy - xhat[off + p] * sum_dy_xh);
            }
          }
      });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu(x, T(0));
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.shape());
  const T* src = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i] > T(0) ? src[i] : slope * src[i];
  return make_result<T>(std::move(out), {x}, [x, slope](Node<T>& self) {
    T* gx = x.node()->ensure_grad().data();
    const T* src = x.value().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += src[i] > T(0) ? self.grad[i] : slope * self.grad[i];
  });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.value()[i]);
  Tensor<T> saved = out;
  return make_result<T>(std::move(out), {x}, [x, saved = std::move(saved)](Node<T>& self) {
    T* gx = x.node()->ensure_grad().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * (T(1) - saved[i] * saved[i]);
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (a.requires_grad()) accumulate(*a.node(), self.grad.data());
    if (b.requires_grad()) accumulate(*b.node(), self.grad.data());
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  require_rank(a.shape(), 4, "concat_channels");
  require_rank(b.shape(), 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw ConfigError("concat_channels: incompatible shapes " + shape_string(a.shape()) + " and " +
                      shape_string(b.shape()));
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  Tensor<T> out({n, ca + cb, a.dim(2), a.dim(3)});
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.value().data() + i * ca * plane, ca * plane, out.data() + i * (ca + cb) * plane);
    std::copy_n(b.value().data() + i * cb * plane, cb * plane, out.data() + (i * (ca + cb) + ca) * plane);
  }
  return make_result<T>(std::move(out), {a, b}, [a, b, n, ca, cb, plane](Node<T>& self) {
    for (int i = 0; i < n; ++i) {
      const T* g = self.grad.data() + i * (ca + cb) * plane;
      if (a.requires_grad()) {
        T* ga = a.node()->ensure_grad().data() + i * ca * plane;
        for (std::size_t p = 0; p < ca * plane; ++p) ga[p] += g[p];
      }
      if (b.requires_grad()) {
        T* gb = b.node()->ensure_grad().data() + i * cb * plane;
        for (std::size_t p = 0; p < cb * plane; ++p) gb[p] += g[ca * plane + p];
      }
    }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  require_rank(x.shape(), 4, "global_avg_pool");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({n, c});
  for (std::size_t i = 0; i < out.size(); ++i) {
    T acc = 0;
    for (std::size_t p = 0; p < plane; ++p) acc += x.value()[i * plane + p];
    out[i] = acc / static_cast<T>(plane);
  }
  return make_result<T>(std::move(out), {x}, [x, plane](Node<T>& self) {
    T* gx = x.node()->ensure_grad().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      for (std::size_t p = 0; p < plane; ++p) gx[i * plane + p] += self.grad[i] / static_cast<T>(plane);
  });
}

template <typename T>
Var<T> l1_mean(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "l1_mean");
  const std::size_t count = a.value().size();
  if (count == 0) throw ConfigError("l1_mean: empty input");
  T acc = 0;
  for (std::size_t i = 0; i < count; ++i) acc += std::abs(a.value()[i] - b.value()[i]);
  Tensor<T> out(Shape{}, acc / static_cast<T>(count));
  return make_result<T>(std::move(out), {a, b}, [a, b, count](Node<T>& self) {
    const T g = self.grad[0] / static_cast<T>(count);
    T* ga = a.requires_grad() ? a.node()->ensure_grad().data() : nullptr;
    T* gb = b.requires_grad() ? b.node()->ensure_grad().data() : nullptr;
    for (std::size_t i = 0; i < count; ++i) {
      const T d = a.value()[i] - b.value()[i];
      const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
      if (ga) ga[i] += s;
      if (gb) gb[i] -= s;
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return make_result<T>(std::move(out), {a}, [a, factor](Node<T>& self) {
    T* ga = a.node()->ensure_grad().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * factor;
  });
}

template <typename T>
Var<T> sum_scalars(const std::vector<Var<T>>& terms) {
  T acc = 0;
  for (const auto& t : terms) {
    if (t.value().size() != 1) throw ConfigError("sum_scalars: non-scalar term " + shape_string(t.shape()));
    acc += t.value()[0];
  }
  return make_result<T>(Tensor<T>(Shape{}, acc), terms, [terms](Node<T>& self) {
    for (const auto& t : terms)
      if (t.requires_grad()) t.node()->ensure_grad()[0] += self.grad[0];
  });
}

#define METALGAN_INSTANTIATE(T)                                                                     \
  template Var<T> constant(Tensor<T>);                                                              \
  template Var<T> parameter(Tensor<T>);                                                             \
  template Var<T> detach(const Var<T>&);                                                            \
  template Var<T> make_result(Tensor<T>, std::vector<Var<T>>, std::function<void(Node<T>&)>);      \
  template void backward(const Var<T>&);                                                            \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                    \
  template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);          \
  template Var<T> instance_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                    \
  template Var<T> relu(const Var<T>&);                                                              \
  template Var<T> leaky_relu(const Var<T>&, T);                                                     \
  template Var<T> tanh(const Var<T>&);                                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);                                    \
  template Var<T> global_avg_pool(const Var<T>&);                                                   \
  template Var<T> l1_mean(const Var<T>&, const Var<T>&);                                            \
  template Var<T> scale(const Var<T>&, T);                                                          \
  template Var<T> sum_scalars(const std::vector<Var<T>>&);

METALGAN_INSTANTIATE(float)
METALGAN_INSTANTIATE(double)

}  // namespace metalgan::ag
