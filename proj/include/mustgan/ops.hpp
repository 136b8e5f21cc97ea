#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "mustgan/autograd.hpp"

/// Differentiable operators over (C, H, W) grids. Each op computes its value eagerly and
/// attaches a closure that pushes the output gradient into its parents.
namespace mustgan::ops {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

inline int kernel_side(const Shape& weight) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(weight.w))));
  if (k * k != weight.w) fail("shape_mismatch", "conv weight " + weight.str() + " is not (Cout, Cin, k*k)");
  return k;
}

template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, int pad, int ho, int wo, Storage<T>& cols) {
  const int cin = x.channels(), h = x.height(), w = x.width();
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  cols.assign(static_cast<std::size_t>(cin) * k * k * p, T(0));
  for (int ci = 0; ci < cin; ++ci) {
    const T* src = x.channel(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          const T* srow = src + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ox] = srow[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, int k, int stride, int pad, int ho, int wo, Tensor<T>& dx) {
  const int cin = dx.channels(), h = dx.height(), w = dx.width();
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < cin; ++ci) {
    T* dst = dx.channel(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* drow = dst + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) drow[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Per-axis bilinear taps for 2x upsampling with half-pixel centers.
struct Taps {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

inline Taps upsample_taps(int n) {
  Taps t;
  for (int o = 0; o < 2 * n; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    int i1 = std::min(i0 + 1, n - 1);
    t.i0.push_back(i0);
    t.i1.push_back(i1);
    t.frac.push_back(src - i0);
  }
  return t;
}

template <typename T>
void normalize_channels(const Tensor<T>& x, T eps, Tensor<T>& xhat, std::vector<T>& inv_std) {
  const int c = x.channels();
  const std::size_t n = x.shape().plane();
  xhat = Tensor<T>(x.shape());
  inv_std.assign(static_cast<std::size_t>(c), T(0));
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x.channel(ch);
    T mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += src[i];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<T>(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(ch)] = is;
    T* dst = xhat.channel(ch);
    for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - mean) * is;
  }
}

// dx for xhat = (x - mean) * inv_std given d(xhat).
template <typename T>
void normalize_backward(const Tensor<T>& xhat, const std::vector<T>& inv_std, const Tensor<T>& dxhat, Tensor<T>& dx) {
  const std::size_t n = xhat.shape().plane();
  for (int ch = 0; ch < xhat.channels(); ++ch) {
    const T* g = dxhat.channel(ch);
    const T* xh = xhat.channel(ch);
    T mg = 0, mgx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mg += g[i];
      mgx += g[i] * xh[i];
    }
    mg /= static_cast<T>(n);
    mgx /= static_cast<T>(n);
    const T is = inv_std[static_cast<std::size_t>(ch)];
    T* d = dx.channel(ch);
    for (std::size_t i = 0; i < n; ++i) d[i] += is * (g[i] - mg - xh[i] * mgx);
  }
}

}  // namespace detail

/// 2D convolution. weight: (Cout, Cin, k*k); bias: (Cout, 1, 1) or null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride = 1, int pad = 0) {
  using namespace detail;
  const Shape& xs = x->shape();
  const Shape& ws = weight->shape();
  const int k = kernel_side(ws);
  if (ws.h != xs.c)
    fail("channel_mismatch", "conv expects " + std::to_string(ws.h) + " input channels, got " + xs.str());
  if (bias && bias->value.size() != static_cast<std::size_t>(ws.c)) fail("shape_mismatch", "conv bias length");
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) fail("shape_mismatch", "conv output empty for input " + xs.str());
  const int cout = ws.c;
  const int kk = xs.c * k * k;
  const int p = ho * wo;
  const bool direct = (k == 1 && stride == 1 && pad == 0);

  Storage<T> cols;
  if (!direct) im2col(x->value, k, stride, pad, ho, wo, cols);
  const T* colp = direct ? x->value.data() : cols.data();

  Tensor<T> out(cout, ho, wo);
  MapMat<T>(out.data(), cout, p).noalias() = CMapMat<T>(weight->value.data(), cout, kk) * CMapMat<T>(colp, kk, p);
  if (bias) {
    for (int co = 0; co < cout; ++co) {
      T* o = out.channel(co);
      const T b = bias->value[static_cast<std::size_t>(co)];
      for (int i = 0; i < p; ++i) o[i] += b;
    }
  }
  std::vector<Var<T>> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_op<T>(std::move(out), std::move(parents),
                    [cols = std::move(cols), k, stride, pad, ho, wo, cout, kk, p, direct](Node<T>& self) {
                      auto& xin = self.parents[0];
                      auto& wt = self.parents[1];
                      CMapMat<T> g(self.grad.data(), cout, p);
                      const T* colp = direct ? xin->value.data() : cols.data();
                      if (wt->requires_grad)
                        MapMat<T>(wt->grad_buffer().data(), cout, kk).noalias() += g * CMapMat<T>(colp, kk, p).transpose();
                      if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                        auto& db = self.parents[2]->grad_buffer();
                        for (int co = 0; co < cout; ++co) db[static_cast<std::size_t>(co)] += g.row(co).sum();
                      }
                      if (xin->requires_grad) {
                        auto& dx = xin->grad_buffer();
                        if (direct) {
                          MapMat<T>(dx.data(), kk, p).noalias() += CMapMat<T>(wt->value.data(), cout, kk).transpose() * g;
                        } else {
                          RowMat<T> dcols = CMapMat<T>(wt->value.data(), cout, kk).transpose() * g;
                          col2im(dcols.data(), k, stride, pad, ho, wo, dx);
                        }
                      }
                    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  a->value.require_same(b->value, "add");
  Tensor<T> out = a->value;
  out += b->value;
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad_buffer() += self.grad;
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a->value;
  for (auto& v : out.values()) v *= s;
  return make_op<T>(std::move(out), {a}, [s](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

/// Leaky rectifier; slope 0 gives the plain rectifier.
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out = x->value;
  for (auto& v : out.values())
    if (v < 0) v *= slope;
  return make_op<T>(std::move(out), {x}, [slope](Node<T>& self) {
    const auto& xv = self.parents[0]->value;
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (xv[i] < 0 ? slope : T(1)) * self.grad[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu(x, T(0));
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out = x->value;
  for (auto& v : out.values()) v = std::tanh(v);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (T(1) - self.value[i] * self.value[i]) * self.grad[i];
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = x->value;
  for (auto& v : out.values()) v = T(1) / (T(1) + std::exp(-v));
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.value[i] * (T(1) - self.value[i]) * self.grad[i];
  });
}

/// Per-channel spatial normalization without affine parameters.
template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  Tensor<T> xhat;
  std::vector<T> inv_std;
  detail::normalize_channels(x->value, eps, xhat, inv_std);
  Tensor<T> out = xhat;
  return make_op<T>(std::move(out), {x}, [inv_std = std::move(inv_std)](Node<T>& self) {
    detail::normalize_backward(self.value, inv_std, self.grad, self.parents[0]->grad_buffer());
  });
}

/// Adaptive instance normalization: scale_c * (x_c - mean_c) / sqrt(var_c + eps) + bias_c.
template <typename T>
Var<T> adain(const Var<T>& x, const Var<T>& scale_v, const Var<T>& bias_v, T eps) {
  const std::size_t c = static_cast<std::size_t>(x->shape().c);
  if (scale_v->value.size() != c || bias_v->value.size() != c)
    fail("length_mismatch", "adain modulation length " + std::to_string(scale_v->value.size()) + "/" +
                                std::to_string(bias_v->value.size()) + " for " + std::to_string(c) + " channels");
  Tensor<T> xhat;
  std::vector<T> inv_std;
  detail::normalize_channels(x->value, eps, xhat, inv_std);
  Tensor<T> out(x->shape());
  const std::size_t n = x->shape().plane();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T s = scale_v->value[ch], b = bias_v->value[ch];
    const T* xh = xhat.channel(static_cast<int>(ch));
    T* o = out.channel(static_cast<int>(ch));
    for (std::size_t i = 0; i < n; ++i) o[i] = s * xh[i] + b;
  }
  return make_op<T>(std::move(out), {x, scale_v, bias_v},
                    [xhat = std::move(xhat), inv_std = std::move(inv_std), c, n](Node<T>& self) {
                      auto& xin = self.parents[0];
                      auto& sv = self.parents[1];
                      auto& bv = self.parents[2];
                      for (std::size_t ch = 0; ch < c; ++ch) {
                        const T* g = self.grad.channel(static_cast<int>(ch));
                        const T* xh = xhat.channel(static_cast<int>(ch));
                        T gs = 0, gb = 0;
                        for (std::size_t i = 0; i < n; ++i) {
                          gs += g[i] * xh[i];
                          gb += g[i];
                        }
                        if (sv->requires_grad) sv->grad_buffer()[ch] += gs;
                        if (bv->requires_grad) bv->grad_buffer()[ch] += gb;
                      }
                      if (xin->requires_grad) {
                        Tensor<T> dxhat(self.grad.shape());
                        for (std::size_t ch = 0; ch < c; ++ch) {
                          const T s = sv->value[ch];
                          const T* g = self.grad.channel(static_cast<int>(ch));
                          T* d = dxhat.channel(static_cast<int>(ch));
                          for (std::size_t i = 0; i < n; ++i) d[i] = s * g[i];
                        }
                        detail::normalize_backward(xhat, inv_std, dxhat, xin->grad_buffer());
                      }
                    });
}

/// Spatial global average pooling to (C, 1, 1).
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const int c = x->shape().c;
  const std::size_t n = x->shape().plane();
  Tensor<T> out(c, 1, 1);
  for (int ch = 0; ch < c; ++ch) {
    const T* s = x->value.channel(ch);
    double acc = 0;  // double accumulation keeps the result independent of pixel order
    for (std::size_t i = 0; i < n; ++i) acc += s[i];
    out[static_cast<std::size_t>(ch)] = static_cast<T>(acc / static_cast<double>(n));
  }
  return make_op<T>(std::move(out), {x}, [c, n](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int ch = 0; ch < c; ++ch) {
      const T v = self.grad[static_cast<std::size_t>(ch)] / static_cast<T>(n);
      T* d = g.channel(ch);
      for (std::size_t i = 0; i < n; ++i) d[i] += v;
    }
  });
}

/// Fully connected layer on a (n, 1, 1) vector. weight: (m, n, 1); bias: (m, 1, 1).
template <typename T>
Var<T> linear(const Var<T>& v, const Var<T>& weight, const Var<T>& bias) {
  using namespace detail;
  const int m = weight->shape().c, n = weight->shape().h;
  if (static_cast<int>(v->value.size()) != n)
    fail("length_mismatch", "linear expects input length " + std::to_string(n) + ", got " +
                                std::to_string(v->value.size()));
  Tensor<T> out(m, 1, 1);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> o(out.data(), m);
  o.noalias() = CMapMat<T>(weight->value.data(), m, n) * Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(v->value.data(), n);
  for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] += bias->value[static_cast<std::size_t>(i)];
  return make_op<T>(std::move(out), {v, weight, bias}, [m, n](Node<T>& self) {
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    Eigen::Map<const Vec> g(self.grad.data(), m);
    auto& in = self.parents[0];
    auto& wt = self.parents[1];
    auto& b = self.parents[2];
    if (wt->requires_grad)
      MapMat<T>(wt->grad_buffer().data(), m, n).noalias() += g * Eigen::Map<const Vec>(in->value.data(), n).transpose();
    if (b->requires_grad) b->grad_buffer() += self.grad;
    if (in->requires_grad)
      Eigen::Map<Vec>(in->grad_buffer().data(), n).noalias() += CMapMat<T>(wt->value.data(), m, n).transpose() * g;
  });
}

/// Multiplies channel c of x by w[c]; w is (C, 1, 1).
template <typename T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& w) {
  const int c = x->shape().c;
  if (static_cast<int>(w->value.size()) != c) fail("channel_mismatch", "channel_scale weight length");
  const std::size_t n = x->shape().plane();
  Tensor<T> out = x->value;
  for (int ch = 0; ch < c; ++ch) {
    T* o = out.channel(ch);
    const T s = w->value[static_cast<std::size_t>(ch)];
    for (std::size_t i = 0; i < n; ++i) o[i] *= s;
  }
  return make_op<T>(std::move(out), {x, w}, [c, n](Node<T>& self) {
    auto& xin = self.parents[0];
    auto& wv = self.parents[1];
    for (int ch = 0; ch < c; ++ch) {
      const T* g = self.grad.channel(ch);
      if (wv->requires_grad) {
        const T* xs = xin->value.channel(ch);
        T acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += g[i] * xs[i];
        wv->grad_buffer()[static_cast<std::size_t>(ch)] += acc;
      }
      if (xin->requires_grad) {
        const T s = wv->value[static_cast<std::size_t>(ch)];
        T* d = xin->grad_buffer().channel(ch);
        for (std::size_t i = 0; i < n; ++i) d[i] += s * g[i];
      }
    }
  });
}

/// Per-channel spatial mean and population variance, returned as (2C, 1, 1) = [mean; var].
template <typename T>
Var<T> moments(const Var<T>& x) {
  const int c = x->shape().c;
  const std::size_t n = x->shape().plane();
  Tensor<T> out(2 * c, 1, 1);
  for (int ch = 0; ch < c; ++ch) {
    const T* s = x->value.channel(ch);
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += s[i];
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (s[i] - mean) * (s[i] - mean);
    out[static_cast<std::size_t>(ch)] = static_cast<T>(mean);
    out[static_cast<std::size_t>(c + ch)] = static_cast<T>(var / static_cast<double>(n));
  }
  return make_op<T>(std::move(out), {x}, [c, n](Node<T>& self) {
    auto& xin = self.parents[0];
    auto& dx = xin->grad_buffer();
    const T inv_n = T(1) / static_cast<T>(n);
    for (int ch = 0; ch < c; ++ch) {
      const T gm = self.grad[static_cast<std::size_t>(ch)];
      const T gv = self.grad[static_cast<std::size_t>(c + ch)];
      const T mean = self.value[static_cast<std::size_t>(ch)];
      const T* s = xin->value.channel(ch);
      T* d = dx.channel(ch);
      for (std::size_t i = 0; i < n; ++i) d[i] += inv_n * (gm + T(2) * (s[i] - mean) * gv);
    }
  });
}

/// Channels [begin, begin + count) of x.
template <typename T>
Var<T> slice_channels(const Var<T>& x, int begin, int count) {
  const Shape& s = x->shape();
  if (begin < 0 || count <= 0 || begin + count > s.c) fail("shape_mismatch", "slice out of range of " + s.str());
  Tensor<T> out(count, s.h, s.w);
  const std::size_t off = static_cast<std::size_t>(begin) * s.plane();
  std::copy(x->value.data() + off, x->value.data() + off + out.size(), out.data());
  return make_op<T>(std::move(out), {x}, [off](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[off + i] += self.grad[i];
  });
}

template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b) {
  Tensor<T> out = concat_channels(a->value, b->value);
  const std::size_t na = a->value.size();
  return make_op<T>(std::move(out), {a, b}, [na](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < na; ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[na + i];
    }
  });
}

/// 2x bilinear upsampling with half-pixel centers (edge-clamped).
template <typename T>
Var<T> upsample_bilinear2x(const Var<T>& x) {
  const Shape s = x->shape();
  auto ty = detail::upsample_taps(s.h);
  auto tx = detail::upsample_taps(s.w);
  const int ho = 2 * s.h, wo = 2 * s.w;
  Tensor<T> out(s.c, ho, wo);
  for (int ch = 0; ch < s.c; ++ch) {
    const T* src = x->value.channel(ch);
    T* dst = out.channel(ch);
    for (int oy = 0; oy < ho; ++oy) {
      const T fy = static_cast<T>(ty.frac[oy]);
      const T* r0 = src + static_cast<std::size_t>(ty.i0[oy]) * s.w;
      const T* r1 = src + static_cast<std::size_t>(ty.i1[oy]) * s.w;
      for (int ox = 0; ox < wo; ++ox) {
        const T fx = static_cast<T>(tx.frac[ox]);
        const int x0 = tx.i0[ox], x1 = tx.i1[ox];
        const T top = r0[x0] + fx * (r0[x1] - r0[x0]);
        const T bot = r1[x0] + fx * (r1[x1] - r1[x0]);
        dst[static_cast<std::size_t>(oy) * wo + ox] = top + fy * (bot - top);
      }
    }
  }
  return make_op<T>(std::move(out), {x}, [s, ty = std::move(ty), tx = std::move(tx), ho, wo](Node<T>& self) {
    auto& dx = self.parents[0]->grad_buffer();
    for (int ch = 0; ch < s.c; ++ch) {
      const T* g = self.grad.channel(ch);
      T* d = dx.channel(ch);
      for (int oy = 0; oy < ho; ++oy) {
        const T fy = static_cast<T>(ty.frac[oy]);
        T* r0 = d + static_cast<std::size_t>(ty.i0[oy]) * s.w;
        T* r1 = d + static_cast<std::size_t>(ty.i1[oy]) * s.w;
        for (int ox = 0; ox < wo; ++ox) {
          const T fx = static_cast<T>(tx.frac[ox]);
          const T gv = g[static_cast<std::size_t>(oy) * wo + ox];
          const T gt = gv * (T(1) - fy), gb = gv * fy;
          r0[tx.i0[ox]] += gt * (T(1) - fx);
          r0[tx.i1[ox]] += gt * fx;
          r1[tx.i0[ox]] += gb * (T(1) - fx);
          r1[tx.i1[ox]] += gb * fx;
        }
      }
    }
  });
}

/// 2x2 average pooling, stride 2. Spatial sizes must be even.
template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
  const Shape s = x->shape();
  if (s.h % 2 || s.w % 2) fail("shape_mismatch", "avg_pool2 needs even spatial size, got " + s.str());
  const int ho = s.h / 2, wo = s.w / 2;
  Tensor<T> out(s.c, ho, wo);
  for (int ch = 0; ch < s.c; ++ch)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx)
        out.at(ch, y, xx) = T(0.25) * (x->value.at(ch, 2 * y, 2 * xx) + x->value.at(ch, 2 * y, 2 * xx + 1) +
                                       x->value.at(ch, 2 * y + 1, 2 * xx) + x->value.at(ch, 2 * y + 1, 2 * xx + 1));
  return make_op<T>(std::move(out), {x}, [s, ho, wo](Node<T>& self) {
    auto& dx = self.parents[0]->grad_buffer();
    for (int ch = 0; ch < s.c; ++ch)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) {
          const T g = T(0.25) * self.grad.at(ch, y, xx);
          dx.at(ch, 2 * y, 2 * xx) += g;
          dx.at(ch, 2 * y, 2 * xx + 1) += g;
          dx.at(ch, 2 * y + 1, 2 * xx) += g;
          dx.at(ch, 2 * y + 1, 2 * xx + 1) += g;
        }
  });
}

/// Mean absolute difference as a scalar. The subgradient at zero difference is 0.
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  a->value.require_same(b->value, "mean_abs_diff");
  const std::size_t n = a->value.size();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(a->value[i] - b->value[i]);
  Tensor<T> out(1, 1, 1, acc / static_cast<T>(n));
  return make_op<T>(std::move(out), {a, b}, [n](Node<T>& self) {
    const T g = self.grad[0] / static_cast<T>(n);
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    for (int side = 0; side < 2; ++side) {
      auto& p = self.parents[static_cast<std::size_t>(side)];
      if (!p->requires_grad) continue;
      const T sgn = side == 0 ? T(1) : T(-1);
      auto& d = p->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const T diff = av[i] - bv[i];
        if (diff > 0) d[i] += sgn * g;
        else if (diff < 0) d[i] -= sgn * g;
      }
    }
  });
}

/// Gram matrix F F^T / (C H W) of the (C, H*W) flattening, as a (C, C, 1) tensor.
template <typename T>
Var<T> gram(const Var<T>& x) {
  using namespace detail;
  const int c = x->shape().c;
  const int n = static_cast<int>(x->shape().plane());
  const T norm = T(1) / static_cast<T>(static_cast<double>(c) * n);
  Tensor<T> out(c, c, 1);
  CMapMat<T> f(x->value.data(), c, n);
  MapMat<T> o(out.data(), c, c);
  o.noalias() = norm * (f * f.transpose());
  // mirror the lower triangle: the product's summation order differs between (i, j) and (j, i)
  for (int i = 0; i < c; ++i)
    for (int j = i + 1; j < c; ++j) o(i, j) = o(j, i);
  return make_op<T>(std::move(out), {x}, [c, n, norm](Node<T>& self) {
    auto& xin = self.parents[0];
    CMapMat<T> g(self.grad.data(), c, c);
    CMapMat<T> f(xin->value.data(), c, n);
    RowMat<T> sym = g + g.transpose();
    MapMat<T>(xin->grad_buffer().data(), c, n).noalias() += norm * (sym * f);
  });
}

/// (s - target)^2 for a scalar s.
template <typename T>
Var<T> squared_error(const Var<T>& s, T target) {
  if (s->value.size() != 1) fail("shape_mismatch", "squared_error expects a scalar");
  const T d = s->value[0] - target;
  return make_op<T>(Tensor<T>(1, 1, 1, d * d), {s}, [d](Node<T>& self) {
    self.parents[0]->grad_buffer()[0] += T(2) * d * self.grad[0];
  });
}

/// sum_i w_i * x_i over scalar terms.
template <typename T>
Var<T> weighted_sum(const std::vector<std::pair<T, Var<T>>>& terms) {
  T acc = 0;
  std::vector<Var<T>> parents;
  std::vector<T> weights;
  for (const auto& [w, v] : terms) {
    if (v->value.size() != 1) fail("shape_mismatch", "weighted_sum expects scalars");
    acc += w * v->value[0];
    parents.push_back(v);
    weights.push_back(w);
  }
  return make_op<T>(Tensor<T>(1, 1, 1, acc), std::move(parents), [weights = std::move(weights)](Node<T>& self) {
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (self.parents[i]->requires_grad) self.parents[i]->grad_buffer()[0] += weights[i] * self.grad[0];
  });
}

template <typename T>
T scalar(const Var<T>& v) {
  return v->value[0];
}

}  // namespace mustgan::ops
