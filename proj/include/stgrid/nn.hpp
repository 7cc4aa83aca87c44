#pragma once

// Minimal dense / strided-convolution / GRU kernels over flat parameter
// storage. Forward functions overwrite their outputs; backward functions
// accumulate into parameter gradients and overwrite input gradients.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stgrid/errors.hpp"
#include "stgrid/rng.hpp"

namespace stgrid::nn {

// Half-open [offset, offset + size) slice of a flat parameter vector.
struct Slice {
  std::size_t offset = 0;
  std::size_t size = 0;

  template <typename T>
  std::span<T> of(std::span<T> flat) const { return flat.subspan(offset, size); }
  template <typename T>
  std::span<const T> of(std::span<const T> flat) const { return flat.subspan(offset, size); }
};

class Layout {
 public:
  Slice add(std::size_t size) {
    Slice s{total_, size};
    total_ += size;
    return s;
  }
  std::size_t total() const { return total_; }

 private:
  std::size_t total_ = 0;
};

template <typename T>
inline T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }

template <typename T>
inline void tanh_inplace(std::span<T> x) {
  for (T& v : x) v = std::tanh(v);
}

// dx *= 1 - y^2 where y = tanh(pre).
template <typename T>
inline void tanh_backward(std::span<const T> y, std::span<T> dy) {
  for (std::size_t i = 0; i < y.size(); ++i) dy[i] *= T(1) - y[i] * y[i];
}

// y = W x + b with W stored [out][in].
template <typename T>
inline void dense_forward(std::span<const T> W, std::span<const T> b,
                          std::span<const T> x, std::span<T> y) {
  const std::size_t n_in = x.size();
  for (std::size_t o = 0; o < y.size(); ++o) {
    const T* row = W.data() + o * n_in;
    T acc = b[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// dW += dy x', db += dy, dx = W' dy (dx may be empty).
template <typename T>
inline void dense_backward(std::span<const T> W, std::span<const T> x,
                           std::span<const T> dy, std::span<T> dW,
                           std::span<T> db, std::span<T> dx) {
  const std::size_t n_in = x.size();
  if (!dx.empty())
    for (T& v : dx) v = T(0);
  for (std::size_t o = 0; o < dy.size(); ++o) {
    const T g = dy[o];
    db[o] += g;
    if (g == T(0)) continue;
    T* drow = dW.data() + o * n_in;
    const T* row = W.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) drow[i] += g * x[i];
    if (!dx.empty())
      for (std::size_t i = 0; i < n_in; ++i) dx[i] += g * row[i];
  }
}

// 3x3 kernel, stride 2, padding 1. The small side has dims ceil(big / 2).
struct ConvGeometry {
  std::size_t big_c = 0, big_h = 0, big_w = 0;
  std::size_t small_c = 0, small_h = 0, small_w = 0;

  static constexpr std::size_t kK = 3;
  std::size_t big_size() const { return big_c * big_h * big_w; }
  std::size_t small_size() const { return small_c * small_h * small_w; }
  std::size_t weight_size() const { return big_c * small_c * kK * kK; }

  static std::size_t halve(std::size_t n) { return (n + 1) / 2; }
};

// Strided convolution big -> small; W stored [small_c][big_c][3][3].
template <typename T>
inline void conv_forward(const ConvGeometry& g, std::span<const T> W,
                         std::span<const T> b, std::span<const T> in,
                         std::span<T> out) {
  const auto H = static_cast<std::ptrdiff_t>(g.big_h);
  const auto Wd = static_cast<std::ptrdiff_t>(g.big_w);
  for (std::size_t o = 0; o < g.small_c; ++o)
    for (std::size_t y = 0; y < g.small_h; ++y)
      for (std::size_t x = 0; x < g.small_w; ++x) {
        T acc = b[o];
        for (std::size_t i = 0; i < g.big_c; ++i) {
          const T* w = W.data() + (o * g.big_c + i) * 9;
          const T* plane = in.data() + i * g.big_h * g.big_w;
          for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t iy = 2 * static_cast<std::ptrdiff_t>(y) - 1 + ky;
            if (iy < 0 || iy >= H) continue;
            for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t ix = 2 * static_cast<std::ptrdiff_t>(x) - 1 + kx;
              if (ix < 0 || ix >= Wd) continue;
              acc += w[ky * 3 + kx] * plane[iy * Wd + ix];
            }
          }
        }
        out[(o * g.small_h + y) * g.small_w + x] = acc;
      }
}

template <typename T>
inline void conv_backward(const ConvGeometry& g, std::span<const T> W,
                          std::span<const T> in, std::span<const T> dout,
                          std::span<T> dW, std::span<T> db, std::span<T> din) {
  const auto H = static_cast<std::ptrdiff_t>(g.big_h);
  const auto Wd = static_cast<std::ptrdiff_t>(g.big_w);
  if (!din.empty())
    for (T& v : din) v = T(0);
  for (std::size_t o = 0; o < g.small_c; ++o)
    for (std::size_t y = 0; y < g.small_h; ++y)
      for (std::size_t x = 0; x < g.small_w; ++x) {
        const T d = dout[(o * g.small_h + y) * g.small_w + x];
        db[o] += d;
        if (d == T(0)) continue;
        for (std::size_t i = 0; i < g.big_c; ++i) {
          const std::size_t wofs = (o * g.big_c + i) * 9;
          const std::size_t pofs = i * g.big_h * g.big_w;
          for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t iy = 2 * static_cast<std::ptrdiff_t>(y) - 1 + ky;
            if (iy < 0 || iy >= H) continue;
            for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t ix = 2 * static_cast<std::ptrdiff_t>(x) - 1 + kx;
              if (ix < 0 || ix >= Wd) continue;
              const std::size_t p = pofs + static_cast<std::size_t>(iy * Wd + ix);
              dW[wofs + static_cast<std::size_t>(ky * 3 + kx)] += d * in[p];
              if (!din.empty()) din[p] += d * W[wofs + static_cast<std::size_t>(ky * 3 + kx)];
            }
          }
        }
      }
}

// Fractionally-strided convolution small -> big (adjoint geometry of
// conv_forward); W stored [small_c][big_c][3][3], bias per big channel.
template <typename T>
inline void tconv_forward(const ConvGeometry& g, std::span<const T> W,
                          std::span<const T> b, std::span<const T> in,
                          std::span<T> out) {
  const auto H = static_cast<std::ptrdiff_t>(g.big_h);
  const auto Wd = static_cast<std::ptrdiff_t>(g.big_w);
  for (std::size_t o = 0; o < g.big_c; ++o) {
    T* plane = out.data() + o * g.big_h * g.big_w;
    for (std::size_t p = 0; p < g.big_h * g.big_w; ++p) plane[p] = b[o];
  }
  for (std::size_t i = 0; i < g.small_c; ++i)
    for (std::size_t y = 0; y < g.small_h; ++y)
      for (std::size_t x = 0; x < g.small_w; ++x) {
        const T v = in[(i * g.small_h + y) * g.small_w + x];
        if (v == T(0)) continue;
        for (std::size_t o = 0; o < g.big_c; ++o) {
          const T* w = W.data() + (i * g.big_c + o) * 9;
          T* plane = out.data() + o * g.big_h * g.big_w;
          for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t oy = 2 * static_cast<std::ptrdiff_t>(y) - 1 + ky;
            if (oy < 0 || oy >= H) continue;
            for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t ox = 2 * static_cast<std::ptrdiff_t>(x) - 1 + kx;
              if (ox < 0 || ox >= Wd) continue;
              plane[oy * Wd + ox] += v * w[ky * 3 + kx];
            }
          }
        }
      }
}

template <typename T>
inline void tconv_backward(const ConvGeometry& g, std::span<const T> W,
                           std::span<const T> in, std::span<const T> dout,
                           std::span<T> dW, std::span<T> db, std::span<T> din) {
  const auto H = static_cast<std::ptrdiff_t>(g.big_h);
  const auto Wd = static_cast<std::ptrdiff_t>(g.big_w);
  for (std::size_t o = 0; o < g.big_c; ++o) {
    const T* plane = dout.data() + o * g.big_h * g.big_w;
    T s = T(0);
    for (std::size_t p = 0; p < g.big_h * g.big_w; ++p) s += plane[p];
    db[o] += s;
  }
  for (std::size_t i = 0; i < g.small_c; ++i)
    for (std::size_t y = 0; y < g.small_h; ++y)
      for (std::size_t x = 0; x < g.small_w; ++x) {
        const std::size_t src = (i * g.small_h + y) * g.small_w + x;
        const T v = in[src];
        T acc = T(0);
        for (std::size_t o = 0; o < g.big_c; ++o) {
          const std::size_t wofs = (i * g.big_c + o) * 9;
          const T* plane = dout.data() + o * g.big_h * g.big_w;
          for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t oy = 2 * static_cast<std::ptrdiff_t>(y) - 1 + ky;
            if (oy < 0 || oy >= H) continue;
            for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t ox = 2 * static_cast<std::ptrdiff_t>(x) - 1 + kx;
              if (ox < 0 || ox >= Wd) continue;
              const T d = plane[oy * Wd + ox];
              dW[wofs + static_cast<std::size_t>(ky * 3 + kx)] += v * d;
              acc += W[wofs + static_cast<std::size_t>(ky * 3 + kx)] * d;
            }
          }
        }
        if (!din.empty()) din[src] = acc;
      }
}

// Fills a slice with U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
inline void glorot_uniform(std::span<T> w, std::size_t fan_in, std::size_t fan_out,
                           Engine& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (T& v : w) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * a);
}

template <typename T>
inline bool all_finite(std::span<const T> x) {
  for (T v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

// Adam over a flat parameter vector. The learning rate comes from the caller
// each step so an external schedule can drive it.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : m_(n, T(0)), v_(n, T(0)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<T> params, std::span<const T> grad, double lr) {
    if (grad.size() != m_.size() || params.size() != m_.size())
      throw ConfigurationError("Adam: size mismatch");
    if (!all_finite(grad)) throw TrainingDivergenceError("non-finite gradient");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T step = static_cast<T>(lr / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (T(1) - b1) * grad[i];
      v_[i] = b2 * v_[i] + (T(1) - b2) * grad[i] * grad[i];
      params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps);
    }
  }

  long steps() const { return t_; }
  std::vector<T>& first_moment() { return m_; }
  std::vector<T>& second_moment() { return v_; }
  const std::vector<T>& first_moment() const { return m_; }
  const std::vector<T>& second_moment() const { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  std::vector<T> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace stgrid::nn
