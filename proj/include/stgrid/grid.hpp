#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "stgrid/errors.hpp"

namespace stgrid {

// Dense (channel, row, col) tensor of 64-bit reals, row-major inside a channel.
class Grid3 {
 public:
  Grid3() = default;
  Grid3(std::size_t channels, std::size_t rows, std::size_t cols,
        double fill = 0.0)
      : channels_(channels), rows_(rows), cols_(cols),
        data_(channels * rows * cols, fill) {
    if (channels == 0 || rows == 0 || cols == 0)
      throw ConfigurationError("Grid3 dims must be positive");
  }

  std::size_t channels() const { return channels_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t plane() const { return rows_ * cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data_[index(c, i, j)];
  }
  double operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[index(c, i, j)];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Copy of the channel column at one cell.
  std::vector<double> column(std::size_t i, std::size_t j) const {
    std::vector<double> out(channels_);
    for (std::size_t c = 0; c < channels_; ++c) out[c] = (*this)(c, i, j);
    return out;
  }

  bool same_shape(const Grid3& other) const {
    return channels_ == other.channels_ && rows_ == other.rows_ &&
           cols_ == other.cols_;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  std::size_t index(std::size_t c, std::size_t i, std::size_t j) const {
#ifdef STGRID_BOUNDS_CHECK
    if (c >= channels_ || i >= rows_ || j >= cols_)
      throw DomainError("Grid3 index out of range");
#endif
    return (c * rows_ + i) * cols_ + j;
  }

  std::size_t channels_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Correlation kernel with layout (out-state, in-state, kernel-row, kernel-col)
// plus one bias per out-state. Kernel extents are odd so the window centers.
class Kernel4 {
 public:
  Kernel4() = default;
  Kernel4(std::size_t states, std::size_t kh, std::size_t kw)
      : states_(states), kh_(kh), kw_(kw),
        weights_(states * states * kh * kw, 0.0), bias_(states, 0.0) {
    if (states == 0) throw ConfigurationError("Kernel4 needs at least one state");
    if (kh % 2 == 0 || kw % 2 == 0)
      throw ConfigurationError("Kernel4 extents must be odd");
  }

  std::size_t states() const { return states_; }
  std::size_t kernel_rows() const { return kh_; }
  std::size_t kernel_cols() const { return kw_; }

  double& w(std::size_t out, std::size_t in, std::size_t r, std::size_t c) {
    return weights_[index(out, in, r, c)];
  }
  double w(std::size_t out, std::size_t in, std::size_t r, std::size_t c) const {
    return weights_[index(out, in, r, c)];
  }
  double& bias(std::size_t m) { return bias_.at(m); }
  double bias(std::size_t m) const { return bias_.at(m); }

  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> biases() const { return bias_; }

  // Nonnegative weights and strictly positive bias keep phi strictly positive.
  bool simulator_admissible() const {
    for (double v : weights_)
      if (!(v >= 0.0)) return false;
    for (double b : bias_)
      if (!(b > 0.0)) return false;
    return true;
  }

  // Centered per-state delta: the identity transition.
  static Kernel4 identity(std::size_t states, std::size_t kh = 3,
                          std::size_t kw = 3) {
    Kernel4 k(states, kh, kw);
    for (std::size_t m = 0; m < states; ++m) k.w(m, m, kh / 2, kw / 2) = 1.0;
    return k;
  }

  friend bool operator==(const Kernel4&, const Kernel4&) = default;

 private:
  std::size_t index(std::size_t out, std::size_t in, std::size_t r,
                    std::size_t c) const {
#ifdef STGRID_BOUNDS_CHECK
    if (out >= states_ || in >= states_ || r >= kh_ || c >= kw_)
      throw DomainError("Kernel4 index out of range");
#endif
    return ((out * states_ + in) * kh_ + r) * kw_ + c;
  }

  std::size_t states_ = 0;
  std::size_t kh_ = 1;
  std::size_t kw_ = 1;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// out[m,i,j] = bias[m] + sum_n sum_{r,c} w[m,n,r,c] * in[n, i+r-cy, j+c-cx]
// with zero padding outside the grid.
inline Grid3 cross_correlate(const Grid3& input, const Kernel4& kernel) {
  const std::size_t S = kernel.states();
  if (input.channels() != S)
    throw ConfigurationError("cross_correlate: input has " +
                             std::to_string(input.channels()) +
                             " channels, kernel expects " + std::to_string(S));
  const auto H = static_cast<std::ptrdiff_t>(input.rows());
  const auto W = static_cast<std::ptrdiff_t>(input.cols());
  const auto kh = static_cast<std::ptrdiff_t>(kernel.kernel_rows());
  const auto kw = static_cast<std::ptrdiff_t>(kernel.kernel_cols());
  const std::ptrdiff_t cy = kh / 2, cx = kw / 2;

  Grid3 out(S, input.rows(), input.cols());
  for (std::size_t m = 0; m < S; ++m) {
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        double acc = kernel.bias(m);
        for (std::size_t n = 0; n < S; ++n) {
          for (std::ptrdiff_t r = 0; r < kh; ++r) {
            const std::ptrdiff_t y = i + r - cy;
            if (y < 0 || y >= H) continue;
            for (std::ptrdiff_t c = 0; c < kw; ++c) {
              const std::ptrdiff_t x = j + c - cx;
              if (x < 0 || x >= W) continue;
              acc += kernel.w(m, n, r, c) * input(n, y, x);
            }
          }
        }
        out(m, i, j) = acc;
      }
    }
  }
  if (!out.all_finite())
    throw DomainError("cross_correlate produced a non-finite value");
  return out;
}

// Per-cell division by the channel sum.
inline Grid3 normalize_channels(const Grid3& phi) {
  Grid3 out(phi.channels(), phi.rows(), phi.cols());
  for (std::size_t i = 0; i < phi.rows(); ++i) {
    for (std::size_t j = 0; j < phi.cols(); ++j) {
      double total = 0.0;
      for (std::size_t c = 0; c < phi.channels(); ++c) {
        const double v = phi(c, i, j);
        if (!(v > 0.0) || !std::isfinite(v))
          throw DomainError("normalize_channels: nonpositive entry at (" +
                            std::to_string(i) + "," + std::to_string(j) +
                            "); simulator kernel is invalid");
        total += v;
      }
      for (std::size_t c = 0; c < phi.channels(); ++c)
        out(c, i, j) = phi(c, i, j) / total;
    }
  }
  return out;
}

// -sum p ln p with 0 ln 0 = 0.
inline double shannon_entropy(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12))
      throw DomainError("shannon_entropy: entry outside [0,1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DomainError("shannon_entropy: column does not sum to 1");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h < 0.0 ? 0.0 : h;
}

}  // namespace stgrid
