#pragma once

// Independent reference implementations used only by tests. They follow the
// textbook definitions with no shared code paths beyond plain containers.

#include <cmath>
#include <random>
#include <vector>

#include "stgrid/environment.hpp"

namespace oracle {

// Quadruple loop over (out-state, row, col) x (in-state, window) with explicit
// zero padding.
inline std::vector<double> correlate(const std::vector<double>& in, int S, int H, int W,
                                     const std::vector<double>& w, const std::vector<double>& b,
                                     int kh, int kw) {
  std::vector<double> out(static_cast<size_t>(S * H * W));
  for (int m = 0; m < S; ++m)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        double acc = b[static_cast<size_t>(m)];
        for (int n = 0; n < S; ++n)
          for (int r = 0; r < kh; ++r)
            for (int c = 0; c < kw; ++c) {
              const int y = i + r - kh / 2, x = j + c - kw / 2;
              const double v = (y < 0 || y >= H || x < 0 || x >= W)
                                   ? 0.0
                                   : in[static_cast<size_t>((n * H + y) * W + x)];
              acc += w[static_cast<size_t>(((m * S + n) * kh + r) * kw + c)] * v;
            }
        out[static_cast<size_t>((m * H + i) * W + j)] = acc;
      }
  return out;
}

inline std::vector<double> normalize(const std::vector<double>& phi, int S, int H, int W) {
  std::vector<double> out(phi.size());
  for (int i = 0; i < H * W; ++i) {
    double s = 0.0;
    for (int m = 0; m < S; ++m) s += phi[static_cast<size_t>(m * H * W + i)];
    for (int m = 0; m < S; ++m)
      out[static_cast<size_t>(m * H * W + i)] = phi[static_cast<size_t>(m * H * W + i)] / s;
  }
  return out;
}

// Normalized elementwise product.
inline std::vector<double> bayes(const std::vector<double>& prior, const std::vector<double>& lik) {
  std::vector<double> post(prior.size());
  double s = 0.0;
  for (size_t m = 0; m < prior.size(); ++m) s += (post[m] = prior[m] * lik[m]);
  for (double& v : post) v /= s;
  return post;
}

inline stgrid::Grid3 to_grid(const std::vector<double>& v, int S, int H, int W) {
  stgrid::Grid3 g(static_cast<size_t>(S), static_cast<size_t>(H), static_cast<size_t>(W));
  for (size_t i = 0; i < v.size(); ++i) g.data()[i] = v[i];
  return g;
}

inline std::vector<double> from_grid(const stgrid::Grid3& g) {
  return {g.data().begin(), g.data().end()};
}

inline stgrid::Kernel4 random_kernel(int S, int kh, int kw, std::mt19937_64& rng, double lo,
                                     double hi, double blo, double bhi) {
  std::uniform_real_distribution<double> u(lo, hi), ub(blo, bhi);
  stgrid::Kernel4 k(static_cast<size_t>(S), static_cast<size_t>(kh), static_cast<size_t>(kw));
  for (double& v : k.weights()) v = u(rng);
  for (int m = 0; m < S; ++m) k.bias(static_cast<size_t>(m)) = ub(rng);
  return k;
}

inline stgrid::BeliefGrid random_belief(int S, int H, int W, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  stgrid::Grid3 g(static_cast<size_t>(S), static_cast<size_t>(H), static_cast<size_t>(W));
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      double s = 0.0;
      for (int m = 0; m < S; ++m) s += (g(static_cast<size_t>(m), static_cast<size_t>(i), static_cast<size_t>(j)) = u(rng));
      for (int m = 0; m < S; ++m) g(static_cast<size_t>(m), static_cast<size_t>(i), static_cast<size_t>(j)) /= s;
    }
  return {g, 0};
}

inline stgrid::ObsMatrix random_obs(int S, int O, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  stgrid::ObsMatrix o(static_cast<size_t>(S), static_cast<size_t>(O));
  for (int m = 0; m < S; ++m) {
    double s = 0.0;
    for (int l = 0; l < O; ++l) s += (o(static_cast<size_t>(m), static_cast<size_t>(l)) = u(rng));
    for (int l = 0; l < O; ++l) o(static_cast<size_t>(m), static_cast<size_t>(l)) /= s;
  }
  return o;
}

}  // namespace oracle
