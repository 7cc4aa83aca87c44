#pragma once

// Dynamic autoencoder: encoder -> GRU -> decoder predicting the next
// observation map. The decoder emits a per-cell state distribution u and the
// fixed observation layer maps it to y = O' u.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stgrid/environment.hpp"
#include "stgrid/errors.hpp"
#include "stgrid/filter.hpp"
#include "stgrid/maps.hpp"
#include "stgrid/nn.hpp"
#include "stgrid/rng.hpp"

namespace stgrid {

struct NetShape {
  std::size_t rows = 16;
  std::size_t cols = 16;
  std::size_t states = 3;
  std::size_t observations = 3;
  std::size_t latent = 64;     // d_h
  std::size_t channels1 = 8;   // first conv block
  std::size_t channels2 = 16;  // second conv block

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

// One parameter group of the flat vector, as a list of slices.
struct ParamGroup {
  std::string name;
  std::vector<nn::Slice> slices;
};

// Flat parameter order (checkpoint order):
//   enc1.w [c1][|O|][3][3], enc1.b [c1]
//   enc2.w [c2][c1][3][3],  enc2.b [c2]
//   enc3.w [d_h][c2*h2*w2], enc3.b [d_h]
//   gru.w_ih [3 d_h][d_h], gru.b_ih [3 d_h], gru.w_hh [3 d_h][d_h], gru.b_hh [3 d_h]
//     (gate row blocks in order reset, update, candidate)
//   dec1.w [c2*h2*w2][d_h], dec1.b [c2*h2*w2]
//   dec2.w [c2][c1][3][3],  dec2.b [c1]
//   dec3.w [c1][|S|][3][3], dec3.b [|S|]
class AutoencoderLayout {
 public:
  explicit AutoencoderLayout(const NetShape& s) : shape(s) {
    if (s.rows == 0 || s.cols == 0 || s.states < 2 || s.observations < 2 ||
        s.latent == 0 || s.channels1 == 0 || s.channels2 == 0)
      throw ConfigurationError("NetShape: all dims must be positive, |S|,|O| >= 2");
    const std::size_t h1 = nn::ConvGeometry::halve(s.rows), w1 = nn::ConvGeometry::halve(s.cols);
    const std::size_t h2 = nn::ConvGeometry::halve(h1), w2 = nn::ConvGeometry::halve(w1);
    enc1_geom = {s.observations, s.rows, s.cols, s.channels1, h1, w1};
    enc2_geom = {s.channels1, h1, w1, s.channels2, h2, w2};
    dec2_geom = {s.channels1, h1, w1, s.channels2, h2, w2};
    dec3_geom = {s.states, s.rows, s.cols, s.channels1, h1, w1};
    flat = s.channels2 * h2 * w2;
    const std::size_t d = s.latent;
    nn::Layout l;
    enc1_w = l.add(enc1_geom.weight_size());
    enc1_b = l.add(s.channels1);
    enc2_w = l.add(enc2_geom.weight_size());
    enc2_b = l.add(s.channels2);
    enc3_w = l.add(d * flat);
    enc3_b = l.add(d);
    gru_w_ih = l.add(3 * d * d);
    gru_b_ih = l.add(3 * d);
    gru_w_hh = l.add(3 * d * d);
    gru_b_hh = l.add(3 * d);
    dec1_w = l.add(flat * d);
    dec1_b = l.add(flat);
    dec2_w = l.add(dec2_geom.weight_size());
    dec2_b = l.add(s.channels1);
    dec3_w = l.add(dec3_geom.weight_size());
    dec3_b = l.add(s.states);
    total = l.total();
  }

  std::vector<ParamGroup> groups() const {
    const std::size_t d = shape.latent;
    auto gate = [&](std::size_t g) {
      return std::vector<nn::Slice>{
          {gru_w_ih.offset + g * d * d, d * d}, {gru_b_ih.offset + g * d, d},
          {gru_w_hh.offset + g * d * d, d * d}, {gru_b_hh.offset + g * d, d}};
    };
    return {{"encoder", {enc1_w, enc1_b, enc2_w, enc2_b, enc3_w, enc3_b}},
            {"gate_reset", gate(0)},
            {"gate_update", gate(1)},
            {"gate_candidate", gate(2)},
            {"decoder", {dec1_w, dec1_b, dec2_w, dec2_b, dec3_w, dec3_b}}};
  }

  NetShape shape;
  nn::ConvGeometry enc1_geom, enc2_geom, dec2_geom, dec3_geom;
  std::size_t flat = 0;
  nn::Slice enc1_w, enc1_b, enc2_w, enc2_b, enc3_w, enc3_b;
  nn::Slice gru_w_ih, gru_b_ih, gru_w_hh, gru_b_hh;
  nn::Slice dec1_w, dec1_b, dec2_w, dec2_b, dec3_w, dec3_b;
  std::size_t total = 0;
};

template <typename T>
struct NetParams {
  NetShape shape;
  std::vector<T> values;

  NetParams() = default;
  explicit NetParams(const NetShape& s)
      : shape(s), values(AutoencoderLayout(s).total, T(0)) {}

  // Glorot-uniform weights, zero biases except the GRU update gate, which
  // starts at +1 so early training leans on the carried state.
  static NetParams initialized(const NetShape& s, Engine& rng) {
    NetParams p(s);
    const AutoencoderLayout L(s);
    std::span<T> v(p.values);
    auto conv_fans = [](const nn::ConvGeometry& g) {
      return std::pair{g.big_c * 9, g.small_c * 9};
    };
    auto [f1i, f1o] = conv_fans(L.enc1_geom);
    nn::glorot_uniform(L.enc1_w.of(v), f1i, f1o, rng);
    auto [f2i, f2o] = conv_fans(L.enc2_geom);
    nn::glorot_uniform(L.enc2_w.of(v), f2i, f2o, rng);
    nn::glorot_uniform(L.enc3_w.of(v), L.flat, s.latent, rng);
    nn::glorot_uniform(L.gru_w_ih.of(v), s.latent, s.latent, rng);
    nn::glorot_uniform(L.gru_w_hh.of(v), s.latent, s.latent, rng);
    for (std::size_t i = 0; i < s.latent; ++i) L.gru_b_ih.of(v)[s.latent + i] = T(1);
    nn::glorot_uniform(L.dec1_w.of(v), s.latent, L.flat, rng);
    nn::glorot_uniform(L.dec2_w.of(v), s.channels2 * 9, s.channels1 * 9, rng);
    nn::glorot_uniform(L.dec3_w.of(v), s.channels1 * 9, s.states * 9, rng);
    return p;
  }

  friend bool operator==(const NetParams&, const NetParams&) = default;
};

template <typename T>
struct RnnState {
  std::vector<T> h;
  long k = 0;

  static RnnState draw(std::size_t latent, Engine& rng) {
    RnnState s;
    s.h.resize(latent);
    for (T& v : s.h) v = static_cast<T>(standard_normal(rng));
    return s;
  }
  friend bool operator==(const RnnState&, const RnnState&) = default;
};

// K + 1 consecutive observation maps y_0..y_K with the action taken at each
// step; the network consumes y_0..y_{K-1} and is scored on y_1..y_K.
struct TrajectoryRecord {
  std::vector<ObservationMap> observations;
  std::vector<int> actions;

  std::size_t predictions() const {
    return observations.empty() ? 0 : observations.size() - 1;
  }
};

namespace detail {

// Activations of one unrolled step, kept for backpropagation.
template <typename T>
struct StepCache {
  std::vector<T> x;       // one-hot input |O| x H x W
  std::vector<T> a1, a2;  // encoder conv activations
  std::vector<T> e;       // encoder output
  std::vector<T> h_prev, r, z, n, gh_n, h;
  std::vector<T> d1, d2;  // decoder activations
  std::vector<T> u;       // softmax over states
  std::vector<T> yhat;    // O' u
};

template <typename T>
void encode_observation(const ObservationMap& y, std::size_t n_obs, std::vector<T>& x) {
  const std::size_t plane = y.rows() * y.cols();
  x.assign(n_obs * plane, T(0));
  for (std::size_t p = 0; p < plane; ++p) {
    const int l = y.cells.cells()[p];
    if (!y.mask.cells()[p] || l == kUnobserved) continue;
    if (l < 0 || static_cast<std::size_t>(l) >= n_obs)
      throw DomainError("observation id out of range");
    x[static_cast<std::size_t>(l) * plane + p] = T(1);
  }
}

}  // namespace detail

// Forward/backward engine bound to one shape and one observation matrix.
template <typename T>
class DynAutoencoder {
 public:
  DynAutoencoder(const NetShape& shape, const ObsMatrix& obs)
      : layout_(shape), obs_(shape.states * shape.observations) {
    if (obs.states() != shape.states || obs.observations() != shape.observations)
      throw ConfigurationError("DynAutoencoder: observation matrix does not match shape");
    for (std::size_t m = 0; m < shape.states; ++m)
      for (std::size_t l = 0; l < shape.observations; ++l)
        obs_[m * shape.observations + l] = static_cast<T>(obs(m, l));
  }

  const AutoencoderLayout& layout() const { return layout_; }
  const NetShape& shape() const { return layout_.shape; }

  void check(const NetParams<T>& p) const {
    if (!(p.shape == layout_.shape) || p.values.size() != layout_.total)
      throw ConfigurationError("NetParams do not match the network shape");
  }

  // One recurrence step: h' = GRU(h, Enc(y)), u = Dec(h'), y_hat = O' u.
  void forward(std::span<const T> p, std::span<const T> h_prev, const ObservationMap& y,
               detail::StepCache<T>& c) const {
    const AutoencoderLayout& L = layout_;
    const NetShape& s = L.shape;
    if (y.rows() != s.rows || y.cols() != s.cols)
      throw ConfigurationError("forward_step: observation map dims do not match the network");
    if (h_prev.size() != s.latent) throw ConfigurationError("forward_step: latent size mismatch");
    const std::size_t d = s.latent;
    detail::encode_observation(y, s.observations, c.x);

    c.a1.resize(L.enc1_geom.small_size());
    nn::conv_forward<T>(L.enc1_geom, L.enc1_w.of(p), L.enc1_b.of(p), c.x, c.a1);
    nn::tanh_inplace<T>(c.a1);
    c.a2.resize(L.enc2_geom.small_size());
    nn::conv_forward<T>(L.enc2_geom, L.enc2_w.of(p), L.enc2_b.of(p), c.a1, c.a2);
    nn::tanh_inplace<T>(c.a2);
    c.e.resize(d);
    nn::dense_forward<T>(L.enc3_w.of(p), L.enc3_b.of(p), c.a2, c.e);
    nn::tanh_inplace<T>(c.e);

    c.h_prev.assign(h_prev.begin(), h_prev.end());
    std::vector<T> gi(3 * d), gh(3 * d);
    nn::dense_forward<T>(L.gru_w_ih.of(p), L.gru_b_ih.of(p), c.e, gi);
    nn::dense_forward<T>(L.gru_w_hh.of(p), L.gru_b_hh.of(p), c.h_prev, gh);
    c.r.resize(d);
    c.z.resize(d);
    c.n.resize(d);
    c.gh_n.resize(d);
    c.h.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      c.r[i] = nn::sigmoid(gi[i] + gh[i]);
      c.z[i] = nn::sigmoid(gi[d + i] + gh[d + i]);
      c.gh_n[i] = gh[2 * d + i];
      c.n[i] = std::tanh(gi[2 * d + i] + c.r[i] * c.gh_n[i]);
      c.h[i] = (T(1) - c.z[i]) * c.n[i] + c.z[i] * c.h_prev[i];
    }

    c.d1.resize(L.flat);
    nn::dense_forward<T>(L.dec1_w.of(p), L.dec1_b.of(p), c.h, c.d1);
    nn::tanh_inplace<T>(c.d1);
    c.d2.resize(L.dec2_geom.big_size());
    nn::tconv_forward<T>(L.dec2_geom, L.dec2_w.of(p), L.dec2_b.of(p), c.d1, c.d2);
    nn::tanh_inplace<T>(c.d2);
    c.u.resize(L.dec3_geom.big_size());
    nn::tconv_forward<T>(L.dec3_geom, L.dec3_w.of(p), L.dec3_b.of(p), c.d2, c.u);

    const std::size_t plane = s.rows * s.cols;
    const std::size_t S = s.states, O = s.observations;
    c.yhat.assign(O * plane, T(0));
    for (std::size_t q = 0; q < plane; ++q) {
      T mx = c.u[q];
      for (std::size_t m = 1; m < S; ++m) mx = std::max(mx, c.u[m * plane + q]);
      T tot = T(0);
      for (std::size_t m = 0; m < S; ++m) {
        T& v = c.u[m * plane + q];
        v = std::exp(v - mx);
        tot += v;
      }
      for (std::size_t m = 0; m < S; ++m) c.u[m * plane + q] /= tot;
      for (std::size_t l = 0; l < O; ++l) {
        T acc = T(0);
        for (std::size_t m = 0; m < S; ++m) acc += obs_[m * O + l] * c.u[m * plane + q];
        c.yhat[l * plane + q] = acc;
      }
    }
  }

  // Masked binary cross-entropy of y_hat against the one-hot target, summed
  // over channels and observed cells. Fills d(loss)/d(y_hat) * scale.
  T step_loss(const detail::StepCache<T>& c, const ObservationMap& target, T scale,
              std::vector<T>* dyhat) const {
    const NetShape& s = layout_.shape;
    if (target.rows() != s.rows || target.cols() != s.cols)
      throw ConfigurationError("masked_loss: target dims do not match the network");
    const std::size_t plane = s.rows * s.cols;
    const std::size_t O = s.observations;
    constexpr T lo = static_cast<T>(1e-7), hi = static_cast<T>(1.0 - 1e-7);
    if (dyhat) dyhat->assign(O * plane, T(0));
    T total = T(0);
    for (std::size_t q = 0; q < plane; ++q) {
      if (!target.mask.cells()[q]) continue;
      const int obs_id = target.cells.cells()[q];
      for (std::size_t l = 0; l < O; ++l) {
        const T t = static_cast<std::size_t>(obs_id) == l ? T(1) : T(0);
        const T raw = c.yhat[l * plane + q];
        const T pr = std::clamp(raw, lo, hi);
        total -= t * std::log(pr) + (T(1) - t) * std::log(T(1) - pr);
        if (dyhat && raw > lo && raw < hi)
          (*dyhat)[l * plane + q] = scale * (-t / pr + (T(1) - t) / (T(1) - pr));
      }
    }
    return total;
  }

  // Backward through one step. dh carries d(loss)/d(h') in and leaves with
  // d(loss)/d(h_prev). dyhat may be empty when the step has no loss term.
  void backward(std::span<const T> p, const detail::StepCache<T>& c,
                std::span<const T> dyhat, std::vector<T>& dh, std::span<T> g) const {
    const AutoencoderLayout& L = layout_;
    const NetShape& s = L.shape;
    const std::size_t d = s.latent;
    const std::size_t plane = s.rows * s.cols;
    const std::size_t S = s.states, O = s.observations;

    if (!dyhat.empty()) {
      std::vector<T> dlogit(S * plane);
      std::vector<T> du(S);
      for (std::size_t q = 0; q < plane; ++q) {
        T dot = T(0);
        for (std::size_t m = 0; m < S; ++m) {
          T acc = T(0);
          for (std::size_t l = 0; l < O; ++l) acc += obs_[m * O + l] * dyhat[l * plane + q];
          du[m] = acc;
          dot += acc * c.u[m * plane + q];
        }
        for (std::size_t m = 0; m < S; ++m)
          dlogit[m * plane + q] = c.u[m * plane + q] * (du[m] - dot);
      }
      std::vector<T> dd2(c.d2.size());
      nn::tconv_backward<T>(L.dec3_geom, L.dec3_w.of(p), c.d2, dlogit, L.dec3_w.of(g),
                            L.dec3_b.of(g), dd2);
      nn::tanh_backward<T>(c.d2, dd2);
      std::vector<T> dd1(c.d1.size());
      nn::tconv_backward<T>(L.dec2_geom, L.dec2_w.of(p), c.d1, dd2, L.dec2_w.of(g),
                            L.dec2_b.of(g), dd1);
      nn::tanh_backward<T>(c.d1, dd1);
      std::vector<T> dh_dec(d);
      nn::dense_backward<T>(L.dec1_w.of(p), c.h, dd1, L.dec1_w.of(g), L.dec1_b.of(g), dh_dec);
      for (std::size_t i = 0; i < d; ++i) dh[i] += dh_dec[i];
    }

    std::vector<T> dgi(3 * d), dgh(3 * d), dh_prev(d);
    for (std::size_t i = 0; i < d; ++i) {
      const T dn = dh[i] * (T(1) - c.z[i]);
      const T dz = dh[i] * (c.h_prev[i] - c.n[i]);
      dh_prev[i] = dh[i] * c.z[i];
      const T dn_pre = dn * (T(1) - c.n[i] * c.n[i]);
      const T dr = dn_pre * c.gh_n[i];
      const T dr_pre = dr * c.r[i] * (T(1) - c.r[i]);
      const T dz_pre = dz * c.z[i] * (T(1) - c.z[i]);
      dgi[i] = dr_pre;
      dgh[i] = dr_pre;
      dgi[d + i] = dz_pre;
      dgh[d + i] = dz_pre;
      dgi[2 * d + i] = dn_pre;
      dgh[2 * d + i] = dn_pre * c.r[i];
    }
    std::vector<T> de(d), dh_rec(d);
    nn::dense_backward<T>(L.gru_w_ih.of(p), c.e, dgi, L.gru_w_ih.of(g), L.gru_b_ih.of(g), de);
    nn::dense_backward<T>(L.gru_w_hh.of(p), c.h_prev, dgh, L.gru_w_hh.of(g), L.gru_b_hh.of(g),
                          dh_rec);
    for (std::size_t i = 0; i < d; ++i) dh[i] = dh_prev[i] + dh_rec[i];

    nn::tanh_backward<T>(c.e, de);
    std::vector<T> da2(c.a2.size());
    nn::dense_backward<T>(L.enc3_w.of(p), c.a2, de, L.enc3_w.of(g), L.enc3_b.of(g), da2);
    nn::tanh_backward<T>(c.a2, da2);
    std::vector<T> da1(c.a1.size());
    nn::conv_backward<T>(L.enc2_geom, L.enc2_w.of(p), c.a1, da2, L.enc2_w.of(g),
                         L.enc2_b.of(g), da1);
    nn::tanh_backward<T>(c.a1, da1);
    nn::conv_backward<T>(L.enc1_geom, L.enc1_w.of(p), c.x, da1, L.enc1_w.of(g),
                         L.enc1_b.of(g), std::span<T>{});
  }

  // Loss and (optionally) gradient over a batch with explicit initial states.
  T loss_and_gradient(const NetParams<T>& params, std::span<const TrajectoryRecord> batch,
                      std::span<const std::vector<T>> h0s, std::vector<T>* grad) const {
    check(params);
    if (batch.empty()) throw ConfigurationError("masked_loss: empty batch");
    if (h0s.size() != batch.size())
      throw ConfigurationError("masked_loss: one initial state per trajectory required");
    const std::size_t K = batch.front().predictions();
    if (K == 0) throw ConfigurationError("masked_loss: trajectories need at least two maps");
    for (const auto& rec : batch)
      if (rec.predictions() != K)
        throw ConfigurationError("masked_loss: trajectories must share one length");
    std::span<const T> p(params.values);
    if (grad) grad->assign(params.values.size(), T(0));
    const T scale = T(1) / static_cast<T>(batch.size() * K);

    std::vector<detail::StepCache<T>> caches(K);
    std::vector<std::vector<T>> dyhats(K);
    T total = T(0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const TrajectoryRecord& rec = batch[b];
      std::span<const T> h = h0s[b];
      for (std::size_t k = 0; k < K; ++k) {
        forward(p, h, rec.observations[k], caches[k]);
        total += step_loss(caches[k], rec.observations[k + 1], scale,
                           grad ? &dyhats[k] : nullptr);
        h = caches[k].h;
      }
      if (!grad) continue;
      std::vector<T> dh(layout_.shape.latent, T(0));
      for (std::size_t k = K; k-- > 0;)
        backward(p, caches[k], dyhats[k], dh, std::span<T>(*grad));
    }
    return total * scale;
  }

 private:
  AutoencoderLayout layout_;
  std::vector<T> obs_;  // row-major |S| x |O|
};

template <typename T>
struct ForwardResult {
  RnnState<T> h;
  BeliefGrid u;   // decoded state predictor
  Grid3 yhat;     // predicted observation probabilities
};

namespace detail {
template <typename T>
Grid3 to_grid(std::span<const T> v, std::size_t c, std::size_t h, std::size_t w) {
  Grid3 g(c, h, w);
  for (std::size_t i = 0; i < v.size(); ++i) g.data()[i] = static_cast<double>(v[i]);
  return g;
}
}  // namespace detail

template <typename T>
ForwardResult<T> forward_step(const RnnState<T>& h, const ObservationMap& y,
                              const NetParams<T>& params, const ObsMatrix& obs) {
  DynAutoencoder<T> net(params.shape, obs);
  net.check(params);
  detail::StepCache<T> c;
  net.forward(params.values, h.h, y, c);
  const NetShape& s = params.shape;
  ForwardResult<T> out;
  out.h = {c.h, h.k + 1};
  // Widen to 64 bits and renormalize so the predictor is a simplex at the
  // filter's tolerance, not just at single precision.
  out.u = {detail::to_grid<T>(c.u, s.states, s.rows, s.cols), h.k + 1};
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) {
      double tot = 0.0;
      for (std::size_t m = 0; m < s.states; ++m) tot += out.u.probs(m, i, j);
      for (std::size_t m = 0; m < s.states; ++m) out.u.probs(m, i, j) /= tot;
    }
  out.yhat = detail::to_grid<T>(c.yhat, s.observations, s.rows, s.cols);
  return out;
}

template <typename T>
std::vector<std::vector<T>> draw_initial_states(std::size_t count, std::size_t latent,
                                                Engine& rng) {
  std::vector<std::vector<T>> h0s;
  h0s.reserve(count);
  for (std::size_t b = 0; b < count; ++b) h0s.push_back(RnnState<T>::draw(latent, rng).h);
  return h0s;
}

template <typename T>
T masked_loss(std::span<const TrajectoryRecord> batch, const NetParams<T>& params,
              const ObsMatrix& obs, std::span<const std::vector<T>> h0s) {
  return DynAutoencoder<T>(params.shape, obs).loss_and_gradient(params, batch, h0s, nullptr);
}

template <typename T>
T masked_loss(std::span<const TrajectoryRecord> batch, const NetParams<T>& params,
              const ObsMatrix& obs, Engine& rng) {
  const auto h0s = draw_initial_states<T>(batch.size(), params.shape.latent, rng);
  return masked_loss<T>(batch, params, obs, h0s);
}

template <typename T>
struct SysGradient {
  T loss{};
  std::vector<T> grad;
};

template <typename T>
SysGradient<T> sys_gradient(std::span<const TrajectoryRecord> batch, const NetParams<T>& params,
                            const ObsMatrix& obs, std::span<const std::vector<T>> h0s) {
  SysGradient<T> out;
  out.loss = DynAutoencoder<T>(params.shape, obs).loss_and_gradient(params, batch, h0s, &out.grad);
  return out;
}

template <typename T>
SysGradient<T> sys_gradient(std::span<const TrajectoryRecord> batch, const NetParams<T>& params,
                            const ObsMatrix& obs, Engine& rng) {
  const auto h0s = draw_initial_states<T>(batch.size(), params.shape.latent, rng);
  return sys_gradient<T>(batch, params, obs, h0s);
}

// Moment-tracked descent step on the masked loss.
template <typename T>
void sys_update(NetParams<T>& params, nn::Adam<T>& optimizer, std::span<const T> grad,
                double step_size) {
  optimizer.step(params.values, grad, step_size);
}

template <typename T>
struct LearnedEstimate {
  RnnState<T> h;
  BeliefGrid predictor;  // u_hat
  BeliefGrid estimate;   // p_hat after the mask-gated Bayes correction
};

template <typename T>
LearnedEstimate<T> estimate_with_learned_model(const RnnState<T>& h, const ObservationMap& y,
                                               const NetParams<T>& params, const ObsMatrix& obs) {
  ForwardResult<T> f = forward_step(h, y, params, obs);
  BeliefGrid p = bayes_correct(f.u, y, obs);
  return {std::move(f.h), std::move(f.u), std::move(p)};
}

}  // namespace stgrid
