#pragma once

// High-level agent: Q(h, a) over the detached RNN latent, trained by DQN with
// a transition replay buffer and a periodically synchronized target network.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "stgrid/errors.hpp"
#include "stgrid/nn.hpp"
#include "stgrid/replay.hpp"
#include "stgrid/rng.hpp"

namespace stgrid {

struct QNetShape {
  std::size_t input = 64;
  std::size_t width = 128;
  std::size_t actions = 4;
  friend bool operator==(const QNetShape&, const QNetShape&) = default;
};

// Flat order: l1.w [width][input], l1.b, l2.w [width][width], l2.b,
// l3.w [actions][width], l3.b.
struct QNetLayout {
  explicit QNetLayout(const QNetShape& s) : shape(s) {
    if (s.input == 0 || s.width == 0 || s.actions == 0)
      throw ConfigurationError("QNetShape dims must be positive");
    nn::Layout l;
    w1 = l.add(s.width * s.input);
    b1 = l.add(s.width);
    w2 = l.add(s.width * s.width);
    b2 = l.add(s.width);
    w3 = l.add(s.actions * s.width);
    b3 = l.add(s.actions);
    total = l.total();
  }
  QNetShape shape;
  nn::Slice w1, b1, w2, b2, w3, b3;
  std::size_t total = 0;
};

template <typename T>
struct QNet {
  QNetShape shape;
  std::vector<T> online;
  std::vector<T> target;

  QNet() = default;
  explicit QNet(const QNetShape& s)
      : shape(s), online(QNetLayout(s).total, T(0)), target(online) {}

  static QNet initialized(const QNetShape& s, Engine& rng) {
    QNet q(s);
    const QNetLayout L(s);
    std::span<T> v(q.online);
    // He-style uniform for the rectifier layers.
    auto he = [&](std::span<T> w, std::size_t fan_in) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (T& x : w) x = static_cast<T>((2.0 * uniform01(rng) - 1.0) * a);
    };
    he(L.w1.of(v), s.input);
    he(L.w2.of(v), s.width);
    nn::glorot_uniform(L.w3.of(v), s.width, s.actions, rng);
    q.target = q.online;
    return q;
  }
  friend bool operator==(const QNet&, const QNet&) = default;
};

struct Transition {
  std::vector<float> h;
  int action = 0;
  double reward = 0.0;
  std::vector<float> h_next;
};

using TransitionBuffer = RingBuffer<Transition>;

namespace detail {

template <typename T>
struct QCache {
  std::vector<T> x, a1, a2, q;
};

template <typename T>
void q_forward(const QNetLayout& L, std::span<const T> p, std::span<const T> x, QCache<T>& c) {
  if (x.size() != L.shape.input) throw ConfigurationError("QNet: input size mismatch");
  c.x.assign(x.begin(), x.end());
  c.a1.resize(L.shape.width);
  nn::dense_forward<T>(L.w1.of(p), L.b1.of(p), c.x, c.a1);
  for (T& v : c.a1) v = std::max(v, T(0));
  c.a2.resize(L.shape.width);
  nn::dense_forward<T>(L.w2.of(p), L.b2.of(p), c.a1, c.a2);
  for (T& v : c.a2) v = std::max(v, T(0));
  c.q.resize(L.shape.actions);
  nn::dense_forward<T>(L.w3.of(p), L.b3.of(p), c.a2, c.q);
}

template <typename T>
void q_backward(const QNetLayout& L, std::span<const T> p, const QCache<T>& c,
                std::span<const T> dq, std::span<T> g) {
  std::vector<T> da2(L.shape.width), da1(L.shape.width);
  nn::dense_backward<T>(L.w3.of(p), c.a2, dq, L.w3.of(g), L.b3.of(g), da2);
  for (std::size_t i = 0; i < da2.size(); ++i)
    if (c.a2[i] <= T(0)) da2[i] = T(0);
  nn::dense_backward<T>(L.w2.of(p), c.a1, da2, L.w2.of(g), L.b2.of(g), da1);
  for (std::size_t i = 0; i < da1.size(); ++i)
    if (c.a1[i] <= T(0)) da1[i] = T(0);
  nn::dense_backward<T>(L.w1.of(p), c.x, da1, L.w1.of(g), L.b1.of(g), std::span<T>{});
}

template <typename T>
std::vector<T> widen(std::span<const float> h) {
  return std::vector<T>(h.begin(), h.end());
}

}  // namespace detail

template <typename T>
std::vector<T> q_values(std::span<const T> params, const QNetShape& shape, std::span<const T> h) {
  const QNetLayout L(shape);
  detail::QCache<T> c;
  detail::q_forward<T>(L, params, h, c);
  return c.q;
}

// Lowest index among maxima.
template <typename T>
int greedy_action(std::span<const T> q) {
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

// Epsilon-greedy over the online network.
template <typename T>
int act(std::span<const T> h, const QNet<T>& qnet, double epsilon, Engine& rng) {
  const double u = uniform01(rng);
  if (u < epsilon)
    return static_cast<int>(uniform_index(rng, qnet.shape.actions));
  const auto q = q_values<T>(qnet.online, qnet.shape, h);
  return greedy_action<T>(q);
}

// Mean squared TD error with the target network bootstrapping.
template <typename T>
T dqn_loss(std::span<const Transition> batch, const QNet<T>& qnet, double gamma) {
  if (batch.empty()) throw ConfigurationError("dqn_loss: empty batch");
  const QNetLayout L(qnet.shape);
  detail::QCache<T> c, ct;
  T total = T(0);
  for (const Transition& tr : batch) {
    const auto h = detail::widen<T>(tr.h);
    const auto hn = detail::widen<T>(tr.h_next);
    detail::q_forward<T>(L, qnet.target, hn, ct);
    const T boot = *std::max_element(ct.q.begin(), ct.q.end());
    const T y = static_cast<T>(tr.reward) + static_cast<T>(gamma) * boot;
    detail::q_forward<T>(L, qnet.online, h, c);
    const T td = y - c.q.at(static_cast<std::size_t>(tr.action));
    total += td * td;
  }
  return total / static_cast<T>(batch.size());
}

template <typename T>
struct DqnGradient {
  T loss{};
  std::vector<T> grad;  // online parameters only
};

template <typename T>
DqnGradient<T> dqn_gradient(std::span<const Transition> batch, const QNet<T>& qnet,
                            double gamma) {
  if (batch.empty()) throw ConfigurationError("dqn_gradient: empty batch");
  const QNetLayout L(qnet.shape);
  DqnGradient<T> out;
  out.grad.assign(qnet.online.size(), T(0));
  detail::QCache<T> c, ct;
  const T inv_m = T(1) / static_cast<T>(batch.size());
  std::vector<T> dq(qnet.shape.actions);
  for (const Transition& tr : batch) {
    if (tr.action < 0 || static_cast<std::size_t>(tr.action) >= qnet.shape.actions)
      throw DomainError("dqn_gradient: action out of range");
    const auto h = detail::widen<T>(tr.h);
    const auto hn = detail::widen<T>(tr.h_next);
    detail::q_forward<T>(L, qnet.target, hn, ct);
    const T boot = *std::max_element(ct.q.begin(), ct.q.end());
    const T y = static_cast<T>(tr.reward) + static_cast<T>(gamma) * boot;
    detail::q_forward<T>(L, qnet.online, h, c);
    const T td = y - c.q[static_cast<std::size_t>(tr.action)];
    out.loss += td * td * inv_m;
    std::fill(dq.begin(), dq.end(), T(0));
    dq[static_cast<std::size_t>(tr.action)] = T(-2) * td * inv_m;
    detail::q_backward<T>(L, qnet.online, c, dq, out.grad);
  }
  if (!nn::all_finite<T>(out.grad)) throw TrainingDivergenceError("dqn_gradient: non-finite");
  return out;
}

// Descent on the online parameters; the target set is untouched.
template <typename T>
void dqn_update(QNet<T>& qnet, nn::Adam<T>& optimizer, std::span<const T> grad, double step_size) {
  optimizer.step(qnet.online, grad, step_size);
}

template <typename T>
void sync_target(QNet<T>& qnet) {
  qnet.target = qnet.online;
}

// Linear decay from start to end over the first `decay_iterations`, then flat.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  long decay_iterations = 1000;

  double at(long n) const {
    if (decay_iterations <= 0 || n >= decay_iterations) return end;
    const double f = static_cast<double>(std::max(n, 0L)) / static_cast<double>(decay_iterations);
    return start + (end - start) * f;
  }
};

}  // namespace stgrid
