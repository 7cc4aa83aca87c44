#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stgrid/errors.hpp"
#include "stgrid/grid.hpp"
#include "stgrid/maps.hpp"
#include "stgrid/rng.hpp"

namespace stgrid {

// Row-stochastic |S| x |O| observation matrix, O[m][l] = P(y = l | x = m).
class ObsMatrix {
 public:
  ObsMatrix() = default;
  ObsMatrix(std::size_t states, std::size_t observations, double fill = 0.0)
      : states_(states), observations_(observations),
        values_(states * observations, fill) {}
  ObsMatrix(std::size_t states, std::size_t observations,
            std::vector<double> row_major)
      : states_(states), observations_(observations),
        values_(std::move(row_major)) {
    if (values_.size() != states * observations)
      throw ConfigurationError("ObsMatrix: wrong number of entries");
  }

  std::size_t states() const { return states_; }
  std::size_t observations() const { return observations_; }
  double& operator()(std::size_t m, std::size_t l) { return values_.at(m * observations_ + l); }
  double operator()(std::size_t m, std::size_t l) const { return values_.at(m * observations_ + l); }
  std::span<const double> row(std::size_t m) const {
    return std::span<const double>(values_).subspan(m * observations_, observations_);
  }
  std::span<const double> values() const { return values_; }

  // Strictly positive entries, rows summing to 1 within tol.
  void validate(double tol = 1e-12) const {
    for (std::size_t m = 0; m < states_; ++m) {
      double s = 0.0;
      for (std::size_t l = 0; l < observations_; ++l) {
        const double v = (*this)(m, l);
        if (!(v > 0.0)) throw ConfigurationError("ObsMatrix entries must be strictly positive");
        s += v;
      }
      if (std::abs(s - 1.0) > tol)
        throw ConfigurationError("ObsMatrix row " + std::to_string(m) + " does not sum to 1");
    }
  }

  // (1 - eps) I + eps / |O| spread; the closest admissible noiseless matrix.
  static ObsMatrix smoothed_identity(std::size_t n, double eps) {
    ObsMatrix o(n, n, eps / static_cast<double>(n));
    for (std::size_t m = 0; m < n; ++m) o(m, m) += 1.0 - eps;
    return o;
  }
  static ObsMatrix uniform(std::size_t states, std::size_t observations) {
    return ObsMatrix(states, observations, 1.0 / static_cast<double>(observations));
  }

  friend bool operator==(const ObsMatrix&, const ObsMatrix&) = default;

 private:
  std::size_t states_ = 0;
  std::size_t observations_ = 0;
  std::vector<double> values_;
};

struct ModelParams {
  Kernel4 kernel;
  ObsMatrix obs;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t states() const { return kernel.states(); }
  std::size_t observations() const { return obs.observations(); }

  void validate() const {
    if (rows == 0 || cols == 0) throw ConfigurationError("ModelParams: empty grid");
    if (obs.states() != kernel.states())
      throw ConfigurationError("ModelParams: kernel and observation matrix disagree on |S|");
    obs.validate();
  }
};

// Source-of-truth constants of the wildfire scenario. States: 0 normal,
// 1 latent, 2 fire. Every kernel entry not listed here is zero.
//
// Calibrated so a free-running 64x64 map settles near 85% normal, 7.3% latent,
// 7.3% fire with fire clusters of mean size ~1.3 (4-connectivity). Each input
// state's outgoing center weights sum to about 2.2 (normal 2.2, latent 2.3,
// fire 2.1), which keeps Phi applied to a mixed belief close to the sampled
// dynamics. Per-step odds for an isolated cell: normal->latent ~b1/2.2,
// latent->fire 0.8/2.3, fire->normal 0.6/2.1; a fire cell directly above adds
// ~0.3 to the latent probability of the cell below. All of these may be
// overridden from the [wildfire] config section.
struct WildfireTable {
  // Biases; b1 doubles as the spontaneous ignition rate.
  double bias_normal = 0.044;
  double bias_latent = 0.0044;
  double bias_fire = 0.0044;
  // Center-cell self couplings.
  double normal_persist = 2.2;   // w[0,0,c]
  double latent_persist = 1.5;   // w[1,1,c]
  double latent_to_fire = 0.8;   // w[2,1,c]
  double fire_persist = 1.5;     // w[2,2,c]
  double fire_to_normal = 0.6;   // w[0,2,c]
  // Fire in the window pushes neighbors toward latent (w[1,2,.,.]).
  // Rows are kernel rows; the upper row looks at the cell above, so heavier
  // upper weights drive the front downward.
  double spread_up_center = 0.66;  // fire directly above
  double spread_up_diag = 0.176;   // fire above-left / above-right
  double spread_side = 0.044;      // fire left / right
  double spread_below = 0.0;       // fire below
  // Observation rows (normal, cautious, abnormal readings).
  std::array<double, 3> obs_normal{0.90, 0.07, 0.03};
  std::array<double, 3> obs_latent{0.80, 0.15, 0.05};
  std::array<double, 3> obs_fire{0.03, 0.07, 0.90};
};

inline ModelParams wildfire_preset(std::size_t rows, std::size_t cols,
                                   const WildfireTable& t = {}) {
  if (rows == 0 || cols == 0) throw ConfigurationError("wildfire_preset: empty grid");
  ModelParams p;
  p.rows = rows;
  p.cols = cols;
  p.kernel = Kernel4(3, 3, 3);
  Kernel4& k = p.kernel;
  k.bias(0) = t.bias_normal;
  k.bias(1) = t.bias_latent;
  k.bias(2) = t.bias_fire;
  k.w(0, 0, 1, 1) = t.normal_persist;
  k.w(1, 1, 1, 1) = t.latent_persist;
  k.w(2, 1, 1, 1) = t.latent_to_fire;
  k.w(2, 2, 1, 1) = t.fire_persist;
  k.w(0, 2, 1, 1) = t.fire_to_normal;
  k.w(1, 2, 0, 1) = t.spread_up_center;
  k.w(1, 2, 0, 0) = t.spread_up_diag;
  k.w(1, 2, 0, 2) = t.spread_up_diag;
  k.w(1, 2, 1, 0) = t.spread_side;
  k.w(1, 2, 1, 2) = t.spread_side;
  k.w(1, 2, 2, 1) = t.spread_below;
  std::vector<double> o;
  for (const auto* row : {&t.obs_normal, &t.obs_latent, &t.obs_fire})
    o.insert(o.end(), row->begin(), row->end());
  p.obs = ObsMatrix(3, 3, std::move(o));
  if (!k.simulator_admissible())
    throw ConfigurationError("wildfire table yields a kernel that can make phi nonpositive");
  p.validate();
  return p;
}

// Phi(p) = normalize(cross_correlate(p, w)).
inline BeliefGrid transition_operator(const BeliefGrid& belief,
                                      const ModelParams& params) {
  return {normalize_channels(cross_correlate(belief.probs, params.kernel)),
          belief.k};
}

// Samples every cell independently from its Phi column given the one-hot state.
inline StateMap step_state(const StateMap& state, const ModelParams& params,
                           Engine& rng) {
  const std::size_t S = params.states();
  const BeliefGrid next =
      transition_operator(BeliefGrid{one_hot(state, S), 0}, params);
  StateMap out(state.rows(), state.cols());
  std::vector<double> column(S);
  for (std::size_t i = 0; i < state.rows(); ++i)
    for (std::size_t j = 0; j < state.cols(); ++j) {
      for (std::size_t m = 0; m < S; ++m) column[m] = next.probs(m, i, j);
      out(i, j) = sample_categorical(rng, column);
    }
  return out;
}

// Samples y ~ O[x, .] on the visited cells only. Cells are sampled in
// row-major order, once each, whatever the visit order or multiplicity.
inline ObservationMap observe(const StateMap& state,
                              std::span<const Cell> visited,
                              const ModelParams& params, Engine& rng) {
  ObservationMap y(state.rows(), state.cols());
  for (Cell c : visited) {
    if (!state.contains(c)) throw DomainError("observe: position out of bounds");
    y.mask.at(c) = 1;
  }
  for (std::size_t i = 0; i < state.rows(); ++i)
    for (std::size_t j = 0; j < state.cols(); ++j)
      if (y.mask(i, j))
        y.cells(i, j) = sample_categorical(
            rng, params.obs.row(static_cast<std::size_t>(state(i, j))));
  return y;
}

// Full-coverage observation (every cell visited).
inline ObservationMap observe_all(const StateMap& state, const ModelParams& params,
                                  Engine& rng) {
  std::vector<Cell> all;
  all.reserve(state.size());
  for (std::size_t i = 0; i < state.rows(); ++i)
    for (std::size_t j = 0; j < state.cols(); ++j)
      all.push_back({static_cast<int>(i), static_cast<int>(j)});
  return observe(state, all, params, rng);
}

// Number of path timesteps spent on a target-state cell; revisits count.
inline int reward(const StateMap& state, const RobotPath& path, int target_state) {
  int hits = 0;
  for (Cell c : path.positions) {
    if (!state.contains(c)) throw DomainError("reward: position out of bounds");
    if (state.at(c) == target_state) ++hits;
  }
  return hits;
}

// Single-owner ground-truth simulator.
class Environment {
 public:
  Environment(ModelParams params, StateMap initial, Engine transition_rng,
              Engine observation_rng)
      : params_(std::move(params)), state_(std::move(initial)),
        transition_rng_(std::move(transition_rng)),
        observation_rng_(std::move(observation_rng)) {
    params_.validate();
    if (state_.rows() != params_.rows || state_.cols() != params_.cols)
      throw ConfigurationError("Environment: state map does not match params dims");
  }

  const ModelParams& params() const { return params_; }
  const StateMap& state() const { return state_; }
  long k() const { return k_; }

  void step() {
    state_ = step_state(state_, params_, transition_rng_);
    ++k_;
  }

  ObservationMap observe_path(const RobotPath& path) {
    return observe(state_, path.positions, params_, observation_rng_);
  }
  ObservationMap observe_everything() {
    return observe_all(state_, params_, observation_rng_);
  }

  int reward_of(const RobotPath& path, int target_state) const {
    return reward(state_, path, target_state);
  }

  // Checkpoint support.
  const Engine& transition_rng() const { return transition_rng_; }
  const Engine& observation_rng() const { return observation_rng_; }
  void restore(StateMap state, long k, Engine transition_rng, Engine observation_rng) {
    state_ = std::move(state);
    k_ = k;
    transition_rng_ = std::move(transition_rng);
    observation_rng_ = std::move(observation_rng);
  }

 private:
  ModelParams params_;
  StateMap state_;
  Engine transition_rng_;
  Engine observation_rng_;
  long k_ = 0;
};

// Fraction of cells in each state.
inline std::vector<double> occupancy(const StateMap& state, std::size_t states) {
  std::vector<double> f(states, 0.0);
  for (int s : state.cells()) f.at(static_cast<std::size_t>(s)) += 1.0;
  for (double& v : f) v /= static_cast<double>(state.size());
  return f;
}

// Mean 4-connected component size among cells equal to `target`; 0 if none.
inline double mean_cluster_size(const StateMap& state, int target) {
  const std::size_t H = state.rows(), W = state.cols();
  std::vector<std::uint8_t> seen(H * W, 0);
  std::vector<std::size_t> stack;
  std::size_t clusters = 0, cells = 0;
  for (std::size_t s = 0; s < H * W; ++s) {
    if (seen[s] || state.cells()[s] != target) continue;
    ++clusters;
    stack.push_back(s);
    seen[s] = 1;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++cells;
      const std::size_t i = cur / W, j = cur % W;
      auto visit = [&](std::size_t ni, std::size_t nj) {
        const std::size_t id = ni * W + nj;
        if (!seen[id] && state.cells()[id] == target) {
          seen[id] = 1;
          stack.push_back(id);
        }
      };
      if (i > 0) visit(i - 1, j);
      if (i + 1 < H) visit(i + 1, j);
      if (j > 0) visit(i, j - 1);
      if (j + 1 < W) visit(i, j + 1);
    }
  }
  return clusters == 0 ? 0.0 : static_cast<double>(cells) / static_cast<double>(clusters);
}

}  // namespace stgrid
