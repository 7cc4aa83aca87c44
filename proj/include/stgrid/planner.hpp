#pragma once

// Random-shooting planner over the frozen belief p_k.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "stgrid/errors.hpp"
#include "stgrid/grid.hpp"
#include "stgrid/maps.hpp"
#include "stgrid/parallel.hpp"
#include "stgrid/rng.hpp"

namespace stgrid {

inline constexpr int kExploreAction = 3;

struct PlanSpec {
  int action = 2;
  std::size_t horizon = 16;   // T
  std::size_t samples = 256;  // N

  void validate(std::size_t states) const {
    if (horizon < 1) throw ConfigurationError("PlanSpec: horizon must be >= 1");
    if (samples < 1) throw ConfigurationError("PlanSpec: sample count must be >= 1");
    if (action < 0 || static_cast<std::size_t>(action) > states)
      throw DomainError("PlanSpec: invalid action id");
  }
};

// c = c1 + w(a) c2 with c1 = -p[a, z] for state actions and 0 for the
// exploration action, w(a) = [a == explore], c2 = -entropy(p[., z]).
// The exploration action id equals |S| (3 for the wildfire scenario).
inline double running_cost(Cell z, const BeliefGrid& belief, int action) {
  const std::size_t S = belief.states();
  if (action < 0 || static_cast<std::size_t>(action) > S)
    throw DomainError("running_cost: invalid action id");
  if (z.row < 0 || z.col < 0 || static_cast<std::size_t>(z.row) >= belief.rows() ||
      static_cast<std::size_t>(z.col) >= belief.cols())
    throw DomainError("running_cost: position out of bounds");
  const auto i = static_cast<std::size_t>(z.row), j = static_cast<std::size_t>(z.col);
  if (static_cast<std::size_t>(action) < S) return -belief.probs(static_cast<std::size_t>(action), i, j);
  const std::vector<double> col = belief.probs.column(i, j);
  return -shannon_entropy(col);
}

inline Cell clamp_step(Cell z, int velocity, std::size_t rows, std::size_t cols) {
  const Cell v = kVelocities.at(static_cast<std::size_t>(velocity));
  Cell n{z.row + v.row, z.col + v.col};
  n.row = std::clamp(n.row, 0, static_cast<int>(rows) - 1);
  n.col = std::clamp(n.col, 0, static_cast<int>(cols) - 1);
  return n;
}

// Integrates velocity ids from start with saturation at the grid edges.
inline RobotPath integrate(Cell start, std::span<const int> velocities, std::size_t rows,
                           std::size_t cols) {
  RobotPath p;
  p.positions.reserve(velocities.size() + 1);
  p.positions.push_back(start);
  p.velocities.assign(velocities.begin(), velocities.end());
  Cell z = start;
  for (int v : velocities) {
    z = clamp_step(z, v, rows, cols);
    p.positions.push_back(z);
  }
  return p;
}

// Mean running cost over z_0..z_T, summed in time order.
inline double rollout_cost(const RobotPath& path, const BeliefGrid& belief, int action) {
  double total = 0.0;
  for (Cell z : path.positions) total += running_cost(z, belief, action);
  return total / static_cast<double>(path.positions.size());
}

// running_cost evaluated once per cell.
inline std::vector<double> cost_map(const BeliefGrid& belief, int action) {
  std::vector<double> cost(belief.rows() * belief.cols());
  for (std::size_t i = 0; i < belief.rows(); ++i)
    for (std::size_t j = 0; j < belief.cols(); ++j)
      cost[i * belief.cols() + j] =
          running_cost({static_cast<int>(i), static_cast<int>(j)}, belief, action);
  return cost;
}

struct PlanResult {
  RobotPath path;
  double cost = 0.0;
  std::size_t index = 0;      // winning candidate
  std::vector<double> costs;  // every candidate's rollout cost
};

// Argmin over explicit candidates (each a length-T velocity sequence, stored
// back to back). Ties go to the lowest candidate index.
inline PlanResult plan_from_candidates(Cell start, const BeliefGrid& belief, int action,
                                       std::span<const int> candidates, std::size_t horizon) {
  if (horizon == 0 || candidates.size() % horizon != 0 || candidates.empty())
    throw ConfigurationError("plan: candidate buffer is not a whole number of sequences");
  const std::size_t rows = belief.rows(), cols = belief.cols();
  if (start.row < 0 || start.col < 0 || static_cast<std::size_t>(start.row) >= rows ||
      static_cast<std::size_t>(start.col) >= cols)
    throw DomainError("plan: start out of bounds");
  const std::vector<double> cost = cost_map(belief, action);
  const std::size_t n = candidates.size() / horizon;
  PlanResult out;
  out.costs.resize(n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t s = b; s < e; ++s) {
      Cell z = start;
      double total = cost[static_cast<std::size_t>(z.row) * cols + static_cast<std::size_t>(z.col)];
      for (std::size_t t = 0; t < horizon; ++t) {
        z = clamp_step(z, candidates[s * horizon + t], rows, cols);
        total += cost[static_cast<std::size_t>(z.row) * cols + static_cast<std::size_t>(z.col)];
      }
      out.costs[s] = total / static_cast<double>(horizon + 1);
    }
  });
  std::size_t best = 0;
  for (std::size_t s = 1; s < n; ++s)
    if (out.costs[s] < out.costs[best]) best = s;
  out.index = best;
  out.cost = out.costs[best];
  out.path = integrate(start, candidates.subspan(best * horizon, horizon), rows, cols);
  return out;
}

// Uniform velocity ids, N x T in sample-major order.
inline std::vector<int> sample_velocities(std::size_t samples, std::size_t horizon, Engine& rng) {
  std::vector<int> v(samples * horizon);
  for (int& x : v) x = static_cast<int>(uniform_index(rng, kVelocities.size()));
  return v;
}

inline PlanResult plan(Cell start, const BeliefGrid& belief, const PlanSpec& spec, Engine& rng) {
  spec.validate(belief.states());
  const std::vector<int> candidates = sample_velocities(spec.samples, spec.horizon, rng);
  return plan_from_candidates(start, belief, spec.action, candidates, spec.horizon);
}

// One uniformly random velocity sequence (the random-walk baseline).
inline RobotPath random_walk(Cell start, std::size_t horizon, std::size_t rows, std::size_t cols,
                             Engine& rng) {
  const std::vector<int> v = sample_velocities(1, horizon, rng);
  return integrate(start, v, rows, cols);
}

}  // namespace stgrid
