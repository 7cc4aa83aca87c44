#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stgrid/environment.hpp"
#include "stgrid/errors.hpp"
#include "stgrid/maps.hpp"

namespace stgrid {

// b(y)_m = O[m, y].
inline std::vector<double> likelihood_vector(int observation, const ObsMatrix& obs) {
  if (observation < 0 || static_cast<std::size_t>(observation) >= obs.observations())
    throw DomainError("likelihood_vector: observation id out of range");
  std::vector<double> b(obs.states());
  for (std::size_t m = 0; m < obs.states(); ++m)
    b[m] = obs(m, static_cast<std::size_t>(observation));
  return b;
}

// Posterior B(y)u / b(y)'u on observed cells; unobserved cells keep the
// predictor column. Each cell is independent of the others.
inline BeliefGrid bayes_correct(const BeliefGrid& predictor, const ObservationMap& y,
                                const ObsMatrix& obs) {
  const std::size_t S = predictor.states();
  if (obs.states() != S) throw ConfigurationError("bayes_correct: |S| mismatch");
  if (y.rows() != predictor.rows() || y.cols() != predictor.cols())
    throw ConfigurationError("bayes_correct: observation dims do not match belief");
  BeliefGrid post = predictor;
  for (std::size_t i = 0; i < predictor.rows(); ++i) {
    for (std::size_t j = 0; j < predictor.cols(); ++j) {
      if (!y.mask(i, j)) continue;
      const int l = y.cells(i, j);
      if (l < 0 || static_cast<std::size_t>(l) >= obs.observations())
        throw DomainError("bayes_correct: observation id out of range");
      double denom = 0.0;
      for (std::size_t m = 0; m < S; ++m) {
        const double v = obs(m, static_cast<std::size_t>(l)) * predictor.probs(m, i, j);
        post.probs(m, i, j) = v;
        denom += v;
      }
      if (!(denom > 1e-300))
        throw DegenerateBeliefError("bayes_correct: vanishing evidence at cell (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      for (std::size_t m = 0; m < S; ++m) post.probs(m, i, j) /= denom;
    }
  }
  return post;
}

// u_{k+1} = Phi(p_k).
inline BeliefGrid predict(const BeliefGrid& estimate, const ModelParams& params) {
  BeliefGrid u = transition_operator(estimate, params);
  u.k = estimate.k + 1;
  return u;
}

// Alternates correction and prediction from u_0; returns p_k for every y_k.
inline std::vector<BeliefGrid> filter_run(std::span<const ObservationMap> observations,
                                          const ModelParams& params,
                                          const BeliefGrid& initial) {
  std::vector<BeliefGrid> estimates;
  estimates.reserve(observations.size());
  BeliefGrid u = initial;
  for (const ObservationMap& y : observations) {
    BeliefGrid p = bayes_correct(u, y, params.obs);
    u = predict(p, params);
    estimates.push_back(std::move(p));
  }
  return estimates;
}

// Mean over cells of -ln p[x_true]; probabilities floored at 1e-300.
inline double mean_cross_entropy(const BeliefGrid& belief, const StateMap& truth) {
  double total = 0.0;
  for (std::size_t i = 0; i < truth.rows(); ++i)
    for (std::size_t j = 0; j < truth.cols(); ++j)
      total -= std::log(std::max(
          belief.probs(static_cast<std::size_t>(truth(i, j)), i, j), 1e-300));
  return total / static_cast<double>(truth.size());
}

}  // namespace stgrid
