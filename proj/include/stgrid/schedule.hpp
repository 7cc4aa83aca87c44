#pragma once

#include <cmath>
#include <utility>

#include "stgrid/errors.hpp"

namespace stgrid {

// Polynomially vanishing step sizes eps_n = eta / (1 + n)^delta for the two
// learners. delta_sys > delta_dqn makes eps_sys / eps_dqn -> 0, so system
// identification runs on the slower time scale.
struct ScheduleParams {
  double eta_sys = 0.05;
  double eta_dqn = 0.05;
  double delta_sys = 0.8;
  double delta_dqn = 0.51;

  void validate() const {
    if (!(eta_sys >= 0.0) || !(eta_dqn >= 0.0))
      throw ConfigurationError("schedule: base rates must be nonnegative");
    if (!(delta_dqn > 0.5))
      throw ConfigurationError("schedule: delta_dqn must exceed 0.5");
    if (!(delta_sys > delta_dqn))
      throw ConfigurationError("schedule: delta_sys must exceed delta_dqn");
    if (!(delta_sys <= 1.0))
      throw ConfigurationError("schedule: delta_sys must not exceed 1");
  }
};

struct Rates {
  double sys = 0.0;
  double dqn = 0.0;
};

inline Rates ttur_rates(const ScheduleParams& s, long n) {
  s.validate();
  if (n < 0) throw ConfigurationError("ttur_rates: negative iteration");
  const double base = 1.0 + static_cast<double>(n);
  return {s.eta_sys / std::pow(base, s.delta_sys), s.eta_dqn / std::pow(base, s.delta_dqn)};
}

}  // namespace stgrid
