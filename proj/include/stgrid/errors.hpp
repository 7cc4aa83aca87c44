#pragma once

#include <stdexcept>
#include <string>

namespace stgrid {

// Shapes or settings that can never produce a valid computation.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Values outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Bayes denominator collapsed; either O or the belief is corrupted.
class DegenerateBeliefError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stgrid

#if defined(STGRID_CHECKED) || !defined(NDEBUG)
#define STGRID_BOUNDS_CHECK 1
#endif
