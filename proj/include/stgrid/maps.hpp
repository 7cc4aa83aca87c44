#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "stgrid/errors.hpp"
#include "stgrid/grid.hpp"

namespace stgrid {

// Grid coordinate; row grows downward.
struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Velocity set of the single integrator: down, up, right, left.
inline constexpr std::array<Cell, 4> kVelocities{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

// z_0..z_T and the velocity ids v_0..v_{T-1} that produced them.
struct RobotPath {
  std::vector<Cell> positions;
  std::vector<int> velocities;

  std::size_t horizon() const { return velocities.size(); }
  Cell start() const { return positions.front(); }
  Cell end() const { return positions.back(); }
  friend bool operator==(const RobotPath&, const RobotPath&) = default;
};

// Integer-valued H x W map.
template <typename T>
class CellMap {
 public:
  CellMap() = default;
  CellMap(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), cells_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return cells_.size(); }

  T& operator()(std::size_t i, std::size_t j) { return cells_[index(i, j)]; }
  T operator()(std::size_t i, std::size_t j) const { return cells_[index(i, j)]; }
  T& at(Cell c) { return (*this)(static_cast<std::size_t>(c.row), static_cast<std::size_t>(c.col)); }
  T at(Cell c) const { return (*this)(static_cast<std::size_t>(c.row), static_cast<std::size_t>(c.col)); }

  bool contains(Cell c) const {
    return c.row >= 0 && c.col >= 0 && static_cast<std::size_t>(c.row) < rows_ &&
           static_cast<std::size_t>(c.col) < cols_;
  }

  const std::vector<T>& cells() const { return cells_; }
  std::vector<T>& cells() { return cells_; }

  friend bool operator==(const CellMap&, const CellMap&) = default;

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
#ifdef STGRID_BOUNDS_CHECK
    if (i >= rows_ || j >= cols_) throw DomainError("CellMap index out of range");
#endif
    return i * cols_ + j;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> cells_;
};

using StateMap = CellMap<int>;
using VisitMask = CellMap<std::uint8_t>;

inline constexpr int kUnobserved = -1;

// Observation ids where mask is 1, kUnobserved elsewhere.
struct ObservationMap {
  CellMap<int> cells;
  VisitMask mask;

  ObservationMap() = default;
  ObservationMap(std::size_t rows, std::size_t cols)
      : cells(rows, cols, kUnobserved), mask(rows, cols, 0) {}

  std::size_t rows() const { return cells.rows(); }
  std::size_t cols() const { return cells.cols(); }

  bool consistent() const {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const bool seen = mask.cells()[k] != 0;
      if (seen != (cells.cells()[k] != kUnobserved)) return false;
    }
    return true;
  }

  friend bool operator==(const ObservationMap&, const ObservationMap&) = default;
};

// Per-cell simplex over states, stamped with the slow-time index k.
struct BeliefGrid {
  Grid3 probs;
  long k = 0;

  std::size_t states() const { return probs.channels(); }
  std::size_t rows() const { return probs.rows(); }
  std::size_t cols() const { return probs.cols(); }

  static BeliefGrid uniform(std::size_t states, std::size_t rows,
                            std::size_t cols) {
    return {Grid3(states, rows, cols, 1.0 / static_cast<double>(states)), 0};
  }

  // Largest |column sum - 1| and whether every entry is a finite nonnegative.
  double simplex_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows(); ++i)
      for (std::size_t j = 0; j < cols(); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < states(); ++c) {
          const double v = probs(c, i, j);
          if (!(v >= 0.0) || !std::isfinite(v)) return std::numeric_limits<double>::infinity();
          s += v;
        }
        worst = std::max(worst, std::abs(s - 1.0));
      }
    return worst;
  }

  bool valid(double tol = 1e-9) const { return simplex_error() <= tol; }

  friend bool operator==(const BeliefGrid&, const BeliefGrid&) = default;
};

inline Grid3 one_hot(const StateMap& state, std::size_t states) {
  Grid3 g(states, state.rows(), state.cols());
  for (std::size_t i = 0; i < state.rows(); ++i)
    for (std::size_t j = 0; j < state.cols(); ++j) {
      const int s = state(i, j);
      if (s < 0 || static_cast<std::size_t>(s) >= states)
        throw DomainError("state id out of range");
      g(static_cast<std::size_t>(s), i, j) = 1.0;
    }
  return g;
}

}  // namespace stgrid
