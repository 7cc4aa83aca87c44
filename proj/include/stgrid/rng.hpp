#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>

namespace stgrid {

using Engine = std::mt19937_64;

// Stream ids for the master-seed split. Adding a stream never perturbs the
// others because every stream is seeded from (master, id) alone.
enum class Stream : std::uint32_t {
  kEnvInit = 1,
  kEnvTransition = 2,
  kEnvObservation = 3,
  kPlanner = 4,
  kAgent = 5,
  kSysInit = 6,
  kSysTrain = 7,
  kDqnInit = 8,
  kDqnTrain = 9,
  kRnnState = 10,
  kHeldOut = 11,
};

inline Engine make_stream(std::uint64_t master, Stream id) {
  const auto sid = static_cast<std::uint32_t>(id);
  std::seed_seq seq{static_cast<std::uint32_t>(master & 0xffffffffu),
                    static_cast<std::uint32_t>(master >> 32), sid,
                    0x5f3759dfu ^ sid};
  return Engine(seq);
}

// 53-bit uniform in [0, 1).
inline double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n).
inline std::uint64_t uniform_index(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Box-Muller without a cached second draw, so the engine is the only state.
inline double standard_normal(Engine& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

// Inverse-CDF draw; probs need not be exactly normalized.
inline int sample_categorical(Engine& rng, std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (target < acc) return static_cast<int>(i);
  }
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i);
  return static_cast<int>(probs.size()) - 1;
}

inline std::string engine_state(const Engine& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_engine(Engine& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
}

}  // namespace stgrid
