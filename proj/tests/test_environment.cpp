#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stgrid/environment.hpp"

using namespace stgrid;

namespace {

ModelParams params_with(Kernel4 k, ObsMatrix o, size_t H, size_t W) {
  ModelParams p;
  p.kernel = std::move(k);
  p.obs = std::move(o);
  p.rows = H;
  p.cols = W;
  return p;
}

StateMap random_state(size_t H, size_t W, int S, std::mt19937_64& rng) {
  StateMap s(H, W);
  for (int& v : s.cells()) v = static_cast<int>(rng() % static_cast<unsigned>(S));
  return s;
}

// 99.9% chi-square critical value for 2 degrees of freedom.
constexpr double kChi2Df2 = 13.816;

}  // namespace

TEST(TransitionOperator, IdentityKernelIsIdentity) {
  std::mt19937_64 rng(10);
  const BeliefGrid b = oracle::random_belief(3, 5, 5, rng);
  const auto p = params_with(Kernel4::identity(3), ObsMatrix::uniform(3, 3), 5, 5);
  const BeliefGrid out = transition_operator(b, p);
  for (size_t i = 0; i < out.probs.size(); ++i)
    EXPECT_NEAR(out.probs.data()[i], b.probs.data()[i], 1e-15);
}

TEST(TransitionOperator, ZeroWeightsUniformBiasGiveUniform) {
  std::mt19937_64 rng(11);
  Kernel4 k(3, 3, 3);
  for (size_t m = 0; m < 3; ++m) k.bias(m) = 0.7;
  const auto p = params_with(k, ObsMatrix::uniform(3, 3), 4, 4);
  const BeliefGrid out = transition_operator(oracle::random_belief(3, 4, 4, rng), p);
  for (double v : out.probs.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(TransitionOperator, OneHotBeliefMatchesComposedOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Kernel4 k = oracle::random_kernel(3, 3, 3, rng, 0.0, 1.0, 0.01, 0.5);
    const StateMap s = random_state(4, 5, 3, rng);
    const Grid3 x = one_hot(s, 3);
    const auto expected = oracle::normalize(
        oracle::correlate(oracle::from_grid(x), 3, 4, 5, {k.weights().begin(), k.weights().end()},
                          {k.biases().begin(), k.biases().end()}, 3, 3),
        3, 4, 5);
    const BeliefGrid out = transition_operator({x, 0}, params_with(k, ObsMatrix::uniform(3, 3), 4, 5));
    for (size_t i = 0; i < expected.size(); ++i) ASSERT_NEAR(out.probs.data()[i], expected[i], 1e-12);
    ASSERT_TRUE(out.valid(1e-12));
  }
}

TEST(StepState, DegenerateColumnsAreDeterministic) {
  // Zero kernel plus bias concentrated on state 2: Phi is one-hot everywhere
  // up to 1e-300 mass.
  Kernel4 k(3, 3, 3);
  k.bias(0) = 1e-300;
  k.bias(1) = 1e-300;
  k.bias(2) = 1.0;
  const auto p = params_with(k, ObsMatrix::uniform(3, 3), 6, 6);
  Engine rng = make_stream(1, Stream::kEnvTransition);
  std::mt19937_64 g(13);
  const StateMap next = step_state(random_state(6, 6, 3, g), p, rng);
  for (int v : next.cells()) EXPECT_EQ(v, 2);
}

TEST(StepState, EmpiricalLawMatchesPhiColumnsChiSquare) {
  std::mt19937_64 g(14);
  const Kernel4 k = oracle::random_kernel(3, 3, 3, g, 0.0, 1.0, 0.05, 0.5);
  const auto p = params_with(k, ObsMatrix::uniform(3, 3), 4, 4);
  const StateMap s = random_state(4, 4, 3, g);
  const BeliefGrid phi = transition_operator({one_hot(s, 3), 0}, p);
  Engine rng = make_stream(2, Stream::kEnvTransition);
  constexpr int kDraws = 100000;
  std::vector<std::array<int, 3>> counts(16, {0, 0, 0});
  for (int t = 0; t < kDraws; ++t) {
    const StateMap n = step_state(s, p, rng);
    for (size_t c = 0; c < 16; ++c) ++counts[c][static_cast<size_t>(n.cells()[c])];
  }
  for (size_t c = 0; c < 16; ++c) {
    double chi2 = 0.0;
    for (size_t m = 0; m < 3; ++m) {
      const double e = kDraws * phi.probs(m, c / 4, c % 4);
      chi2 += (counts[c][m] - e) * (counts[c][m] - e) / e;
      const double sigma = std::sqrt(e * (1.0 - e / kDraws));
      EXPECT_LE(std::abs(counts[c][m] - e), 3.0 * sigma + 1.0);
    }
    EXPECT_LT(chi2, kChi2Df2) << "cell " << c;
  }
}

TEST(StepState, NearIdentityKernelMostlyPersists) {
  Kernel4 k = Kernel4::identity(3);
  for (size_t m = 0; m < 3; ++m) k.bias(m) = 0.01;
  const auto p = params_with(k, ObsMatrix::uniform(3, 3), 8, 8);
  std::mt19937_64 g(15);
  const StateMap s = random_state(8, 8, 3, g);
  Engine rng = make_stream(3, Stream::kEnvTransition);
  const double stay = 1.01 / 1.03;
  long same = 0, total = 0;
  for (int t = 0; t < 2000; ++t) {
    const StateMap n = step_state(s, p, rng);
    for (size_t c = 0; c < n.size(); ++c) same += n.cells()[c] == s.cells()[c];
    total += static_cast<long>(n.size());
  }
  const double sigma = std::sqrt(stay * (1 - stay) / static_cast<double>(total));
  EXPECT_NEAR(static_cast<double>(same) / static_cast<double>(total), stay, 3 * sigma);
}

TEST(Observe, NoiselessRowsRevealStateOnVisitedCells) {
  ModelParams p = params_with(Kernel4::identity(3), ObsMatrix(3, 3, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1}), 5, 5);
  std::mt19937_64 g(16);
  const StateMap s = random_state(5, 5, 3, g);
  const std::vector<Cell> visited{{0, 0}, {1, 0}, {1, 1}, {4, 4}, {1, 1}};
  Engine rng = make_stream(4, Stream::kEnvObservation);
  const ObservationMap y = observe(s, visited, p, rng);
  EXPECT_TRUE(y.consistent());
  int seen = 0;
  for (size_t i = 0; i < 5; ++i)
    for (size_t j = 0; j < 5; ++j)
      if (y.mask(i, j)) {
        ++seen;
        EXPECT_EQ(y.cells(i, j), s(i, j));
      } else {
        EXPECT_EQ(y.cells(i, j), kUnobserved);
      }
  EXPECT_EQ(seen, 4);
}

TEST(Observe, LatentRowFrequencies) {
  const ModelParams p = wildfire_preset(1, 1);
  StateMap s(1, 1, 1);
  const std::vector<Cell> visited{{0, 0}};
  Engine rng = make_stream(5, Stream::kEnvObservation);
  constexpr int kDraws = 100000;
  std::array<int, 3> counts{0, 0, 0};
  for (int t = 0; t < kDraws; ++t) ++counts[static_cast<size_t>(observe(s, visited, p, rng).cells(0, 0))];
  const std::array<double, 3> row{0.80, 0.15, 0.05};
  double chi2 = 0.0;
  for (size_t l = 0; l < 3; ++l) {
    const double e = kDraws * row[l];
    const double sigma = std::sqrt(kDraws * row[l] * (1 - row[l]));
    EXPECT_LE(std::abs(counts[l] - e), 3 * sigma);
    chi2 += (counts[l] - e) * (counts[l] - e) / e;
  }
  EXPECT_LT(chi2, kChi2Df2);
}

TEST(Observe, ObservationLawMatchesMatrixRowsPerCell) {
  std::mt19937_64 g(17);
  const ObsMatrix o = oracle::random_obs(3, 3, g);
  const auto p = params_with(Kernel4::identity(3), o, 4, 4);
  const StateMap s = random_state(4, 4, 3, g);
  Engine rng = make_stream(6, Stream::kEnvObservation);
  constexpr int kDraws = 100000;
  std::vector<std::array<int, 3>> counts(16, {0, 0, 0});
  for (int t = 0; t < kDraws; ++t) {
    const ObservationMap y = observe_all(s, p, rng);
    for (size_t c = 0; c < 16; ++c) ++counts[c][static_cast<size_t>(y.cells.cells()[c])];
  }
  for (size_t c = 0; c < 16; ++c) {
    double chi2 = 0.0;
    for (size_t l = 0; l < 3; ++l) {
      const double e = kDraws * o(static_cast<size_t>(s.cells()[c]), l);
      chi2 += (counts[c][l] - e) * (counts[c][l] - e) / e;
    }
    EXPECT_LT(chi2, kChi2Df2) << "cell " << c;
  }
}

TEST(Observe, EmptyVisitSetObservesNothing) {
  const ModelParams p = wildfire_preset(3, 4);
  Engine rng = make_stream(7, Stream::kEnvObservation);
  const ObservationMap y = observe(StateMap(3, 4, 2), {}, p, rng);
  for (int v : y.cells.cells()) EXPECT_EQ(v, kUnobserved);
  for (auto m : y.mask.cells()) EXPECT_EQ(m, 0);
}

TEST(Observe, OutOfBoundsPositionIsDomainError) {
  const ModelParams p = wildfire_preset(3, 3);
  Engine rng = make_stream(8, Stream::kEnvObservation);
  const std::vector<Cell> bad{{3, 0}};
  EXPECT_THROW(observe(StateMap(3, 3, 0), bad, p, rng), DomainError);
}

TEST(Reward, CountsTimestepsOnTargetCells) {
  StateMap s(4, 4, 0);
  RobotPath away;
  for (int t = 0; t <= 5; ++t) away.positions.push_back({0, t % 4});
  EXPECT_EQ(reward(s, away, 2), 0);

  s(2, 3) = 2;
  RobotPath parked;
  parked.positions.assign(65, Cell{2, 3});
  EXPECT_EQ(reward(s, parked, 2), 65);
}

TEST(Reward, MatchesDirectLoopOracle) {
  std::mt19937_64 g(18);
  for (int trial = 0; trial < 200; ++trial) {
    const StateMap s = random_state(6, 7, 3, g);
    RobotPath path;
    for (int t = 0; t < 20; ++t)
      path.positions.push_back({static_cast<int>(g() % 6), static_cast<int>(g() % 7)});
    int expected = 0;
    for (size_t t = 0; t < path.positions.size(); ++t)
      if (s(static_cast<size_t>(path.positions[t].row), static_cast<size_t>(path.positions[t].col)) == 2) ++expected;
    ASSERT_EQ(reward(s, path, 2), expected);
  }
}

TEST(WildfirePreset, ObservationMatrixConstraints) {
  const ModelParams p = wildfire_preset(8, 8);
  EXPECT_DOUBLE_EQ(p.obs(1, 0), 0.80);
  EXPECT_DOUBLE_EQ(p.obs(1, 1), 0.15);
  EXPECT_DOUBLE_EQ(p.obs(1, 2), 0.05);
  EXPECT_NO_THROW(p.obs.validate(1e-12));
  for (double v : p.obs.values()) EXPECT_GT(v, 0.0);
  EXPECT_TRUE(p.kernel.simulator_admissible());
}

TEST(WildfirePreset, SpreadIsBiasedDownward) {
  const ModelParams p = wildfire_preset(8, 8);
  // Fire above a cell pushes it toward latent harder than fire below.
  EXPECT_GT(p.kernel.w(1, 2, 0, 1), p.kernel.w(1, 2, 2, 1));
}

TEST(WildfirePreset, FreeRunOccupiesAllStatesWithClusteredFire) {
  const ModelParams p = wildfire_preset(32, 32);
  Environment env(p, StateMap(32, 32, 0), make_stream(9, Stream::kEnvTransition),
                  make_stream(9, Stream::kEnvObservation));
  std::array<double, 3> occ{0, 0, 0};
  double cluster = 0.0;
  int samples = 0;
  for (int t = 0; t < 1200; ++t) {
    env.step();
    if (t < 200) continue;
    const auto f = occupancy(env.state(), 3);
    for (size_t m = 0; m < 3; ++m) occ[m] += f[m];
    cluster += mean_cluster_size(env.state(), 2);
    ++samples;
  }
  for (size_t m = 0; m < 3; ++m) EXPECT_GT(occ[m] / samples, 0.01) << "state " << m;
  const double non_normal = 1.0 - occ[0] / samples;
  EXPECT_GT(non_normal, 0.05);
  EXPECT_LT(non_normal, 0.25);
  EXPECT_GT(cluster / samples, 1.0);
}

TEST(Environment, FixedSeedIsBitReproducible) {
  auto run = [] {
    Environment env(wildfire_preset(16, 16), StateMap(16, 16, 0),
                    make_stream(42, Stream::kEnvTransition), make_stream(42, Stream::kEnvObservation));
    std::vector<int> trace;
    for (int t = 0; t < 100; ++t) {
      env.step();
      const ObservationMap y = env.observe_everything();
      trace.insert(trace.end(), env.state().cells().begin(), env.state().cells().end());
      trace.insert(trace.end(), y.cells.cells().begin(), y.cells.cells().end());
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(Environment, RewardIgnoresRng) {
  StateMap s(3, 3, 2);
  RobotPath path;
  path.positions = {{0, 0}, {0, 1}, {1, 1}};
  Environment a(wildfire_preset(3, 3), s, make_stream(1, Stream::kEnvTransition), make_stream(1, Stream::kEnvObservation));
  Environment b(wildfire_preset(3, 3), s, make_stream(2, Stream::kEnvTransition), make_stream(2, Stream::kEnvObservation));
  EXPECT_EQ(a.reward_of(path, 2), 3);
  EXPECT_EQ(a.reward_of(path, 2), b.reward_of(path, 2));
}
