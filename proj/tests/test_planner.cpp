#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "oracles.hpp"
#include "stgrid/planner.hpp"

using namespace stgrid;

namespace {

BeliefGrid column_field(std::vector<double> col, size_t H, size_t W) {
  Grid3 g(col.size(), H, W);
  for (size_t m = 0; m < col.size(); ++m)
    for (size_t i = 0; i < H; ++i)
      for (size_t j = 0; j < W; ++j) g(m, i, j) = col[m];
  return {g, 0};
}

// Independent cost: entropy or negated probability read directly from the field.
double oracle_cell_cost(const BeliefGrid& b, int r, int c, int action) {
  const auto i = static_cast<size_t>(r), j = static_cast<size_t>(c);
  if (action < static_cast<int>(b.states())) return -b.probs(static_cast<size_t>(action), i, j);
  double h = 0.0;
  for (size_t m = 0; m < b.states(); ++m) {
    const double p = b.probs(m, i, j);
    if (p > 0) h -= p * std::log(p);
  }
  return -h;
}

// Walks a velocity sequence with explicit edge saturation and sums costs.
double oracle_rollout(const BeliefGrid& b, Cell start, const std::vector<int>& seq, int action) {
  static const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
  int r = start.row, c = start.col;
  double total = oracle_cell_cost(b, r, c, action);
  for (int v : seq) {
    r += dr[v];
    c += dc[v];
    if (r < 0) r = 0;
    if (c < 0) c = 0;
    if (r > static_cast<int>(b.rows()) - 1) r = static_cast<int>(b.rows()) - 1;
    if (c > static_cast<int>(b.cols()) - 1) c = static_cast<int>(b.cols()) - 1;
    total += oracle_cell_cost(b, r, c, action);
  }
  return total / static_cast<double>(seq.size() + 1);
}

std::vector<int> all_sequences(size_t T) {
  size_t n = 1;
  for (size_t t = 0; t < T; ++t) n *= 4;
  std::vector<int> v;
  v.reserve(n * T);
  for (size_t s = 0; s < n; ++s) {
    size_t x = s;
    for (size_t t = 0; t < T; ++t) {
      v.push_back(static_cast<int>(x % 4));
      x /= 4;
    }
  }
  return v;
}

}  // namespace

TEST(RunningCost, Cases) {
  const BeliefGrid b = column_field({0.05, 0.05, 0.9}, 2, 2);
  EXPECT_DOUBLE_EQ(running_cost({0, 0}, b, 2), -0.9);
  EXPECT_DOUBLE_EQ(running_cost({1, 1}, b, 0), -0.05);
  const BeliefGrid onehot = column_field({0.0, 1.0, 0.0}, 2, 2);
  EXPECT_EQ(running_cost({0, 1}, onehot, 3), 0.0);
  const BeliefGrid uni = BeliefGrid::uniform(3, 2, 2);
  EXPECT_NEAR(running_cost({1, 0}, uni, 3), -std::log(3.0), 1e-15);
  EXPECT_NEAR(running_cost({1, 0}, uni, 3), -1.0986, 1e-4);
}

TEST(RunningCost, Errors) {
  const BeliefGrid b = BeliefGrid::uniform(3, 2, 2);
  EXPECT_THROW(running_cost({0, 0}, b, 4), DomainError);
  EXPECT_THROW(running_cost({0, 0}, b, -1), DomainError);
  EXPECT_THROW(running_cost({2, 0}, b, 0), DomainError);
  EXPECT_THROW(running_cost({0, -1}, b, 0), DomainError);
}

TEST(RolloutCost, ConstantFieldIsPathIndependent) {
  const BeliefGrid b = column_field({0.2, 0.3, 0.5}, 5, 5);
  Engine rng = make_stream(1, Stream::kPlanner);
  for (int a = 0; a < 4; ++a)
    for (int t = 0; t < 20; ++t) {
      const RobotPath p = random_walk({2, 2}, 7, 5, 5, rng);
      EXPECT_NEAR(rollout_cost(p, b, a), running_cost({0, 0}, b, a), 1e-15);
    }
}

TEST(RolloutCost, SingleStepAveragesTwoCells) {
  std::mt19937_64 g(2);
  const BeliefGrid b = oracle::random_belief(3, 4, 4, g);
  const std::vector<int> v{2};
  const RobotPath p = integrate({1, 1}, v, 4, 4);
  ASSERT_EQ(p.positions.size(), 2u);
  EXPECT_EQ(p.end(), (Cell{1, 2}));
  for (int a = 0; a < 4; ++a)
    EXPECT_DOUBLE_EQ(rollout_cost(p, b, a), (running_cost({1, 1}, b, a) + running_cost({1, 2}, b, a)) / 2.0);
}

TEST(RolloutCost, MatchesNaiveSummationOracle) {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int H = 1 + static_cast<int>(g() % 7), W = 1 + static_cast<int>(g() % 7);
    const BeliefGrid b = oracle::random_belief(3, H, W, g);
    const size_t T = 1 + g() % 12;
    std::vector<int> seq(T);
    for (int& v : seq) v = static_cast<int>(g() % 4);
    const Cell start{static_cast<int>(g() % static_cast<unsigned>(H)), static_cast<int>(g() % static_cast<unsigned>(W))};
    const int a = static_cast<int>(g() % 4);
    EXPECT_NEAR(rollout_cost(integrate(start, seq, static_cast<size_t>(H), static_cast<size_t>(W)), b, a),
                oracle_rollout(b, start, seq, a), 1e-12);
  }
}

TEST(Integrate, ClampingKeepsEveryPositionInBounds) {
  std::mt19937_64 g(4);
  for (int trial = 0; trial < 500; ++trial) {
    const size_t H = 1 + g() % 5, W = 1 + g() % 5;
    std::vector<int> seq(1 + g() % 30);
    for (int& v : seq) v = static_cast<int>(g() % 4);
    const RobotPath p = integrate({0, 0}, seq, H, W);
    ASSERT_EQ(p.positions.size(), seq.size() + 1);
    for (Cell c : p.positions) {
      ASSERT_GE(c.row, 0);
      ASSERT_GE(c.col, 0);
      ASSERT_LT(c.row, static_cast<int>(H));
      ASSERT_LT(c.col, static_cast<int>(W));
    }
    for (size_t t = 0; t + 1 < p.positions.size(); ++t)
      ASSERT_LE(std::abs(p.positions[t + 1].row - p.positions[t].row) +
                    std::abs(p.positions[t + 1].col - p.positions[t].col),
                1);
  }
}

TEST(Plan, ExhaustiveEnumerationMatchesBruteForceOptimum) {
  std::mt19937_64 g(5);
  const std::vector<int> cands = all_sequences(4);
  ASSERT_EQ(cands.size(), 256u * 4u);
  for (int trial = 0; trial < 100; ++trial) {
    const BeliefGrid b = oracle::random_belief(3, 3, 3, g);
    const Cell start{static_cast<int>(g() % 3), static_cast<int>(g() % 3)};
    const int a = trial % 4;
    double best = std::numeric_limits<double>::infinity();
    for (size_t s = 0; s < 256; ++s) {
      const std::vector<int> seq(cands.begin() + static_cast<long>(s * 4), cands.begin() + static_cast<long>(s * 4 + 4));
      best = std::min(best, oracle_rollout(b, start, seq, a));
    }
    const PlanResult r = plan_from_candidates(start, b, a, cands, 4);
    EXPECT_EQ(r.cost, best) << "trial " << trial;
    EXPECT_EQ(rollout_cost(r.path, b, a), r.cost);
  }
}

TEST(Plan, StepsOntoAdjacentFire) {
  BeliefGrid b = column_field({0.9, 0.05, 0.05}, 5, 5);
  b.probs(0, 2, 3) = 0.05;
  b.probs(2, 2, 3) = 0.9;
  Engine rng = make_stream(6, Stream::kPlanner);
  const RobotPath p = plan({2, 2}, b, PlanSpec{2, 1, 64}, rng).path;
  EXPECT_EQ(p.end(), (Cell{2, 3}));
  EXPECT_EQ(p.velocities, (std::vector<int>{2}));
}

TEST(Plan, ArgminPropertyAndLowestIndexTies) {
  std::mt19937_64 g(7);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const BeliefGrid b = oracle::random_belief(3, 8, 8, g);
    Engine rng = make_stream(seed, Stream::kPlanner);
    const PlanResult r = plan({4, 4}, b, PlanSpec{static_cast<int>(seed % 4), 6, 64}, rng);
    for (double c : r.costs) EXPECT_LE(r.cost, c);
    for (size_t s = 0; s < r.index; ++s) EXPECT_GT(r.costs[s], r.cost);
  }
  // Constant field: every candidate ties, the first wins.
  const BeliefGrid flat = BeliefGrid::uniform(3, 4, 4);
  Engine rng = make_stream(8, Stream::kPlanner);
  EXPECT_EQ(plan({1, 1}, flat, PlanSpec{3, 5, 32}, rng).index, 0u);
}

TEST(Plan, ExpectedCostNonIncreasingInSampleCount) {
  std::mt19937_64 g(9);
  const size_t Ns[] = {4, 16, 64, 256};
  double mean[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const BeliefGrid b = oracle::random_belief(3, 10, 10, g);
    for (size_t k = 0; k < 4; ++k) {
      Engine rng = make_stream(seed, Stream::kPlanner);
      mean[k] += plan({5, 5}, b, PlanSpec{2, 8, Ns[k]}, rng).cost / 100.0;
    }
  }
  for (size_t k = 0; k + 1 < 4; ++k) EXPECT_LE(mean[k + 1], mean[k] + 1e-3);
}

TEST(Plan, PureFunctionOfSeedAndWorkerCount) {
  std::mt19937_64 g(10);
  const BeliefGrid b = oracle::random_belief(3, 12, 12, g);
  Engine r1 = make_stream(11, Stream::kPlanner), r2 = make_stream(11, Stream::kPlanner);
  const PlanResult a = plan({0, 0}, b, PlanSpec{3, 16, 256}, r1);
  ::setenv("STGRID_THREADS", "4", 1);
  const PlanResult c = plan({0, 0}, b, PlanSpec{3, 16, 256}, r2);
  ::unsetenv("STGRID_THREADS");
  EXPECT_EQ(a.costs, c.costs);
  EXPECT_EQ(a.path.positions, c.path.positions);
  EXPECT_EQ(a.path.velocities, c.path.velocities);
}

TEST(Plan, RejectsBadSpecs) {
  const BeliefGrid b = BeliefGrid::uniform(3, 3, 3);
  Engine rng = make_stream(12, Stream::kPlanner);
  EXPECT_THROW(plan({0, 0}, b, PlanSpec{2, 0, 4}, rng), ConfigurationError);
  EXPECT_THROW(plan({0, 0}, b, PlanSpec{2, 4, 0}, rng), ConfigurationError);
  EXPECT_THROW(plan({0, 0}, b, PlanSpec{5, 4, 4}, rng), DomainError);
  EXPECT_THROW(plan({3, 0}, b, PlanSpec{2, 4, 4}, rng), DomainError);
}

TEST(RandomWalk, VelocityFrequenciesUniformWithinThreeSigma) {
  Engine rng = make_stream(13, Stream::kPlanner);
  std::vector<int> counts(4, 0);
  int total = 0;
  for (int t = 0; t < 1000; ++t)
    for (int v : random_walk({3, 3}, 16, 8, 8, rng).velocities) {
      ++counts[static_cast<size_t>(v)];
      ++total;
    }
  const double p = 0.25, sigma = std::sqrt(total * p * (1 - p));
  for (int c : counts) EXPECT_LE(std::abs(c - total * p), 3 * sigma);
}
