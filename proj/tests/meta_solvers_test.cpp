#include <gtest/gtest.h>

#include <cmath>

#include "spsro/errors.hpp"
#include "spsro/meta_solvers.hpp"
#include "spsro/rng.hpp"
#include "reference_oracles.hpp"

namespace {

using namespace spsro;

PayoffTensor rps() {
  Eigen::MatrixXd m(3, 3);
  m << 0, -1, 1,
       1, 0, -1,
      -1, 1, 0;
  return PayoffTensor(m);
}

// Row 0 strictly dominates for the maximizer, column 0 for the minimizer.
PayoffTensor dominant_2x2() {
  Eigen::MatrixXd m(2, 2);
  m << 0.5, 0.8,
      -0.2, 0.3;
  return PayoffTensor(m);
}

PayoffTensor random_tensor(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  }
  return PayoffTensor(m);
}

void expect_simplex(const MetaStrategy& s, Eigen::Index rows, Eigen::Index cols) {
  ASSERT_EQ(s[0].size(), rows);
  ASSERT_EQ(s[1].size(), cols);
  for (int p = 0; p < 2; ++p) {
    EXPECT_NEAR(s[p].sum(), 1.0, 1e-9);
    EXPECT_GE(s[p].minCoeff(), 0.0);
  }
}

TEST(Uniform, Shapes) {
  const auto s = solve_uniform(random_tensor(2, 5, 1));
  expect_simplex(s, 2, 5);
  EXPECT_DOUBLE_EQ(s[0](1), 0.5);
  EXPECT_DOUBLE_EQ(s[1](4), 0.2);
  const auto one = solve_uniform(random_tensor(1, 1, 1));
  EXPECT_EQ(one[0](0), 1.0);
  EXPECT_EQ(one[1](0), 1.0);
}

TEST(Prd, RockPaperScissorsIsUniform) {
  const auto s = solve_prd(rps(), PrdConfig{100000, 1e-2, 1e-6, true});
  for (int p = 0; p < 2; ++p) {
    EXPECT_LE((s[p] - Eigen::Vector3d::Constant(1.0 / 3)).lpNorm<Eigen::Infinity>(), 1e-3);
  }
}

TEST(Prd, OneByOne) {
  const auto s = solve_prd(random_tensor(1, 1, 2));
  EXPECT_EQ(s[0](0), 1.0);
  EXPECT_EQ(s[1](0), 1.0);
}

TEST(Prd, DominantProfile) {
  const auto t = dominant_2x2();
  // Brute force: (0, 0) is the only pure profile where neither side gains by deviating.
  int equilibria = 0;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const bool row_ok = t(r, c) >= t(1 - r, c);
      const bool col_ok = t(r, c) <= t(r, 1 - c);
      if (row_ok && col_ok) {
        ++equilibria;
        EXPECT_EQ(r, 0);
        EXPECT_EQ(c, 0);
      }
    }
  }
  EXPECT_EQ(equilibria, 1);
  PrdConfig config;
  config.average_iterates = false;
  const auto last = solve_prd(t, config);
  EXPECT_GE(last[0](0), 1.0 - config.gamma - 1e-3);
  EXPECT_GE(last[1](0), 1.0 - config.gamma - 1e-3);
  // The iterate average carries the transient from the uniform start.
  config.average_iterates = true;
  const auto avg = solve_prd(t, config);
  EXPECT_GE(avg[0](0), 0.99);
  EXPECT_GE(avg[1](0), 0.99);
}

TEST(Prd, RespectsFloorAndSimplex) {
  PrdConfig config;
  config.steps = 5000;
  config.gamma = 0.05;
  for (bool average : {true, false}) {
    config.average_iterates = average;
    const auto t = random_tensor(4, 6, 9);
    const auto s = solve_prd(t, config);
    expect_simplex(s, 4, 6);
    EXPECT_GE(s[0].minCoeff(), config.gamma / 4 - 1e-12);
    EXPECT_GE(s[1].minCoeff(), config.gamma / 6 - 1e-12);
  }
}

TEST(Projection, FlooredSimplex) {
  const Eigen::Vector3d x(0.9, 0.5, -0.4);
  const auto y = project_to_floored_simplex(x, 0.01);
  EXPECT_NEAR(y.sum(), 1.0, 1e-12);
  EXPECT_GE(y.minCoeff(), 0.01 - 1e-15);
  // Already feasible points are fixed.
  const Eigen::Vector3d z(0.2, 0.3, 0.5);
  EXPECT_LE((project_to_floored_simplex(z, 0.01) - z).norm(), 1e-15);
}

TEST(AlphaRank, DominantProfileMatchesExactChain) {
  const auto t = dominant_2x2();
  const AlphaRankConfig config;
  const auto s = solve_alpharank(t, config);
  const auto pi = reference::alpharank_2x2(t, config.alpha_scale, config.mutation);
  EXPECT_NEAR(s[0](0), pi(0) + pi(1), 1e-6);
  EXPECT_NEAR(s[1](0), pi(0) + pi(2), 1e-6);
  EXPECT_GE(s[0](0), 0.95);
  EXPECT_GE(s[1](0), 0.95);
}

TEST(AlphaRank, RandomTwoByTwoMatchesExactChain) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = random_tensor(2, 2, seed + 100);
    AlphaRankConfig config;
    config.alpha_scale = 5.0;
    config.mutation = 1e-3;
    const auto s = solve_alpharank(t, config);
    const auto pi = reference::alpharank_2x2(t, config.alpha_scale, config.mutation);
    EXPECT_NEAR(s[0](0), pi(0) + pi(1), 1e-6) << seed;
    EXPECT_NEAR(s[1](0), pi(0) + pi(2), 1e-6) << seed;
  }
}

TEST(AlphaRank, ConstantTensorIsUniform) {
  const PayoffTensor t(Eigen::MatrixXd::Constant(3, 3, 0.25));
  const auto s = solve_alpharank(t);
  for (int p = 0; p < 2; ++p) {
    EXPECT_NEAR((s[p] - Eigen::Vector3d::Constant(1.0 / 3)).lpNorm<Eigen::Infinity>(), 0.0, 1e-9);
  }
  const auto one = solve_alpharank(random_tensor(1, 1, 3));
  EXPECT_EQ(one[0](0), 1.0);
  EXPECT_EQ(one[1](0), 1.0);
}

TEST(AlphaRank, StationaryResidualAndStochasticity) {
  const auto t = random_tensor(5, 4, 77);
  const auto p = alpharank_transition_matrix(t);
  ASSERT_EQ(p.rows(), 20);
  for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
  const Eigen::VectorXd x = stationary_distribution(p);
  EXPECT_NEAR(x.sum(), 1.0, 1e-12);
  const Eigen::RowVectorXd residual = x.transpose() * p - x.transpose();
  EXPECT_LE(residual.lpNorm<Eigen::Infinity>(), 1e-10);
  expect_simplex(solve_alpharank(t), 5, 4);
}

TEST(AlphaRank, ProfileLimitIsResourceLimit) {
  AlphaRankConfig config;
  config.max_profiles = 10;
  EXPECT_THROW(solve_alpharank(random_tensor(4, 4, 1), config), ResourceLimit);
}

TEST(LastOne, MassOnNewest) {
  const auto s = solve_last_one(random_tensor(3, 1, 1));
  EXPECT_TRUE(s[0] == Eigen::Vector3d(0, 0, 1));
  EXPECT_EQ(s[1](0), 1.0);
}

TEST(Penultimate, MassOnSecondNewest) {
  const auto s = solve_penultimate(random_tensor(3, 1, 1));
  EXPECT_TRUE(s[0] == Eigen::Vector3d(0, 1, 0));
  EXPECT_EQ(s[1](0), 1.0);
}

TEST(Dispatch, UnsupportedSolversAreNotImplemented) {
  const auto t = random_tensor(2, 2, 1);
  EXPECT_THROW(solve(SolverId::kNash, t), NotImplemented);
  EXPECT_THROW(solve(SolverId::kRectifiedNash, t), NotImplemented);
  EXPECT_THROW(solve(SolverId::kCce, t), NotImplemented);
  EXPECT_EQ(solver_from_string("nash"), SolverId::kNash);
  EXPECT_THROW(solver_from_string("bogus"), InvalidArgument);
  EXPECT_EQ(solve(SolverId::kUniform, t), solve_uniform(t));
}

TEST(Mixing, OneHotReturnsThatSolver) {
  const auto t = random_tensor(3, 3, 5);
  const std::vector<MetaStrategy> outs{solve_last_one(t), solve_uniform(t), solve_penultimate(t)};
  EXPECT_EQ(mix_meta_strategies(outs, SolverWeights({1, 0, 0})), outs[0]);
}

TEST(Mixing, IdenticalInputsIgnoreWeights) {
  const auto t = random_tensor(3, 4, 6);
  const auto s = solve_prd(t, PrdConfig{2000, 1e-2, 1e-6, true});
  const std::vector<MetaStrategy> outs{s, s, s};
  const auto mixed = mix_meta_strategies(outs, SolverWeights({0.2, 0.5, 0.3}));
  for (int p = 0; p < 2; ++p) EXPECT_LE((mixed[p] - s[p]).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(Mixing, HalfAndHalf) {
  MetaStrategy a, b;
  a[0] = Eigen::Vector2d(1, 0);
  a[1] = Eigen::Vector2d(0, 1);
  b[0] = Eigen::Vector2d(0, 1);
  b[1] = Eigen::Vector2d(1, 0);
  const std::vector<MetaStrategy> outs{a, b, a};
  const auto mixed = mix_meta_strategies(outs, SolverWeights({0.5, 0.5, 0}));
  EXPECT_TRUE(mixed[0] == Eigen::Vector2d(0.5, 0.5));
  EXPECT_TRUE(mixed[1] == Eigen::Vector2d(0.5, 0.5));
}

TEST(Mixing, AffineInWeights) {
  const auto t = random_tensor(3, 3, 8);
  const std::vector<MetaStrategy> outs{solve_uniform(t), solve_last_one(t), solve_penultimate(t)};
  const auto w1 = mix_meta_strategies(outs, SolverWeights({0.6, 0.4, 0}));
  const auto w2 = mix_meta_strategies(outs, SolverWeights({0, 0.4, 0.6}));
  const auto mid = mix_meta_strategies(outs, SolverWeights({0.3, 0.4, 0.3}));
  for (int p = 0; p < 2; ++p) EXPECT_LE((mid[p] - 0.5 * (w1[p] + w2[p])).norm(), 1e-12);
}

TEST(Weights, NormalizeAndRejectBadInput) {
  const SolverWeights w({2, 1, 1});
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_THROW(SolverWeights({0, 0, 0}), InvalidArgument);
  EXPECT_THROW(SolverWeights({1, -1, 1}), InvalidArgument);
  EXPECT_EQ(SolverWeights::one_hot(3, 1).values(), (std::vector<double>{0, 1, 0}));
}

TEST(Validation, MetaStrategyOffSimplex) {
  const auto t = random_tensor(2, 2, 1);
  MetaStrategy s = solve_uniform(t);
  EXPECT_NO_THROW(validate_meta_strategy(s, t));
  s[0](0) = 0.9;
  EXPECT_THROW(validate_meta_strategy(s, t), InvalidArgument);
}

}  // namespace
