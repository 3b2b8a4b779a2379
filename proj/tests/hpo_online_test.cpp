#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "spsro/hpo_online.hpp"

namespace {

using namespace spsro;

void expect_valid(const HyperparamSelection& u, const HyperparamRanges& r) {
  ASSERT_EQ(u.weights.size(), r.num_solvers);
  double total = 0.0;
  for (double a : u.weights.values()) {
    EXPECT_GE(a, 0.0);
    total += a;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_GE(u.oracle.beta, 0.0);
  EXPECT_LE(u.oracle.beta, 1.0);
  EXPECT_GE(u.oracle.k, 1);
  EXPECT_LE(u.oracle.k, r.k_bar);
  EXPECT_EQ(u.oracle.k_bar, r.k_bar);
}

TEST(Random, ValidSuggestions) {
  const HyperparamRanges r{3, 5000, GameMode::kExtensiveForm};
  Rng rng(1);
  for (int i = 0; i < 500; ++i) expect_valid(suggest_random(r, rng), r);
}

TEST(Random, BudgetOfOne) {
  const HyperparamRanges r{3, 1, GameMode::kExtensiveForm};
  Rng rng(2);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(suggest_random(r, rng).oracle.k, 1);
}

TEST(Random, Reproducible) {
  const HyperparamRanges r{3, 5000, GameMode::kExtensiveForm};
  Rng a(7), b(7);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(suggest_random(r, a), suggest_random(r, b));
}

TEST(Random, NormalFormFixesOracle) {
  const HyperparamRanges r{3, 5000, GameMode::kNormalForm};
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto u = suggest_random(r, rng);
    EXPECT_EQ(u.oracle.beta, 0.0);
    EXPECT_EQ(u.oracle.k, 5000);
  }
}

double quadratic(const HyperparamSelection& u, int k_bar) {
  const double k_norm = (u.oracle.k - 1.0) / (k_bar - 1.0);
  return (u.oracle.beta - 0.8) * (u.oracle.beta - 0.8) + (k_norm - 0.3) * (k_norm - 0.3);
}

TrialHistory random_history(std::size_t n, const HyperparamRanges& r, std::uint64_t seed) {
  Rng rng(seed);
  TrialHistory h;
  for (std::size_t i = 0; i < n; ++i) {
    auto u = suggest_random(r, rng);
    const double y = quadratic(u, r.k_bar);
    h.push_back({std::move(u), y});
  }
  return h;
}

TEST(Tpe, NineObservationsFallBackToRandom) {
  const HyperparamRanges r{3, 5000, GameMode::kExtensiveForm};
  const auto history = random_history(9, r, 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng a(seed), b(seed);
    EXPECT_EQ(suggest_tpe(history, r, a), suggest_random(r, b));
  }
}

TEST(Tpe, IdenticalObservationsStillValid) {
  const HyperparamRanges r{3, 5000, GameMode::kExtensiveForm};
  auto history = random_history(20, r, 5);
  for (auto& o : history) o.y = 1.0;
  Rng rng(6);
  for (int i = 0; i < 50; ++i) expect_valid(suggest_tpe(history, r, rng), r);
}

TEST(Tpe, DeterministicGivenHistoryAndSeed) {
  const HyperparamRanges r{3, 5000, GameMode::kExtensiveForm};
  const auto history = random_history(25, r, 8);
  Rng a(11), b(11);
  EXPECT_EQ(suggest_tpe(history, r, a), suggest_tpe(history, r, b));
}

// One 50-trial optimization of the quadratic; returns the suggested betas
// and the running best y.
struct Trajectory {
  std::vector<double> betas;
  std::vector<double> best_so_far;
};

Trajectory optimize(OnlineKind kind, std::uint64_t seed) {
  const HyperparamRanges r{3, 5000, GameMode::kExtensiveForm};
  Rng rng(seed);
  TrialHistory h;
  Trajectory t;
  double best = 1e300;
  for (int i = 0; i < 50; ++i) {
    auto u = kind == OnlineKind::kTpe ? suggest_tpe(h, r, rng) : suggest_random(r, rng);
    const double y = quadratic(u, r.k_bar);
    best = std::min(best, y);
    t.betas.push_back(u.oracle.beta);
    t.best_so_far.push_back(best);
    h.push_back({std::move(u), y});
  }
  return t;
}

TEST(Tpe, ConcentratesNearQuadraticMinimum) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto betas = optimize(OnlineKind::kTpe, seed).betas;
    std::nth_element(betas.begin(), betas.begin() + 25, betas.end());
    EXPECT_NEAR(betas[25], 0.8, 0.2) << seed;
  }
}

TEST(Tpe, BeatsRandomOnMeanBestSoFar) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / v.size();
    };
    if (mean(optimize(OnlineKind::kTpe, seed).best_so_far) <= mean(optimize(OnlineKind::kRandom, seed).best_so_far)) {
      ++wins;
    }
  }
  EXPECT_GE(wins, 15);
}

TEST(OnlineSelector, UsesTraceAsHistory) {
  const HyperparamRanges r{3, 5000, GameMode::kExtensiveForm};
  OnlineSelector a(OnlineKind::kTpe, r, 3);
  OnlineSelector b(OnlineKind::kTpe, r, 3);
  RunTrace trace;
  trace.mode = GameMode::kExtensiveForm;
  for (int e = 1; e <= 15; ++e) {
    const auto u = a.next(trace);
    EXPECT_EQ(u, b.next(trace));
    expect_valid(u, r);
    EpochRecord rec;
    rec.selection = u;
    rec.metrics.epoch = e;
    rec.metrics.y = quadratic(u, r.k_bar);
    trace.epochs.push_back(rec);
  }
  EXPECT_EQ(a.name(), "tpe");
}

}  // namespace
