#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spsro/meta_game.hpp"

namespace spsro {

/// Per-player distributions over the current policy spaces.
struct MetaStrategy {
  std::array<Eigen::VectorXd, kNumPlayers> dist;

  const Eigen::VectorXd& operator[](int player) const { return dist[player]; }
  Eigen::VectorXd& operator[](int player) { return dist[player]; }
  bool operator==(const MetaStrategy& other) const {
    for (int p = 0; p < kNumPlayers; ++p) {
      if (dist[p].size() != other.dist[p].size() || dist[p] != other.dist[p]) return false;
    }
    return true;
  }
};

/// Throws InvalidArgument unless each distribution is on the simplex (1e-9).
void validate_meta_strategy(const MetaStrategy& sigma, const PayoffTensor& tensor);

enum class SolverId {
  kUniform,
  kPrd,
  kAlphaRank,
  kLastOne,
  kPenultimate,
  // Recognized so configs naming them fail with a clear message.
  kNash,
  kRectifiedNash,
  kCce,
};

std::string_view to_string(SolverId id);
SolverId solver_from_string(std::string_view name);

/// Ordered meta-solver list. Token layout follows this order.
struct SolverSet {
  std::vector<SolverId> ids{SolverId::kUniform, SolverId::kPrd, SolverId::kAlphaRank};

  std::size_t size() const { return ids.size(); }
  bool contains(SolverId id) const;
  std::ptrdiff_t index_of(SolverId id) const;  // -1 when absent
  bool operator==(const SolverSet&) const = default;
};

/// Nonnegative solver weights, normalized to sum to 1 on construction.
/// Input that already sums to 1 within 1e-12 is stored unchanged.
class SolverWeights {
 public:
  SolverWeights() = default;
  explicit SolverWeights(std::vector<double> alpha);

  static SolverWeights one_hot(std::size_t m, std::size_t index);
  static SolverWeights uniform(std::size_t m);

  const std::vector<double>& values() const { return alpha_; }
  double operator[](std::size_t b) const { return alpha_[b]; }
  std::size_t size() const { return alpha_.size(); }
  bool operator==(const SolverWeights&) const = default;

 private:
  std::vector<double> alpha_;
};

struct PrdConfig {
  std::size_t steps = 100000;
  double step_size = 1e-2;
  double gamma = 1e-6;
  bool average_iterates = true;
};

struct AlphaRankConfig {
  double alpha_scale = 50.0;
  double mutation = 1e-6;
  std::size_t max_profiles = 10000;
};

struct SolverConfig {
  PrdConfig prd;
  AlphaRankConfig alpharank;
};

MetaStrategy solve_uniform(const PayoffTensor& tensor);

/// Two-population projected replicator dynamics from the uniform point.
/// Each step moves both populations simultaneously along the replicator
/// field and projects them onto {x : sum x = 1, x_i >= gamma / n}.
/// Returns the average of all iterates, or the final iterate when
/// average_iterates is false.
MetaStrategy solve_prd(const PayoffTensor& tensor, const PrdConfig& config = {});

/// Two-population alpha-Rank over pure profiles (row, col).
///
/// From profile s, each unilateral deviation to s' (player p switching
/// strategy) is proposed with probability eta = 1 / sum_p (|S_p| - 1) and
/// accepted with probability (1 - mutation) * logistic(alpha_scale * f) +
/// mutation, where f is the deviator's payoff gain. The remaining mass stays
/// on s. The stationary distribution is marginalized onto each player.
MetaStrategy solve_alpharank(const PayoffTensor& tensor, const AlphaRankConfig& config = {});

/// Row-stochastic transition matrix of the alpha-Rank chain (profile index
/// row * cols + col). Exposed for tests and diagnostics.
Eigen::MatrixXd alpharank_transition_matrix(const PayoffTensor& tensor, const AlphaRankConfig& config = {});

/// Stationary distribution of an irreducible row-stochastic matrix, computed
/// with the Grassmann-Taksar-Heyman elimination and polished by power
/// iteration until ||xP - x||_inf <= tolerance.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition, double tolerance = 1e-10);

/// All mass on each player's newest policy.
MetaStrategy solve_last_one(const PayoffTensor& tensor);

/// All mass on each player's second-newest policy (newest when only one).
MetaStrategy solve_penultimate(const PayoffTensor& tensor);

MetaStrategy solve(SolverId id, const PayoffTensor& tensor, const SolverConfig& config = {});

/// sigma = sum_b alpha_b sigma_b, per player.
MetaStrategy mix_meta_strategies(std::span<const MetaStrategy> strategies, const SolverWeights& weights);

/// Euclidean projection of `x` onto {y : sum y = 1, y_i >= floor}.
Eigen::VectorXd project_to_floored_simplex(const Eigen::VectorXd& x, double floor);

}  // namespace spsro
