#pragma once

// The empirical meta-game: per-player policy populations and the matrix of
// exact expected payoffs between them.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "spsro/game.hpp"

namespace spsro {

/// Per-player ordered populations. Index e-1 holds the policy added at epoch
/// e until pruning removes entries.
struct PolicySpace {
  std::array<std::vector<Policy>, kNumPlayers> policies;

  std::size_t size(int player) const { return policies[player].size(); }
  void append(int player, Policy policy) { policies[player].push_back(std::move(policy)); }
};

/// Player 0's exact expected payoff for every (row policy, column policy).
class PayoffTensor {
 public:
  PayoffTensor() = default;
  explicit PayoffTensor(Eigen::MatrixXd values) : values_(std::move(values)) {}

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  double operator()(Eigen::Index row, Eigen::Index col) const { return values_(row, col); }
  const Eigen::MatrixXd& matrix() const { return values_; }
  Eigen::MatrixXd& matrix() { return values_; }
  bool empty() const { return values_.size() == 0; }

  bool operator==(const PayoffTensor& other) const {
    return rows() == other.rows() && cols() == other.cols() && values_ == other.values_;
  }

 private:
  Eigen::MatrixXd values_;
};

/// Fills every entry of the enlarged tensor that is not already present.
/// Existing entries are copied bit-for-bit. `evaluations`, when given,
/// receives the number of expected_value calls performed.
PayoffTensor update_payoff_tensor(const PolicySpace& space, const PayoffTensor& tensor,
                                  const Game& game, std::size_t* evaluations = nullptr);

struct PruneResult {
  PolicySpace space;
  PayoffTensor tensor;
  std::size_t removed_index = 0;
};

/// Removes the policy of `player` with the smallest meta-strategy mass
/// (lowest index on ties) together with its tensor row or column.
/// Requires space.size(player) > cap.
PruneResult prune_policy(PolicySpace space, PayoffTensor tensor, const Eigen::VectorXd& meta_strategy,
                         int player, std::size_t cap);

/// Row-major CSV dump of player 0's payoffs.
void write_csv(std::ostream& out, const PayoffTensor& tensor);

}  // namespace spsro
