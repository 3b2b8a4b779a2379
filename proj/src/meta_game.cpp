#include "spsro/meta_game.hpp"

#include <charconv>
#include <ostream>

#include "spsro/errors.hpp"

namespace spsro {

PayoffTensor update_payoff_tensor(const PolicySpace& space, const PayoffTensor& tensor, const Game& game,
                                  std::size_t* evaluations) {
  const auto rows = static_cast<Eigen::Index>(space.size(0));
  const auto cols = static_cast<Eigen::Index>(space.size(1));
  if (tensor.rows() > rows || tensor.cols() > cols) {
    throw InvalidArgument("update_payoff_tensor: tensor is larger than the policy space");
  }
  std::size_t count = 0;
  Eigen::MatrixXd values(rows, cols);
  for (Eigen::Index j = 0; j < rows; ++j) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (j < tensor.rows() && k < tensor.cols()) {
        values(j, k) = tensor(j, k);
      } else {
        values(j, k) = expected_value(game, space.policies[0][j], space.policies[1][k])[0];
        ++count;
      }
    }
  }
  if (evaluations) *evaluations = count;
  return PayoffTensor(std::move(values));
}

PruneResult prune_policy(PolicySpace space, PayoffTensor tensor, const Eigen::VectorXd& meta_strategy, int player,
                         std::size_t cap) {
  const std::size_t size = space.size(player);
  if (size <= cap) {
    throw PreconditionViolation("prune_policy: player " + std::to_string(player) + " has " + std::to_string(size) +
                                " policies, cap is " + std::to_string(cap));
  }
  if (static_cast<std::size_t>(meta_strategy.size()) != size) {
    throw InvalidArgument("prune_policy: meta-strategy length does not match the policy space");
  }
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < size; ++i) {
    if (meta_strategy[static_cast<Eigen::Index>(i)] < meta_strategy[static_cast<Eigen::Index>(argmin)]) argmin = i;
  }
  auto& list = space.policies[player];
  list.erase(list.begin() + static_cast<std::ptrdiff_t>(argmin));

  const Eigen::MatrixXd& old = tensor.matrix();
  const auto drop = static_cast<Eigen::Index>(argmin);
  Eigen::MatrixXd shrunk;
  if (player == 0) {
    shrunk.resize(old.rows() - 1, old.cols());
    shrunk.topRows(drop) = old.topRows(drop);
    shrunk.bottomRows(old.rows() - drop - 1) = old.bottomRows(old.rows() - drop - 1);
  } else {
    shrunk.resize(old.rows(), old.cols() - 1);
    shrunk.leftCols(drop) = old.leftCols(drop);
    shrunk.rightCols(old.cols() - drop - 1) = old.rightCols(old.cols() - drop - 1);
  }
  return PruneResult{std::move(space), PayoffTensor(std::move(shrunk)), argmin};
}

void write_csv(std::ostream& out, const PayoffTensor& tensor) {
  char buf[32];
  for (Eigen::Index j = 0; j < tensor.rows(); ++j) {
    for (Eigen::Index k = 0; k < tensor.cols(); ++k) {
      if (k) out << ',';
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), tensor(j, k));
      out.write(buf, end - buf);
    }
    out << '\n';
  }
}

}  // namespace spsro
