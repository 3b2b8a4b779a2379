#pragma once

// Best-response oracles: exact for matrix games and Kuhn poker, tabular
// Q-learning for the (beta, K)-parameterized extensive-form oracle.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spsro/game.hpp"

namespace spsro {

/// beta mixes the previous best response into the initial policy; k is the
/// number of training episodes, bounded by k_bar.
struct OracleParams {
  double beta = 0.0;
  int k = 5000;
  int k_bar = 5000;

  void validate() const;
  bool operator==(const OracleParams&) const = default;
};

enum class OracleKind { kExact, kQLearning };

std::string_view to_string(OracleKind kind);
OracleKind oracle_kind_from_string(std::string_view name);

/// Fixed Q-learning constants. Epsilon decays linearly from eps_initial to
/// eps_final over the first anneal_fraction of the episodes.
struct QLearningConfig {
  double lr = 0.05;
  double eps_initial = 1.0;
  double eps_final = 0.05;
  double anneal_fraction = 0.8;
  double discount = 1.0;
};

using QTable = std::map<std::string, std::vector<double>>;

struct NfgBestResponse {
  PureAction action;
  double value = 0.0;
};

/// Best pure action of `player` against the opponent's mixture over its pure
/// policies. Ties go to the lowest action index.
NfgBestResponse exact_br_nfg(const NormalFormGame& game, const Eigen::VectorXd& opponent_meta,
                             std::span<const Policy> opponent_space, int player);

struct KuhnBestResponse {
  TabularPolicy policy;  // deterministic, covers all six states of the player
  double value = 0.0;    // expected payoff of `player` under the best response
};

/// Exact best response of `player` against a mixture of opponent policies,
/// found by a recursive walk that picks each information state's action from
/// its opponent-reach-weighted counterfactual values. Ties go to action 0.
KuhnBestResponse exact_br_kuhn(int player, const Eigen::VectorXd& opponent_meta,
                               std::span<const Policy> opponent_space);

/// Epsilon-greedy tabular Q-learning best response over exactly params.k
/// episodes. Each episode samples an opponent policy from opponent_meta and a
/// deal, then plays one hand.
///
/// The initial policy pi0 = mix(prev_br or uniform, uniform, beta) acts as
/// the exploration distribution and breaks ties between equal Q-values. The
/// result is greedy in Q at every state that received an update and equal to
/// pi0 at states never reached during training.
TabularPolicy rl_br_efg(const KuhnPoker& game, const Eigen::VectorXd& opponent_meta,
                        std::span<const Policy> opponent_space, int player, const OracleParams& params,
                        const std::optional<TabularPolicy>& prev_br, std::uint64_t seed,
                        const QLearningConfig& config = {});

/// Effort proxy: the episode budget k for the learned oracle, 1 for exact ones.
double br_effort(const OracleParams& params, OracleKind kind);

}  // namespace spsro
