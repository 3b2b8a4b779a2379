#include "spsro/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "spsro/errors.hpp"
#include "spsro/rng.hpp"

namespace spsro {

void OracleParams::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("oracle beta must lie in [0, 1]");
  if (k_bar < 1) throw InvalidArgument("oracle k_bar must be at least 1");
  if (k < 1 || k > k_bar) {
    throw InvalidArgument("oracle k must lie in [1, " + std::to_string(k_bar) + "], got " + std::to_string(k));
  }
}

std::string_view to_string(OracleKind kind) { return kind == OracleKind::kExact ? "exact" : "qlearn"; }

OracleKind oracle_kind_from_string(std::string_view name) {
  if (name == "exact") return OracleKind::kExact;
  if (name == "qlearn") return OracleKind::kQLearning;
  throw InvalidArgument("unknown oracle kind '" + std::string(name) + "'");
}

NfgBestResponse exact_br_nfg(const NormalFormGame& game, const Eigen::VectorXd& opponent_meta,
                             std::span<const Policy> opponent_space, int player) {
  if (opponent_space.empty()) throw InvalidArgument("exact_br_nfg: empty opponent space");
  if (static_cast<std::size_t>(opponent_meta.size()) != opponent_space.size()) {
    throw InvalidArgument("exact_br_nfg: meta-strategy length does not match the opponent space");
  }
  const int opponent = 1 - player;
  Eigen::VectorXd mixed = Eigen::VectorXd::Zero(game.num_actions(opponent));
  for (std::size_t k = 0; k < opponent_space.size(); ++k) {
    const int a = std::get<PureAction>(opponent_space[k]).index;
    if (a < 0 || a >= mixed.size()) throw InvalidPolicy("exact_br_nfg: opponent action out of range");
    mixed[a] += opponent_meta[static_cast<Eigen::Index>(k)];
  }
  const Eigen::VectorXd values = player == 0 ? Eigen::VectorXd(game.payoff * mixed)
                                             : Eigen::VectorXd(-(game.payoff.transpose() * mixed));
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < values.size(); ++a) {
    if (values[a] > values[best]) best = a;
  }
  return NfgBestResponse{PureAction{static_cast<int>(best)}, values[best]};
}

namespace {

class KuhnBestResponder {
 public:
  KuhnBestResponder(int player, const Eigen::VectorXd& weights, std::span<const Policy> space)
      : player_(player) {
    if (space.empty()) throw InvalidArgument("exact_br_kuhn: empty opponent space");
    if (static_cast<std::size_t>(weights.size()) != space.size()) {
      throw InvalidArgument("exact_br_kuhn: meta-strategy length does not match the opponent space");
    }
    for (std::size_t k = 0; k < space.size(); ++k) {
      const double w = weights[static_cast<Eigen::Index>(k)];
      if (w <= 0.0) continue;
      const auto* policy = std::get_if<TabularPolicy>(&space[k]);
      if (!policy) throw InvalidPolicy("exact_br_kuhn: opponent policies must be tabular");
      opponents_.emplace_back(w, policy);
    }
  }

  int best_action(const std::string& key) {
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const int card = key[0] - '0';
    const std::string history = key.substr(1);
    std::array<double, 2> values{0.0, 0.0};
    for (const auto& deal : KuhnPoker::deals()) {
      if (deal[player_] != card) continue;
      values[0] += counterfactual(deal, history + 'p');
      values[1] += counterfactual(deal, history + 'b');
    }
    const int best = values[1] > values[0] ? 1 : 0;
    memo_.emplace(key, best);
    return best;
  }

  double value() {
    double total = 0.0;
    for (const auto& deal : KuhnPoker::deals()) total += counterfactual(deal, "");
    return total;
  }

 private:
  // Chance- and opponent-reach-weighted value of `history` for the responder.
  double counterfactual(const std::array<int, 2>& deal, const std::string& history) {
    if (KuhnPoker::is_terminal(history)) {
      const double u = KuhnPoker::terminal_payoff(deal[0], deal[1], history);
      const double sign = player_ == 0 ? 1.0 : -1.0;
      return sign * u * opponent_reach(deal, history) / static_cast<double>(KuhnPoker::deals().size());
    }
    if (KuhnPoker::current_player(history) == player_) {
      const int a = best_action(KuhnPoker::info_state_key(deal[player_], history));
      return counterfactual(deal, history + (a == KuhnPoker::kBet ? 'b' : 'p'));
    }
    return counterfactual(deal, history + 'p') + counterfactual(deal, history + 'b');
  }

  double opponent_reach(const std::array<int, 2>& deal, const std::string& history) const {
    const int opponent = 1 - player_;
    double reach = 0.0;
    for (const auto& [weight, policy] : opponents_) {
      double r = weight;
      for (std::size_t t = 0; t < history.size() && r > 0.0; ++t) {
        if (static_cast<int>(t % 2) != opponent) continue;
        const auto& dist = policy->at(KuhnPoker::info_state_key(deal[opponent], history.substr(0, t)));
        r *= dist[history[t] == 'b' ? KuhnPoker::kBet : KuhnPoker::kPass];
      }
      reach += r;
    }
    return reach;
  }

  int player_;
  std::vector<std::pair<double, const TabularPolicy*>> opponents_;
  std::map<std::string, int> memo_;
};

int sample_categorical(Rng& rng, const std::vector<double>& probs) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i);
  }
  // Rounding left a sliver above the last cumulative sum.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

int greedy(const std::vector<double>& q, const std::vector<double>& prior) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.size()); ++a) {
    if (q[a] > q[best] || (q[a] == q[best] && prior[a] > prior[best])) best = a;
  }
  return best;
}

}  // namespace

KuhnBestResponse exact_br_kuhn(int player, const Eigen::VectorXd& opponent_meta,
                               std::span<const Policy> opponent_space) {
  if (player != 0 && player != 1) throw InvalidArgument("exact_br_kuhn: player index out of range");
  KuhnBestResponder responder(player, opponent_meta, opponent_space);
  KuhnBestResponse out;
  for (const auto& key : KuhnPoker::info_states(player)) {
    std::vector<double> dist(KuhnPoker::kNumActions, 0.0);
    dist[responder.best_action(key)] = 1.0;
    out.policy.table.emplace(key, std::move(dist));
  }
  out.value = responder.value();
  return out;
}

TabularPolicy rl_br_efg(const KuhnPoker& /*game*/, const Eigen::VectorXd& opponent_meta,
                        std::span<const Policy> opponent_space, int player, const OracleParams& params,
                        const std::optional<TabularPolicy>& prev_br, std::uint64_t seed,
                        const QLearningConfig& config) {
  params.validate();
  if (player != 0 && player != 1) throw InvalidArgument("rl_br_efg: player index out of range");
  if (opponent_space.empty() || static_cast<std::size_t>(opponent_meta.size()) != opponent_space.size()) {
    throw InvalidArgument("rl_br_efg: opponent space and meta-strategy disagree");
  }
  if (!(config.lr > 0.0 && config.lr <= 1.0)) throw InvalidArgument("rl_br_efg: learning rate must lie in (0, 1]");
  if (!(config.eps_final >= 0.0 && config.eps_final <= 1.0)) throw InvalidArgument("rl_br_efg: eps_final must lie in [0, 1]");

  std::vector<const TabularPolicy*> opponents;
  std::vector<double> opponent_probs;
  for (std::size_t k = 0; k < opponent_space.size(); ++k) {
    const auto* policy = std::get_if<TabularPolicy>(&opponent_space[k]);
    if (!policy) throw InvalidPolicy("rl_br_efg: opponent policies must be tabular");
    opponents.push_back(policy);
    opponent_probs.push_back(opponent_meta[static_cast<Eigen::Index>(k)]);
  }

  const TabularPolicy uniform = kuhn_uniform_policy(player);
  const TabularPolicy initial = mix_policies(prev_br ? *prev_br : uniform, uniform, params.beta);

  QTable q;
  std::map<std::string, bool> updated;
  for (const auto& key : KuhnPoker::info_states(player)) q[key] = std::vector<double>(KuhnPoker::kNumActions, 0.0);

  Rng rng(seed);
  const double anneal_episodes = config.anneal_fraction * static_cast<double>(params.k);
  const int opponent = 1 - player;
  for (int episode = 0; episode < params.k; ++episode) {
    const double progress = anneal_episodes > 0.0 ? std::min(1.0, episode / anneal_episodes) : 1.0;
    const double eps = config.eps_initial + (config.eps_final - config.eps_initial) * progress;

    const TabularPolicy& opp = *opponents[sample_categorical(rng, opponent_probs)];
    const auto& deal = KuhnPoker::deals()[rng.below(KuhnPoker::deals().size())];

    std::string history;
    std::string last_key;
    int last_action = -1;
    while (!KuhnPoker::is_terminal(history)) {
      const int actor = KuhnPoker::current_player(history);
      int action;
      if (actor == player) {
        const std::string key = KuhnPoker::info_state_key(deal[player], history);
        auto& values = q.at(key);
        const auto& prior = initial.at(key);
        action = rng.bernoulli(eps) ? sample_categorical(rng, prior) : greedy(values, prior);
        if (last_action >= 0) {
          auto& prev = q.at(last_key)[last_action];
          const double target = config.discount * *std::max_element(values.begin(), values.end());
          prev += config.lr * (target - prev);
          updated[last_key] = true;
        }
        last_key = key;
        last_action = action;
      } else {
        action = sample_categorical(rng, opp.at(KuhnPoker::info_state_key(deal[opponent], history)));
      }
      history += action == KuhnPoker::kBet ? 'b' : 'p';
    }
    const double u = KuhnPoker::terminal_payoff(deal[0], deal[1], history);
    const double reward = player == 0 ? u : -u;
    auto& prev = q.at(last_key)[last_action];
    prev += config.lr * (reward - prev);
    updated[last_key] = true;
  }

  TabularPolicy result;
  for (const auto& key : KuhnPoker::info_states(player)) {
    if (!updated.contains(key)) {
      result.table.emplace(key, initial.at(key));
      continue;
    }
    std::vector<double> dist(KuhnPoker::kNumActions, 0.0);
    dist[greedy(q.at(key), initial.at(key))] = 1.0;
    result.table.emplace(key, std::move(dist));
  }
  return result;
}

double br_effort(const OracleParams& params, OracleKind kind) {
  return kind == OracleKind::kExact ? 1.0 : static_cast<double>(params.k);
}

}  // namespace spsro
