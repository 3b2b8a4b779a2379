#include "spsro/game.hpp"

#include <cmath>

#include "spsro/errors.hpp"
#include "spsro/rng.hpp"

namespace spsro {

NormalFormGame generate_nfg(int rows, int cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1) {
    throw InvalidArgument("generate_nfg: dimensions must be positive, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  NormalFormGame game;
  game.rows = rows;
  game.cols = cols;
  game.seed = seed;
  game.payoff.resize(rows, cols);
  Rng rng(seed);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) game.payoff(i, j) = rng.uniform(-1.0, 1.0);
  }
  return game;
}

NormalFormGame nfg_from_matrix(const Eigen::MatrixXd& payoff) {
  if (payoff.rows() < 1 || payoff.cols() < 1) throw InvalidArgument("nfg_from_matrix: empty matrix");
  NormalFormGame game;
  game.rows = static_cast<int>(payoff.rows());
  game.cols = static_cast<int>(payoff.cols());
  game.payoff = payoff;
  game.generated = false;
  return game;
}

// Kuhn poker ------------------------------------------------------------------

bool KuhnPoker::is_terminal(std::string_view h) {
  return h == "pp" || h == "bp" || h == "bb" || h == "pbp" || h == "pbb";
}

int KuhnPoker::current_player(std::string_view h) { return static_cast<int>(h.size() % 2); }

double KuhnPoker::terminal_payoff(int card0, int card1, std::string_view h) {
  const double showdown = card0 > card1 ? 1.0 : -1.0;
  if (h == "pp") return showdown;
  if (h == "bp") return 1.0;
  if (h == "pbp") return -1.0;
  if (h == "bb" || h == "pbb") return 2.0 * showdown;
  throw InvalidArgument("KuhnPoker: not a terminal history: " + std::string(h));
}

std::string KuhnPoker::info_state_key(int card, std::string_view history) {
  return std::to_string(card) + std::string(history);
}

const std::vector<std::string>& KuhnPoker::info_states(int player) {
  static const std::vector<std::string> p0{"0", "1", "2", "0pb", "1pb", "2pb"};
  static const std::vector<std::string> p1{"0b", "0p", "1b", "1p", "2b", "2p"};
  return player == 0 ? p0 : p1;
}

std::vector<std::string> KuhnPoker::all_info_states() {
  std::vector<std::string> all = info_states(0);
  const auto& second = info_states(1);
  all.insert(all.end(), second.begin(), second.end());
  return all;
}

int KuhnPoker::player_of(std::string_view info_state) {
  return static_cast<int>((info_state.size() - 1) % 2);
}

const std::array<std::array<int, 2>, 6>& KuhnPoker::deals() {
  static const std::array<std::array<int, 2>, 6> kDeals{
      {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}}};
  return kDeals;
}

// Policies --------------------------------------------------------------------

const std::vector<double>& TabularPolicy::at(const std::string& key) const {
  auto it = table.find(key);
  if (it == table.end()) throw InvalidPolicy("policy has no entry for information state '" + key + "'");
  return it->second;
}

TabularPolicy kuhn_uniform_policy(int player) {
  TabularPolicy policy;
  for (const auto& key : KuhnPoker::info_states(player)) policy.table[key] = {0.5, 0.5};
  return policy;
}

TabularPolicy kuhn_constant_policy(int player, int action) {
  TabularPolicy policy;
  for (const auto& key : KuhnPoker::info_states(player)) {
    std::vector<double> dist(KuhnPoker::kNumActions, 0.0);
    dist.at(action) = 1.0;
    policy.table[key] = dist;
  }
  return policy;
}

namespace {

void check_distribution(const std::string& key, const std::vector<double>& dist, std::size_t actions) {
  if (dist.size() != actions) {
    throw InvalidPolicy("state '" + key + "' has " + std::to_string(dist.size()) +
                        " probabilities, expected " + std::to_string(actions));
  }
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidPolicy("state '" + key + "' has a negative or non-finite probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidPolicy("state '" + key + "' probabilities sum to " + std::to_string(total));
}

double kuhn_walk(int c0, int c1, const std::string& h, const TabularPolicy& p0, const TabularPolicy& p1) {
  if (KuhnPoker::is_terminal(h)) return KuhnPoker::terminal_payoff(c0, c1, h);
  const int player = KuhnPoker::current_player(h);
  const auto& dist = (player == 0 ? p0 : p1).at(KuhnPoker::info_state_key(player == 0 ? c0 : c1, h));
  double value = 0.0;
  if (dist[KuhnPoker::kPass] > 0.0) value += dist[KuhnPoker::kPass] * kuhn_walk(c0, c1, h + 'p', p0, p1);
  if (dist[KuhnPoker::kBet] > 0.0) value += dist[KuhnPoker::kBet] * kuhn_walk(c0, c1, h + 'b', p0, p1);
  return value;
}

}  // namespace

void validate_policy(const Game& game, int player, const Policy& policy) {
  if (player < 0 || player >= kNumPlayers) throw InvalidArgument("player index out of range");
  if (const auto* nfg = std::get_if<NormalFormGame>(&game)) {
    const auto* action = std::get_if<PureAction>(&policy);
    if (!action) throw InvalidPolicy("normal-form games take pure-action policies");
    if (action->index < 0 || action->index >= nfg->num_actions(player)) {
      throw InvalidPolicy("pure action " + std::to_string(action->index) + " out of range for player " +
                          std::to_string(player));
    }
    return;
  }
  const auto* tabular = std::get_if<TabularPolicy>(&policy);
  if (!tabular) throw InvalidPolicy("Kuhn poker takes tabular policies");
  for (const auto& key : KuhnPoker::info_states(player)) {
    check_distribution(key, tabular->at(key), KuhnPoker::kNumActions);
  }
}

std::array<double, 2> expected_value(const Game& game, const Policy& policy0, const Policy& policy1) {
  validate_policy(game, 0, policy0);
  validate_policy(game, 1, policy1);
  if (const auto* nfg = std::get_if<NormalFormGame>(&game)) {
    const double v = nfg->payoff(std::get<PureAction>(policy0).index, std::get<PureAction>(policy1).index);
    return {v, -v};
  }
  const auto& p0 = std::get<TabularPolicy>(policy0);
  const auto& p1 = std::get<TabularPolicy>(policy1);
  double value = 0.0;
  for (const auto& deal : KuhnPoker::deals()) value += kuhn_walk(deal[0], deal[1], "", p0, p1);
  value /= static_cast<double>(KuhnPoker::deals().size());
  return {value, -value};
}

std::array<double, 2> expected_value(const NormalFormGame& game, const Eigen::VectorXd& mixed0,
                                     const Eigen::VectorXd& mixed1) {
  if (mixed0.size() != game.rows || mixed1.size() != game.cols) {
    throw InvalidArgument("expected_value: mixed action sizes do not match the game");
  }
  const double v = mixed0.dot(game.payoff * mixed1);
  return {v, -v};
}

TabularPolicy mix_policies(const TabularPolicy& a, const TabularPolicy& b, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("mix_policies: beta must lie in [0, 1]");
  if (beta == 1.0) return a;
  if (beta == 0.0) return b;
  if (a.table.size() != b.table.size()) throw InvalidArgument("mix_policies: policies cover different states");
  TabularPolicy out;
  for (const auto& [key, dist_a] : a.table) {
    const auto& dist_b = b.at(key);
    if (dist_a.size() != dist_b.size()) throw InvalidArgument("mix_policies: action counts differ at '" + key + "'");
    std::vector<double> mixed(dist_a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mixed.size(); ++i) {
      mixed[i] = beta * dist_a[i] + (1.0 - beta) * dist_b[i];
      total += mixed[i];
    }
    for (double& p : mixed) p /= total;
    out.table.emplace(key, std::move(mixed));
  }
  return out;
}

int num_actions(const Game& game, int player) {
  if (const auto* nfg = std::get_if<NormalFormGame>(&game)) return nfg->num_actions(player);
  return KuhnPoker::kNumActions;
}

bool is_normal_form(const Game& game) { return std::holds_alternative<NormalFormGame>(game); }

// Descriptors -----------------------------------------------------------------

GameDescriptor describe(const Game& game) {
  GameDescriptor d;
  if (const auto* nfg = std::get_if<NormalFormGame>(&game)) {
    d.kind = "nfg";
    d.rows = nfg->rows;
    d.cols = nfg->cols;
    d.seed = nfg->seed;
    if (!nfg->generated) {
      std::vector<std::vector<double>> rows(nfg->rows, std::vector<double>(nfg->cols));
      for (int i = 0; i < nfg->rows; ++i)
        for (int j = 0; j < nfg->cols; ++j) rows[i][j] = nfg->payoff(i, j);
      d.payoff = std::move(rows);
    }
    return d;
  }
  d.kind = "kuhn";
  return d;
}

Game instantiate(const GameDescriptor& d) {
  if (d.kind == "kuhn") return KuhnPoker{};
  if (d.kind != "nfg") throw InvalidArgument("unknown game kind '" + d.kind + "'");
  if (d.payoff) {
    Eigen::MatrixXd m(d.rows, d.cols);
    if (static_cast<int>(d.payoff->size()) != d.rows) throw InvalidArgument("payoff row count mismatch");
    for (int i = 0; i < d.rows; ++i) {
      if (static_cast<int>((*d.payoff)[i].size()) != d.cols) throw InvalidArgument("payoff column count mismatch");
      for (int j = 0; j < d.cols; ++j) m(i, j) = (*d.payoff)[i][j];
    }
    return nfg_from_matrix(m);
  }
  return generate_nfg(d.rows, d.cols, d.seed);
}

nlohmann::json to_json(const GameDescriptor& d) {
  if (d.kind == "kuhn") return nlohmann::json{{"kind", "kuhn"}};
  nlohmann::json j{{"kind", d.kind}, {"rows", d.rows}, {"cols", d.cols}, {"seed", d.seed}};
  if (d.payoff) j["payoff"] = *d.payoff;
  return j;
}

GameDescriptor game_descriptor_from_json(const nlohmann::json& j) {
  GameDescriptor d;
  d.kind = j.at("kind").get<std::string>();
  if (d.kind == "kuhn") return d;
  if (d.kind != "nfg") throw InvalidArgument("unknown game kind '" + d.kind + "'");
  d.rows = j.at("rows").get<int>();
  d.cols = j.at("cols").get<int>();
  d.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("payoff")) d.payoff = j.at("payoff").get<std::vector<std::vector<double>>>();
  return d;
}

GameDescriptor parse_game_spec(const std::string& spec, std::uint64_t default_seed) {
  if (!spec.empty() && spec.front() == '{') return game_descriptor_from_json(nlohmann::json::parse(spec));
  if (spec == "kuhn") {
    GameDescriptor d;
    d.kind = "kuhn";
    return d;
  }
  if (spec.rfind("nfg:", 0) == 0) {
    GameDescriptor d;
    d.kind = "nfg";
    std::string rest = spec.substr(4);
    std::string dims = rest;
    d.seed = default_seed;
    if (auto colon = rest.find(':'); colon != std::string::npos) {
      dims = rest.substr(0, colon);
      d.seed = std::stoull(rest.substr(colon + 1));
    }
    auto x = dims.find('x');
    if (x == std::string::npos) throw InvalidArgument("game spec '" + spec + "': expected nfg:RxC");
    d.rows = std::stoi(dims.substr(0, x));
    d.cols = std::stoi(dims.substr(x + 1));
    if (d.rows < 1 || d.cols < 1) throw InvalidArgument("game spec '" + spec + "': dimensions must be positive");
    return d;
  }
  throw InvalidArgument("unrecognized game spec '" + spec + "'");
}

}  // namespace spsro
