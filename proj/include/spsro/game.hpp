#pragma once

// Two-player zero-sum games: random normal-form games and Kuhn poker.
//
// Player indices are 0 (first mover / row player) and 1 (column player).
// All payoffs are reported from player 0's point of view unless a function
// explicitly returns a pair.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace spsro {

inline constexpr int kNumPlayers = 2;

/// A matrix game with payoffs in [-1, 1] for the row player.
struct NormalFormGame {
  int rows = 0;
  int cols = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd payoff;  // rows x cols, player 0's reward
  bool generated = true;   // false when built from an explicit matrix

  int num_actions(int player) const { return player == 0 ? rows : cols; }
};

/// Draws every entry independently and uniformly on [-1, 1] from an
/// xoshiro256** stream seeded with `seed`, row-major order.
NormalFormGame generate_nfg(int rows, int cols, std::uint64_t seed);

/// Wraps an explicit payoff matrix (used for textbook games in tests).
NormalFormGame nfg_from_matrix(const Eigen::MatrixXd& payoff);

/// Three-card Kuhn poker, 1-chip ante, 1-chip bet.
///
/// Histories are strings over {'p','b'}: 'p' is check/fold, 'b' is bet/call.
/// An information state key is the acting player's card digit followed by the
/// public history, e.g. "2pb" (player 0 holding K, facing a bet after a check).
class KuhnPoker {
 public:
  static constexpr int kNumCards = 3;
  static constexpr int kNumActions = 2;
  static constexpr int kPass = 0;
  static constexpr int kBet = 1;

  static bool is_terminal(std::string_view history);
  static int current_player(std::string_view history);
  /// Player 0's payoff at a terminal history for the given deal.
  static double terminal_payoff(int card0, int card1, std::string_view history);
  static std::string info_state_key(int card, std::string_view history);
  /// The six information states of `player`, in a fixed order.
  static const std::vector<std::string>& info_states(int player);
  /// All 12 decision information states (player 0 first).
  static std::vector<std::string> all_info_states();
  /// Player who acts at an information state key.
  static int player_of(std::string_view info_state);
  /// The six ordered deals (card0, card1).
  static const std::array<std::array<int, 2>, 6>& deals();
};

using Game = std::variant<NormalFormGame, KuhnPoker>;

/// A pure action of a normal-form player.
struct PureAction {
  int index = 0;
  bool operator==(const PureAction&) const = default;
};

/// Behaviour policy over information states. Distributions are indexed by
/// action id and must be nonnegative and sum to 1.
struct TabularPolicy {
  std::map<std::string, std::vector<double>> table;

  const std::vector<double>& at(const std::string& key) const;
  bool operator==(const TabularPolicy&) const = default;
};

using Policy = std::variant<PureAction, TabularPolicy>;

/// Uniform-random Kuhn policy for `player`.
TabularPolicy kuhn_uniform_policy(int player);

/// Kuhn policy that always takes `action` at every state of `player`.
TabularPolicy kuhn_constant_policy(int player, int action);

/// Checks a policy is usable by `player` in `game`. Throws InvalidPolicy.
void validate_policy(const Game& game, int player, const Policy& policy);

/// Exact expected payoffs (player 0, player 1). Tree walk over chance and
/// both players for Kuhn, matrix lookup for pure NFG actions.
std::array<double, 2> expected_value(const Game& game, const Policy& policy0,
                                     const Policy& policy1);

/// Bilinear expected payoff of mixed actions in a matrix game.
std::array<double, 2> expected_value(const NormalFormGame& game, const Eigen::VectorXd& mixed0,
                                     const Eigen::VectorXd& mixed1);

/// Per-state convex combination beta * a + (1 - beta) * b.
TabularPolicy mix_policies(const TabularPolicy& a, const TabularPolicy& b, double beta);

int num_actions(const Game& game, int player);
bool is_normal_form(const Game& game);

/// Serializable identity of a game: {"kind":"nfg","rows":R,"cols":C,"seed":S}
/// or {"kind":"kuhn"}. Explicit matrices add a "payoff" array of rows.
struct GameDescriptor {
  std::string kind = "nfg";
  int rows = 0;
  int cols = 0;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::vector<double>>> payoff;

  bool operator==(const GameDescriptor&) const = default;
};

GameDescriptor describe(const Game& game);
Game instantiate(const GameDescriptor& descriptor);
nlohmann::json to_json(const GameDescriptor& descriptor);
GameDescriptor game_descriptor_from_json(const nlohmann::json& j);

/// Parses "kuhn", "nfg:RxC" (seed supplied separately), "nfg:RxC:SEED", or a
/// JSON descriptor object.
GameDescriptor parse_game_spec(const std::string& spec, std::uint64_t default_seed);

}  // namespace spsro
