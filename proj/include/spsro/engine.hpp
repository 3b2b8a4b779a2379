#pragma once

// The self-adaptive PSRO epoch loop and the fixed selectors that reproduce
// classic PSRO variants.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spsro/evaluation.hpp"
#include "spsro/meta_game.hpp"
#include "spsro/meta_solvers.hpp"
#include "spsro/oracles.hpp"

namespace spsro {

enum class GameMode { kNormalForm, kExtensiveForm };

std::string_view to_string(GameMode mode);
GameMode game_mode_from_string(std::string_view name);
GameMode mode_of(const Game& game);

/// One epoch's hyperparameters u = (alpha, beta, K).
struct HyperparamSelection {
  SolverWeights weights;
  OracleParams oracle;

  bool operator==(const HyperparamSelection&) const = default;
};

struct EpochRecord {
  HyperparamSelection selection;
  EpochMetrics metrics;

  bool operator==(const EpochRecord&) const = default;
};

struct RunTrace {
  GameMode mode = GameMode::kNormalForm;
  GameDescriptor game;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  bool valid = true;
  std::string error;

  std::size_t size() const { return epochs.size(); }
  bool operator==(const RunTrace&) const = default;
};

/// Chooses the next epoch's hyperparameters from the run so far. The first
/// call sees an empty trace.
class SelectorPolicy {
 public:
  virtual ~SelectorPolicy() = default;
  virtual HyperparamSelection next(const RunTrace& trace) = 0;
  /// Solver set the selector's weights refer to, when it differs from the
  /// run configuration's.
  virtual std::optional<SolverSet> solver_override() const { return std::nullopt; }
  virtual std::string name() const = 0;
};

/// Returns the same selection every epoch.
class ConstantSelector final : public SelectorPolicy {
 public:
  ConstantSelector(std::string name, HyperparamSelection selection, std::optional<SolverSet> solvers = std::nullopt)
      : name_(std::move(name)), selection_(std::move(selection)), solvers_(std::move(solvers)) {}

  HyperparamSelection next(const RunTrace&) override { return selection_; }
  std::optional<SolverSet> solver_override() const override { return solvers_; }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  HyperparamSelection selection_;
  std::optional<SolverSet> solvers_;
};

enum class PruneMode { kAuto, kAlways, kNever };

/// kAuto prunes in epochs where alpha-Rank is in the solver set with
/// positive weight. Plain runs default to kNever; dataset generation turns
/// kAuto on. Pruning runs after the meta-strategy is computed and
/// before best responses are trained, and removes minimum-mass policies until
/// each player holds at most `cap`.
struct PruneConfig {
  PruneMode mode = PruneMode::kNever;
  std::size_t cap = 10;
};

struct RunConfig {
  SolverSet solvers;
  SolverConfig solver;
  /// Defaults to exact for normal-form games and Q-learning for Kuhn.
  std::optional<OracleKind> oracle_kind;
  QLearningConfig qlearn;
  int k_bar = 5000;
  PruneConfig prune;
  int context_epochs = 50;
};

/// Read-only view of one epoch, handed to an observer after pruning and
/// before the policy spaces are expanded.
struct EpochSnapshot {
  int epoch;
  const SolverSet& solvers;
  std::span<const MetaStrategy> solver_outputs;  // unsolved (zero-weight) entries are uniform
  const std::vector<bool>& solved;
  const PayoffTensor& solved_tensor;  // the meta-game the solvers saw
  const MetaStrategy& mixed;          // before pruning
  const MetaStrategy& sigma;          // after pruning, used for BRs and NashConv
  const PolicySpace& space;           // after pruning
  const PayoffTensor& tensor;         // after pruning
};

using EpochObserver = std::function<void(const EpochSnapshot&)>;

/// Runs `epochs` epochs of the self-adaptive PSRO loop. Selector failures end
/// the run early with `valid = false` and the error text recorded.
RunTrace run_spsro(const Game& game, SelectorPolicy& selector, int epochs, const RunConfig& config,
                   std::uint64_t seed, const EpochObserver& observer = {});

/// Constant selectors for the classic variants: gda, inrl, psro_p, psro_u,
/// psro_prd, psro_alpharank. Uniform, PRD and alpha-Rank presets put one-hot
/// weight on their solver within `solvers` when it is present there.
std::unique_ptr<SelectorPolicy> preset_variant(std::string_view name, const SolverSet& solvers = {},
                                               int k_bar = 5000, double beta = 0.0);

/// One-hot on `first` for epochs before `switch_epoch`, on `second` from
/// `switch_epoch` on.
std::unique_ptr<SelectorPolicy> solver_switch_schedule(SolverId first, SolverId second, int switch_epoch,
                                                       const SolverSet& solvers = {}, int k_bar = 5000,
                                                       double beta = 0.0);

}  // namespace spsro
