#pragma once

// Online hyperparameter suggesters: a uniform random sampler and a
// simplified univariate tree-structured Parzen estimator. They serve as the
// behavior policy for dataset generation and as online baselines.

#include <cstdint>
#include <string>
#include <vector>

#include "spsro/engine.hpp"
#include "spsro/rng.hpp"

namespace spsro {

/// The search space. In normal-form mode only the solver weights are
/// searched; beta is fixed at 0 and K at k_bar since the exact oracle ignores
/// both.
struct HyperparamRanges {
  std::size_t num_solvers = 3;
  int k_bar = 5000;
  GameMode mode = GameMode::kExtensiveForm;
};

struct Observation {
  HyperparamSelection selection;
  double y = 0.0;
};

using TrialHistory = std::vector<Observation>;

struct TpeConfig {
  double gamma_quantile = 0.25;
  std::size_t candidates = 24;
  std::size_t startup_trials = 10;
};

/// alpha_b ~ U[0,1] then normalized; beta ~ U[0,1]; K ~ U{1..k_bar}.
HyperparamSelection suggest_random(const HyperparamRanges& ranges, Rng& rng);

/// Falls back to suggest_random with fewer than config.startup_trials
/// observations. Otherwise splits the history at the gamma quantile of y
/// (lower is better) and, for each dimension independently, draws candidates
/// from the good-set Parzen density and keeps the one maximizing the
/// good/bad density ratio. Kernel bandwidths follow neighbour gaps with a
/// floor of range / min(100, n + 1); a wide prior kernel keeps exploring.
HyperparamSelection suggest_tpe(const TrialHistory& history, const HyperparamRanges& ranges, Rng& rng,
                                const TpeConfig& config = {});

enum class OnlineKind { kRandom, kTpe };

/// One suggester per run. The trace's (u, y) pairs are the trial history.
class OnlineSelector final : public SelectorPolicy {
 public:
  OnlineSelector(OnlineKind kind, HyperparamRanges ranges, std::uint64_t seed, TpeConfig config = {},
                 std::optional<SolverSet> solvers = std::nullopt);

  HyperparamSelection next(const RunTrace& trace) override;
  std::optional<SolverSet> solver_override() const override { return solvers_; }
  std::string name() const override { return kind_ == OnlineKind::kRandom ? "random" : "tpe"; }

 private:
  OnlineKind kind_;
  HyperparamRanges ranges_;
  Rng rng_;
  TpeConfig config_;
  std::optional<SolverSet> solvers_;
};

}  // namespace spsro
