#include "spsro/engine.hpp"

#include <optional>
#include <utility>

#include "spsro/errors.hpp"
#include "spsro/rng.hpp"

namespace spsro {

namespace {

// Sub-stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kOracleStream = 2;

SolverSet single_solver_set(SolverId id) { return SolverSet{{id}}; }

void validate_selection(const HyperparamSelection& u, const SolverSet& solvers, int k_bar) {
  if (u.weights.size() != solvers.size()) {
    throw SelectorFailure("selector returned " + std::to_string(u.weights.size()) + " solver weights for " +
                          std::to_string(solvers.size()) + " solvers");
  }
  if (u.oracle.k_bar != k_bar) {
    throw SelectorFailure("selector used k_bar " + std::to_string(u.oracle.k_bar) + ", run uses " +
                          std::to_string(k_bar));
  }
  try {
    u.oracle.validate();
    SolverWeights check(u.weights.values());
  } catch (const Error& e) {
    throw SelectorFailure(std::string("selector returned invalid hyperparameters: ") + e.what());
  }
}

PolicySpace initial_space(const Game& game, std::uint64_t seed) {
  PolicySpace space;
  Rng rng(derive_seed(seed, kInitStream, 0));
  for (int p = 0; p < kNumPlayers; ++p) {
    if (const auto* nfg = std::get_if<NormalFormGame>(&game)) {
      space.append(p, PureAction{static_cast<int>(rng.below(static_cast<std::uint64_t>(nfg->num_actions(p))))});
    } else {
      space.append(p, kuhn_uniform_policy(p));
    }
  }
  return space;
}

Eigen::VectorXd remove_entry(const Eigen::VectorXd& v, std::size_t index) {
  const auto i = static_cast<Eigen::Index>(index);
  Eigen::VectorXd out(v.size() - 1);
  out << v.head(i), v.tail(v.size() - i - 1);
  const double total = out.sum();
  if (total > 0.0) {
    out /= total;
  } else {
    out.setConstant(1.0 / static_cast<double>(out.size()));
  }
  return out;
}

class SwitchSelector final : public SelectorPolicy {
 public:
  SwitchSelector(HyperparamSelection before, HyperparamSelection after, int switch_epoch,
                 std::optional<SolverSet> solvers, std::string name)
      : before_(std::move(before)), after_(std::move(after)), switch_epoch_(switch_epoch),
        solvers_(std::move(solvers)), name_(std::move(name)) {}

  HyperparamSelection next(const RunTrace& trace) override {
    const auto epoch = static_cast<int>(trace.size()) + 1;
    return epoch < switch_epoch_ ? before_ : after_;
  }
  std::optional<SolverSet> solver_override() const override { return solvers_; }
  std::string name() const override { return name_; }

 private:
  HyperparamSelection before_;
  HyperparamSelection after_;
  int switch_epoch_;
  std::optional<SolverSet> solvers_;
  std::string name_;
};

}  // namespace

std::string_view to_string(GameMode mode) {
  return mode == GameMode::kNormalForm ? "normal-form" : "extensive-form";
}

GameMode game_mode_from_string(std::string_view name) {
  if (name == "normal-form" || name == "nfg") return GameMode::kNormalForm;
  if (name == "extensive-form" || name == "efg") return GameMode::kExtensiveForm;
  throw InvalidArgument("unknown game mode '" + std::string(name) + "'");
}

GameMode mode_of(const Game& game) {
  return is_normal_form(game) ? GameMode::kNormalForm : GameMode::kExtensiveForm;
}

RunTrace run_spsro(const Game& game, SelectorPolicy& selector, int epochs, const RunConfig& config,
                   std::uint64_t seed, const EpochObserver& observer) {
  if (epochs < 1) throw InvalidArgument("run_spsro: epochs must be at least 1");
  if (config.k_bar < 1) throw InvalidArgument("run_spsro: k_bar must be at least 1");

  const SolverSet solvers = selector.solver_override().value_or(config.solvers);
  if (solvers.size() == 0) throw InvalidArgument("run_spsro: empty solver set");
  const bool normal_form = is_normal_form(game);
  const OracleKind oracle_kind =
      normal_form ? OracleKind::kExact : config.oracle_kind.value_or(OracleKind::kQLearning);
  const auto alpharank_index = solvers.index_of(SolverId::kAlphaRank);

  RunTrace trace;
  trace.mode = mode_of(game);
  trace.game = describe(game);
  trace.seed = seed;

  auto ask = [&](HyperparamSelection& out) {
    try {
      out = selector.next(trace);
      validate_selection(out, solvers, config.k_bar);
      return true;
    } catch (const std::exception& e) {
      trace.valid = false;
      trace.error = e.what();
      return false;
    }
  };

  HyperparamSelection u;
  if (!ask(u)) return trace;

  PolicySpace space = initial_space(game, seed);
  PayoffTensor tensor;
  std::array<std::optional<TabularPolicy>, kNumPlayers> previous_br;
  MetricRefs refs;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    tensor = update_payoff_tensor(space, tensor, game);

    std::vector<MetaStrategy> outputs;
    std::vector<bool> solved;
    outputs.reserve(solvers.size());
    for (std::size_t b = 0; b < solvers.size(); ++b) {
      const bool active = u.weights[b] > 0.0;
      outputs.push_back(active ? solve(solvers.ids[b], tensor, config.solver) : solve_uniform(tensor));
      solved.push_back(active);
    }
    const MetaStrategy mixed = mix_meta_strategies(outputs, u.weights);
    const PayoffTensor solved_tensor = tensor;

    MetaStrategy sigma = mixed;
    const bool prune = config.prune.mode == PruneMode::kAlways ||
                       (config.prune.mode == PruneMode::kAuto && alpharank_index >= 0 &&
                        u.weights[static_cast<std::size_t>(alpharank_index)] > 0.0);
    if (prune) {
      for (int p = 0; p < kNumPlayers; ++p) {
        while (space.size(p) > config.prune.cap) {
          auto pruned = prune_policy(std::move(space), std::move(tensor), sigma[p], p, config.prune.cap);
          space = std::move(pruned.space);
          tensor = std::move(pruned.tensor);
          sigma[p] = remove_entry(sigma[p], pruned.removed_index);
        }
      }
    }

    if (observer) {
      observer(EpochSnapshot{epoch, solvers, outputs, solved, solved_tensor, mixed, sigma, space, tensor});
    }

    const double nc = nashconv(game, space, sigma);

    std::array<Policy, kNumPlayers> responses;
    for (int p = 0; p < kNumPlayers; ++p) {
      const int opponent = 1 - p;
      if (const auto* nfg = std::get_if<NormalFormGame>(&game)) {
        responses[p] = exact_br_nfg(*nfg, sigma[opponent], space.policies[opponent], p).action;
      } else if (oracle_kind == OracleKind::kExact) {
        responses[p] = exact_br_kuhn(p, sigma[opponent], space.policies[opponent]).policy;
      } else {
        const auto stream = static_cast<std::uint64_t>(epoch) * kNumPlayers + static_cast<std::uint64_t>(p);
        auto br = rl_br_efg(std::get<KuhnPoker>(game), sigma[opponent], space.policies[opponent], p, u.oracle,
                            previous_br[p], derive_seed(seed, kOracleStream, stream), config.qlearn);
        previous_br[p] = br;
        responses[p] = std::move(br);
      }
    }
    if (oracle_kind == OracleKind::kExact && !normal_form) {
      for (int p = 0; p < kNumPlayers; ++p) previous_br[p] = std::get<TabularPolicy>(responses[p]);
    }
    for (int p = 0; p < kNumPlayers; ++p) space.append(p, std::move(responses[p]));

    const double effort = br_effort(u.oracle, oracle_kind);
    if (epoch == 1) refs = MetricRefs{nc, effort};
    const MetricValue metric = metric_y(nc, effort, refs);
    trace.epochs.push_back(EpochRecord{u, EpochMetrics{epoch, nc, effort, metric.y, metric.degenerate}});

    if (epoch < epochs && !ask(u)) return trace;
  }
  return trace;
}

std::unique_ptr<SelectorPolicy> preset_variant(std::string_view name, const SolverSet& solvers, int k_bar,
                                               double beta) {
  auto one_hot_in = [&](SolverId id, double b, int k) {
    std::optional<SolverSet> override_set;
    SolverSet set = solvers;
    if (!set.contains(id)) {
      set = single_solver_set(id);
      override_set = set;
    }
    HyperparamSelection u{SolverWeights::one_hot(set.size(), static_cast<std::size_t>(set.index_of(id))),
                          OracleParams{b, k, k_bar}};
    return std::make_unique<ConstantSelector>(std::string(name), std::move(u), std::move(override_set));
  };
  auto fixed = [&](SolverId id, double b, int k) {
    HyperparamSelection u{SolverWeights::one_hot(1, 0), OracleParams{b, k, k_bar}};
    return std::make_unique<ConstantSelector>(std::string(name), std::move(u), single_solver_set(id));
  };

  if (name == "gda") return fixed(SolverId::kLastOne, 1.0, 1);
  if (name == "inrl") return fixed(SolverId::kLastOne, 1.0, k_bar);
  if (name == "psro_p") return fixed(SolverId::kPenultimate, beta, k_bar);
  if (name == "psro_u") return one_hot_in(SolverId::kUniform, beta, k_bar);
  if (name == "psro_prd") return one_hot_in(SolverId::kPrd, beta, k_bar);
  if (name == "psro_alpharank") return one_hot_in(SolverId::kAlphaRank, beta, k_bar);
  throw InvalidArgument("unknown preset '" + std::string(name) +
                        "' (expected gda, inrl, psro_p, psro_u, psro_prd or psro_alpharank)");
}

std::unique_ptr<SelectorPolicy> solver_switch_schedule(SolverId first, SolverId second, int switch_epoch,
                                                       const SolverSet& solvers, int k_bar, double beta) {
  if (switch_epoch < 1) throw InvalidArgument("solver_switch_schedule: switch epoch must be at least 1");
  SolverSet set = solvers;
  std::optional<SolverSet> override_set;
  if (!set.contains(first) || !set.contains(second)) {
    set.ids = {first};
    if (second != first) set.ids.push_back(second);
    override_set = set;
  }
  const OracleParams oracle{beta, k_bar, k_bar};
  HyperparamSelection before{SolverWeights::one_hot(set.size(), static_cast<std::size_t>(set.index_of(first))),
                             oracle};
  HyperparamSelection after{SolverWeights::one_hot(set.size(), static_cast<std::size_t>(set.index_of(second))),
                            oracle};
  std::string name = "switch:" + std::string(to_string(first)) + ":" + std::string(to_string(second)) + ":" +
                     std::to_string(switch_epoch);
  return std::make_unique<SwitchSelector>(std::move(before), std::move(after), switch_epoch,
                                          std::move(override_set), std::move(name));
}

}  // namespace spsro
