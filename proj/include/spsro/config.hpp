#pragma once

// Experiment configuration shared by the CLI subcommands, loaded from a JSON
// file. Every key is optional; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spsro/engine.hpp"
#include "spsro/hpo_online.hpp"
#include "spsro/transformer.hpp"

namespace spsro {

struct ExperimentConfig {
  std::string game = "nfg:30x30";  // game family; runs without a pinned seed get the run seed
  int epochs = 30;
  std::size_t runs = 100;  // gen-dataset
  std::vector<std::string> selectors{"psro_u", "psro_prd", "psro_alpharank"};
  std::vector<std::uint64_t> seeds;  // eval; empty means seed .. seed + 9
  SolverSet solvers;
  SolverConfig solver;
  std::optional<OracleKind> oracle_kind;
  QLearningConfig qlearn;
  int k_bar = 5000;
  int q = 20;
  double preset_beta = 0.0;
  std::optional<PruneMode> prune_mode;  // unset: never for run/eval, auto for gen-dataset
  std::size_t prune_cap = 10;
  OnlineKind hpo_kind = OnlineKind::kTpe;
  TpeConfig tpe;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
  std::size_t parallel = 1;

  /// Engine settings for run/eval (pruning off unless configured) or
  /// dataset generation (pruning auto unless configured).
  RunConfig run_config(bool dataset_generation) const;
  std::vector<std::uint64_t> eval_seeds() const;
};

/// Applies the keys of `j` on top of `config`. Throws InvalidArgument on
/// unknown keys or bad values.
void apply_config(const nlohmann::json& j, ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

PruneMode prune_mode_from_string(std::string_view name);
std::string_view to_string(PruneMode mode);

}  // namespace spsro
