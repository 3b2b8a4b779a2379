#include "spsro/config.hpp"

#include <fstream>
#include <set>

#include "spsro/errors.hpp"

namespace spsro {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw InvalidArgument(std::string(where) + " must be a JSON object");
  const std::set<std::string_view> keys(allowed);
  for (const auto& [key, value] : j.items()) {
    if (!keys.contains(key)) {
      throw InvalidArgument("unknown config key '" + (where.empty() ? "" : std::string(where) + ".") + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

PruneMode prune_mode_from_string(std::string_view name) {
  if (name == "auto") return PruneMode::kAuto;
  if (name == "always") return PruneMode::kAlways;
  if (name == "never") return PruneMode::kNever;
  throw InvalidArgument("unknown prune mode '" + std::string(name) + "' (auto|always|never)");
}

std::string_view to_string(PruneMode mode) {
  switch (mode) {
    case PruneMode::kAuto: return "auto";
    case PruneMode::kAlways: return "always";
    case PruneMode::kNever: return "never";
  }
  return "never";
}

RunConfig ExperimentConfig::run_config(bool dataset_generation) const {
  RunConfig rc;
  rc.solvers = solvers;
  rc.solver = solver;
  rc.oracle_kind = oracle_kind;
  rc.qlearn = qlearn;
  rc.k_bar = k_bar;
  rc.prune.mode = prune_mode.value_or(dataset_generation ? PruneMode::kAuto : PruneMode::kNever);
  rc.prune.cap = prune_cap;
  rc.context_epochs = std::max(epochs, 1);
  return rc;
}

std::vector<std::uint64_t> ExperimentConfig::eval_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (std::uint64_t i = 0; i < 10; ++i) out.push_back(seed + i);
  return out;
}

void apply_config(const json& j, ExperimentConfig& c) {
  try {
    check_keys(j, "", {"game", "epochs", "runs", "selectors", "seeds", "meta_solvers", "q", "beta", "oracle", "prd", "alpharank", "prune", "hpo", "model", "train", "seed", "out_dir",
                       "parallel"});
    read(j, "game", c.game);
    read(j, "epochs", c.epochs);
    read(j, "runs", c.runs);
    read(j, "selectors", c.selectors);
    read(j, "seeds", c.seeds);
    if (j.contains("meta_solvers")) {
      c.solvers.ids.clear();
      for (const auto& name : j.at("meta_solvers")) c.solvers.ids.push_back(solver_from_string(name.get<std::string>()));
    }
    read(j, "q", c.q);
    read(j, "beta", c.preset_beta);
    if (j.contains("oracle")) {
      const auto& o = j.at("oracle");
      check_keys(o, "oracle", {"kind", "k_bar", "lr", "eps_initial", "eps_final", "anneal_fraction", "discount"});
      if (o.contains("kind")) c.oracle_kind = oracle_kind_from_string(o.at("kind").get<std::string>());
      read(o, "k_bar", c.k_bar);
      read(o, "lr", c.qlearn.lr);
      read(o, "eps_initial", c.qlearn.eps_initial);
      read(o, "eps_final", c.qlearn.eps_final);
      read(o, "anneal_fraction", c.qlearn.anneal_fraction);
      read(o, "discount", c.qlearn.discount);
    }
    if (j.contains("prd")) {
      const auto& p = j.at("prd");
      check_keys(p, "prd", {"steps", "step_size", "gamma", "average_iterates"});
      read(p, "steps", c.solver.prd.steps);
      read(p, "step_size", c.solver.prd.step_size);
      read(p, "gamma", c.solver.prd.gamma);
      read(p, "average_iterates", c.solver.prd.average_iterates);
    }
    if (j.contains("alpharank")) {
      const auto& a = j.at("alpharank");
      check_keys(a, "alpharank", {"alpha_scale", "mutation", "max_profiles"});
      read(a, "alpha_scale", c.solver.alpharank.alpha_scale);
      read(a, "mutation", c.solver.alpharank.mutation);
      read(a, "max_profiles", c.solver.alpharank.max_profiles);
    }
    if (j.contains("prune")) {
      const auto& p = j.at("prune");
      check_keys(p, "prune", {"mode", "cap"});
      if (p.contains("mode")) c.prune_mode = prune_mode_from_string(p.at("mode").get<std::string>());
      read(p, "cap", c.prune_cap);
    }
    if (j.contains("hpo")) {
      const auto& h = j.at("hpo");
      check_keys(h, "hpo", {"kind", "gamma_quantile", "candidates", "startup_trials"});
      if (h.contains("kind")) {
        const auto kind = h.at("kind").get<std::string>();
        if (kind == "random") {
          c.hpo_kind = OnlineKind::kRandom;
        } else if (kind == "tpe") {
          c.hpo_kind = OnlineKind::kTpe;
        } else {
          throw InvalidArgument("hpo.kind must be 'random' or 'tpe'");
        }
      }
      read(h, "gamma_quantile", c.tpe.gamma_quantile);
      read(h, "candidates", c.tpe.candidates);
      read(h, "startup_trials", c.tpe.startup_trials);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, "model", {"blocks", "heads", "embed_dim", "dropout"});
      read(m, "blocks", c.model.blocks);
      read(m, "heads", c.model.heads);
      read(m, "embed_dim", c.model.embed_dim);
      read(m, "dropout", c.model.dropout);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t, "train", {"batch", "lr", "beta1", "beta2", "adam_eps", "grad_clip", "weight_decay",
                              "warmup_tokens", "final_tokens", "epochs"});
      read(t, "batch", c.train.batch);
      read(t, "lr", c.train.lr);
      read(t, "beta1", c.train.beta1);
      read(t, "beta2", c.train.beta2);
      read(t, "adam_eps", c.train.adam_eps);
      read(t, "grad_clip", c.train.grad_clip);
      read(t, "weight_decay", c.train.weight_decay);
      read(t, "warmup_tokens", c.train.warmup_tokens);
      if (t.contains("final_tokens")) c.train.final_tokens = t.at("final_tokens").get<double>();
      read(t, "epochs", c.train.epochs);
    }
    read(j, "seed", c.seed);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    read(j, "parallel", c.parallel);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad config value: ") + e.what());
  }
  if (c.epochs < 1) throw InvalidArgument("epochs must be positive");
  if (c.parallel < 1) throw InvalidArgument("parallel must be at least 1");
  if (c.k_bar < 1) throw InvalidArgument("k_bar must be at least 1");
  if (c.q < 2) throw InvalidArgument("q must be at least 2");
  if (c.selectors.empty()) throw InvalidArgument("selector list is empty");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config '" + path.string() + "': " + e.what(), 1);
  }
  ExperimentConfig c;
  apply_config(j, c);
  return c;
}

}  // namespace spsro
