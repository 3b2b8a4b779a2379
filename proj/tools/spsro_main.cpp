// Command-line entry point: gen-dataset, train, run, eval, report.
//
// Failures print one line, "error: <category>: <message>", and exit nonzero
// (2 for usage errors, 1 otherwise).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spsro/config.hpp"
#include "spsro/errors.hpp"
#include "spsro/experiments.hpp"

namespace {

using namespace spsro;

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::uint64_t parse_seed(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(std::string(what) + " '" + text + "' is not a nonnegative integer");
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_rows(const std::filesystem::path& path, const std::vector<EvalRun>& runs, const SolverSet& solvers) {
  std::vector<RunRow> rows;
  for (const auto& r : runs) {
    auto more = rows_of(r);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  auto out = open_out(path);
  write_runs_csv(out, rows, solver_columns(rows, solvers));
}

void fail_on_invalid(const std::vector<EvalRun>& runs) {
  for (const auto& r : runs) {
    if (!r.trace.valid) {
      throw SelectorFailure("selector '" + r.selector + "' seed " + std::to_string(r.seed) + ": " + r.trace.error);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-adaptive PSRO: dataset generation, transformer training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> seed_text;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> parallel;
  app.add_option("--config", config_path, "JSON config file (see README for keys)");
  app.add_option("--seed", seed_text, "Base seed; the SPSRO_SEED environment variable overrides it");
  app.add_option("--out-dir", out_dir, "Directory for outputs");
  app.add_option("--parallel", parallel, "Worker threads for run-level parallelism");

  std::optional<std::string> game;
  std::optional<int> epochs;

  auto* gen = app.add_subcommand("gen-dataset", "Generate an offline dataset with an online behavior policy");
  std::optional<std::size_t> runs;
  std::optional<std::string> behavior;
  std::string gen_out;
  gen->add_option("--game-family", game, "Game family, e.g. nfg:30x30 or kuhn");
  gen->add_option("--runs", runs, "Number of runs");
  gen->add_option("--epochs", epochs, "Epochs per run (also the context length)");
  gen->add_option("--behavior", behavior, "Behavior policy: random or tpe")->check(CLI::IsMember({"random", "tpe"}));
  gen->add_option("--out", gen_out, "Dataset path (default <out-dir>/dataset.jsonl)");

  auto* train_cmd = app.add_subcommand("train", "Train the transformer on a dataset");
  std::string dataset_path;
  std::string ckpt_out;
  std::string loss_csv;
  train_cmd->add_option("--dataset", dataset_path, "Dataset path")->required();
  train_cmd->add_option("--out", ckpt_out, "Checkpoint path (default <out-dir>/model.ckpt)");
  train_cmd->add_option("--loss-csv", loss_csv, "Loss curve CSV (default <out-dir>/train_loss.csv)");

  auto* run_cmd = app.add_subcommand("run", "Run one SPSRO trajectory");
  std::string selector = "psro_prd";
  std::string run_out;
  run_cmd->add_option("--game", game, "Game spec, e.g. nfg:20x20, nfg:20x20:7 or kuhn");
  run_cmd->add_option("--selector", selector, "Selector string (see README)");
  run_cmd->add_option("--epochs", epochs, "Number of epochs");
  run_cmd->add_option("--out", run_out, "Run CSV path (default <out-dir>/run.csv)");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate selectors over seeds");
  std::vector<std::string> selectors;
  std::vector<std::string> seeds;
  bool no_plots = false;
  eval_cmd->add_option("--game", game, "Game family");
  eval_cmd->add_option("--selectors", selectors, "Selector strings")->delimiter(',');
  eval_cmd->add_option("--seeds", seeds, "Seeds (default: seed .. seed+9)")->delimiter(',');
  eval_cmd->add_option("--epochs", epochs, "Number of epochs");
  eval_cmd->add_flag("--no-plots", no_plots, "Skip SVG plots");

  auto* report_cmd = app.add_subcommand("report", "Aggregate run CSVs into summaries and plots");
  std::vector<std::string> inputs;
  report_cmd->add_option("csv", inputs, "Run CSV files")->required();
  report_cmd->add_flag("--no-plots", no_plots, "Skip SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed_text) config.seed = parse_seed(*seed_text, "--seed");
    if (const char* env = std::getenv("SPSRO_SEED"); env && *env) config.seed = parse_seed(env, "SPSRO_SEED");
    if (out_dir) config.out_dir = *out_dir;
    if (parallel) {
      if (*parallel < 1) throw InvalidArgument("--parallel must be at least 1");
      config.parallel = *parallel;
    }
    if (game) config.game = *game;
    if (epochs) {
      if (*epochs < 1) throw InvalidArgument("--epochs must be positive");
      config.epochs = *epochs;
    }
    std::filesystem::create_directories(config.out_dir);

    if (*gen) {
      if (runs) config.runs = *runs;
      if (behavior) config.hpo_kind = *behavior == "random" ? OnlineKind::kRandom : OnlineKind::kTpe;
      const Dataset dataset = generate_dataset(config);
      const std::filesystem::path path = gen_out.empty() ? config.out_dir / "dataset.jsonl" : std::filesystem::path(gen_out);
      auto out = open_out(path);
      write_dataset(dataset, out);
      std::cout << "wrote " << path.string() << " (" << dataset.runs.size() << " runs, y in ["
                << dataset.quantization.y_min << ", " << dataset.quantization.y_max << "])\n";
    } else if (*train_cmd) {
      const Dataset dataset = read_dataset(std::filesystem::path(dataset_path));
      ModelConfig model = config.model;
      model.mode = dataset.mode;
      TrainConfig tc = config.train;
      tc.seed = config.seed;
      const TrainResult result = train(dataset, model, tc);
      const std::filesystem::path path = ckpt_out.empty() ? config.out_dir / "model.ckpt" : std::filesystem::path(ckpt_out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      save_checkpoint(result.trained, path);
      const std::filesystem::path loss_path = loss_csv.empty() ? config.out_dir / "train_loss.csv" : std::filesystem::path(loss_csv);
      auto out = open_out(loss_path);
      out << "epoch,loss\n";
      for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) out << e + 1 << ',' << result.epoch_loss[e] << '\n';
      std::cout << "wrote " << path.string() << " (final loss " << result.epoch_loss.back() << ")\n";
    } else if (*run_cmd) {
      config.selectors = {selector};
      config.seeds = {config.seed};
      config.parallel = 1;
      const auto results = evaluate(config);
      const std::filesystem::path path = run_out.empty() ? config.out_dir / "run.csv" : std::filesystem::path(run_out);
      write_rows(path, results, config.solvers);
      fail_on_invalid(results);
      const auto& trace = results.front().trace;
      std::cout << "wrote " << path.string() << " (final NashConv " << trace.epochs.back().metrics.nashconv << ")\n";
    } else if (*eval_cmd) {
      if (!selectors.empty()) config.selectors = selectors;
      if (!seeds.empty()) {
        config.seeds.clear();
        for (const auto& s : seeds) config.seeds.push_back(parse_seed(s, "--seeds entry"));
      }
      const auto results = evaluate(config);
      write_rows(config.out_dir / "runs.csv", results, config.solvers);
      fail_on_invalid(results);
      std::vector<RunRow> rows;
      for (const auto& r : results) {
        auto more = rows_of(r);
        rows.insert(rows.end(), more.begin(), more.end());
      }
      const auto summaries = aggregate(rows);
      write_report(config.out_dir, summaries, !no_plots);
      for (const auto& s : summaries) {
        std::cout << s.selector << ": final NashConv " << s.final_nashconv_mean << " +- " << s.final_nashconv_se
                  << " (" << s.runs << " runs)\n";
      }
    } else if (*report_cmd) {
      std::vector<RunRow> rows;
      for (const auto& path : inputs) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open '" + path + "'");
        try {
          auto more = read_runs_csv(in);
          rows.insert(rows.end(), more.begin(), more.end());
        } catch (const ParseError& e) {
          throw Error(e.category(), path + ": " + e.what());
        }
      }
      const auto summaries = aggregate(rows);
      write_report(config.out_dir, summaries, !no_plots);
      std::cout << "wrote report for " << summaries.size() << " selectors to " << config.out_dir.string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: io-error: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
