#include "spsro/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include <json.hpp>

#include "spsro/errors.hpp"

namespace spsro {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_run(const RunTrace& run, GameMode mode, std::size_t num_solvers, std::size_t context_epochs) {
  if (run.mode != mode) throw InvalidArgument("dataset run has mode " + std::string(to_string(run.mode)));
  if (!run.valid) throw InvalidArgument("dataset run is flagged invalid: " + run.error);
  if (run.size() > context_epochs) throw InvalidArgument("dataset run is longer than the context length");
  for (const auto& record : run.epochs) {
    if (record.selection.weights.size() != num_solvers) {
      throw InvalidArgument("dataset run has the wrong number of solver weights");
    }
  }
}

ordered_json game_json(const GameDescriptor& d) {
  ordered_json j;
  j["kind"] = d.kind;
  if (d.kind == "kuhn") return j;
  j["rows"] = d.rows;
  j["cols"] = d.cols;
  j["seed"] = d.seed;
  if (d.payoff) j["payoff"] = *d.payoff;
  return j;
}

ordered_json run_json(const RunTrace& run) {
  ordered_json j;
  j["schema"] = kDatasetSchema;
  j["mode"] = to_string(run.mode);
  j["game"] = game_json(run.game);
  j["seed"] = run.seed;
  ordered_json epochs = ordered_json::array();
  for (const auto& record : run.epochs) {
    ordered_json e;
    e["alpha"] = record.selection.weights.values();
    e["beta"] = record.selection.oracle.beta;
    e["k"] = record.selection.oracle.k;
    e["y"] = record.metrics.y;
    e["nashconv"] = record.metrics.nashconv;
    e["effort"] = record.metrics.br_effort;
    if (record.metrics.degenerate) e["degenerate"] = true;
    epochs.push_back(std::move(e));
  }
  j["epochs"] = std::move(epochs);
  return j;
}

void parse_header(const nlohmann::json& j, Dataset& d) {
  if (j.value("kind", std::string()) != "header") throw InvalidArgument("first line must be the header");
  d.mode = game_mode_from_string(j.at("mode").get<std::string>());
  d.context_epochs = j.at("context_epochs").get<std::size_t>();
  d.solvers.ids.clear();
  for (const auto& name : j.at("solvers")) d.solvers.ids.push_back(solver_from_string(name.get<std::string>()));
  const auto& qj = j.at("quantization");
  d.quantization = QuantizationSpec{qj.at("q").get<int>(), qj.at("k_bar").get<int>(), qj.at("y_min").get<double>(),
                                    qj.at("y_max").get<double>()};
  d.quantization.validate();
}

RunTrace parse_run(const nlohmann::json& j, const Dataset& d) {
  RunTrace run;
  run.mode = game_mode_from_string(j.at("mode").get<std::string>());
  run.game = game_descriptor_from_json(j.at("game"));
  run.seed = j.at("seed").get<std::uint64_t>();
  int epoch = 0;
  for (const auto& e : j.at("epochs")) {
    ++epoch;
    HyperparamSelection u{SolverWeights(e.at("alpha").get<std::vector<double>>()),
                          OracleParams{e.at("beta").get<double>(), e.at("k").get<int>(), d.quantization.k_bar}};
    u.oracle.validate();
    EpochMetrics m{epoch, e.at("nashconv").get<double>(), e.at("effort").get<double>(), e.at("y").get<double>(),
                   e.value("degenerate", false)};
    run.epochs.push_back(EpochRecord{std::move(u), m});
  }
  check_run(run, d.mode, d.solvers.size(), d.context_epochs);
  return run;
}

}  // namespace

Dataset make_dataset(std::vector<RunTrace> runs, GameMode mode, const SolverSet& solvers,
                     std::size_t context_epochs, int q, int k_bar) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& run : runs) {
    check_run(run, mode, solvers.size(), context_epochs);
    for (const auto& record : run.epochs) {
      lo = std::min(lo, record.metrics.y);
      hi = std::max(hi, record.metrics.y);
    }
  }
  if (!(hi > lo)) {
    const double center = std::isfinite(lo) ? lo : 0.0;
    lo = center - 0.5;
    hi = center + 0.5;
  }
  Dataset d{mode, solvers, context_epochs, QuantizationSpec{q, k_bar, lo, hi}, std::move(runs)};
  d.quantization.validate();
  return d;
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  ordered_json header;
  header["schema"] = kDatasetSchema;
  header["kind"] = "header";
  header["mode"] = to_string(dataset.mode);
  header["context_epochs"] = dataset.context_epochs;
  std::vector<std::string> names;
  for (auto id : dataset.solvers.ids) names.emplace_back(to_string(id));
  header["solvers"] = names;
  header["quantization"] = ordered_json{{"q", dataset.quantization.q},
                                        {"k_bar", dataset.quantization.k_bar},
                                        {"y_min", dataset.quantization.y_min},
                                        {"y_max", dataset.quantization.y_max}};
  out << header.dump() << '\n';
  for (const auto& run : dataset.runs) {
    check_run(run, dataset.mode, dataset.solvers.size(), dataset.context_epochs);
    out << run_json(run).dump() << '\n';
  }
  if (!out) throw IoError("failed writing dataset");
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_dataset(dataset, out);
}

Dataset read_dataset(std::istream& in, std::optional<GameMode> expected_mode) {
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const bool header_line = !have_header;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("schema").get<int>() != kDatasetSchema) {
        throw ParseError("unsupported schema " + j.at("schema").dump(), line_no);
      }
      if (header_line) {
        parse_header(j, d);
      } else {
        d.runs.push_back(parse_run(j, d));
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    have_header = true;
    if (header_line && expected_mode && *expected_mode != d.mode) {
      throw InvalidArgument("mode mismatch: dataset is " + std::string(to_string(d.mode)) + ", expected " +
                            std::string(to_string(*expected_mode)));
    }
  }
  if (!have_header) throw ParseError("missing header line", line_no == 0 ? 1 : line_no);
  return d;
}

Dataset read_dataset(const std::filesystem::path& path, std::optional<GameMode> expected_mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in, expected_mode);
}

std::vector<TokenSequence> encode_dataset(const Dataset& dataset) {
  std::vector<TokenSequence> out;
  out.reserve(dataset.runs.size());
  for (const auto& run : dataset.runs) {
    out.push_back(encode_trace(run, dataset.quantization, dataset.solvers.size(), dataset.context_epochs));
  }
  return out;
}

}  // namespace spsro
