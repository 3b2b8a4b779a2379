#pragma once

// Pipeline glue behind the CLI: selector construction from strings, dataset
// generation, evaluation sweeps, run CSVs and their aggregation into
// summaries and SVG plots.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "spsro/config.hpp"
#include "spsro/dataset.hpp"
#include "spsro/hpo_policy.hpp"

namespace spsro {

/// Builds selectors from strings:
///   gda | inrl | psro_p | psro_u | psro_prd | psro_alpharank
///   switch:<first>:<second>:<epoch>
///   random | tpe
///   transformer:<checkpoint>[:greedy|:t=<temperature>]
/// Checkpoints are loaded once, when the factory is built, so a missing file
/// fails before any run starts.
class SelectorFactory {
 public:
  SelectorFactory(const std::vector<std::string>& specs, const ExperimentConfig& config, GameMode mode);

  std::unique_ptr<SelectorPolicy> make(const std::string& spec, std::uint64_t run_seed) const;

 private:
  struct TransformerSpec {
    std::shared_ptr<const TrainedModel> model;
    SamplingConfig sampling;
  };
  const ExperimentConfig& config_;
  GameMode mode_;
  std::map<std::string, TransformerSpec> transformers_;
};

/// Game for one run: the family's descriptor, with the run seed unless the
/// family pins one.
GameDescriptor game_for_run(const std::string& family, std::uint64_t run_seed);

/// Runs config.runs behavior-policy runs (run i seeded config.seed + i) on
/// up to config.parallel threads and collects them in index order.
Dataset generate_dataset(const ExperimentConfig& config);

struct EvalRun {
  std::string selector;
  std::uint64_t seed = 0;
  SolverSet solvers;
  RunTrace trace;
};

/// One run per (selector, seed), in selector-major order. Invalid runs are
/// kept with their error recorded.
std::vector<EvalRun> evaluate(const ExperimentConfig& config);

/// Long-format row of a run CSV.
struct RunRow {
  std::string selector;
  std::uint64_t seed = 0;
  int epoch = 0;
  double nashconv = 0.0;
  double effort = 0.0;
  double cum_effort = 0.0;
  double y = 0.0;
  std::map<std::string, double> alpha;  // by solver name; absent solvers left out
  double beta = 0.0;
  int k = 0;
};

std::vector<RunRow> rows_of(const EvalRun& run);

/// Writes the header selector,seed,epoch,nashconv,effort,cum_effort,y,
/// alpha_<solver>...,beta,k. Solver columns follow `solver_columns`.
void write_runs_csv(std::ostream& out, const std::vector<RunRow>& rows, const std::vector<std::string>& solver_columns);
/// Solver column order: first appearance across the rows, config order first.
std::vector<std::string> solver_columns(const std::vector<RunRow>& rows, const SolverSet& preferred);
/// Throws ParseError on a header that is not a run CSV or on malformed rows.
std::vector<RunRow> read_runs_csv(std::istream& in);

struct CurvePoint {
  int epoch = 0;
  double nashconv_mean = 0.0;
  double nashconv_se = 0.0;
  double cum_effort_mean = 0.0;
  std::map<std::string, double> alpha_mean;
};

struct SelectorSummary {
  std::string selector;
  std::size_t runs = 0;
  int final_epoch = 0;
  double final_nashconv_mean = 0.0;
  double final_nashconv_se = 0.0;
  std::vector<CurvePoint> curve;
};

/// Aggregates across seeds, selectors in first-appearance order. Every seed
/// of a selector must cover the same epochs 1..E; otherwise InvalidArgument names
/// the offending seed.
std::vector<SelectorSummary> aggregate(const std::vector<RunRow>& rows);

/// Standard error of the mean (sample standard deviation / sqrt(n)); 0 for n < 2.
double standard_error(const std::vector<double>& values);

void write_summary_csv(std::ostream& out, const std::vector<SelectorSummary>& summaries);
void write_curves_csv(std::ostream& out, const std::vector<SelectorSummary>& summaries);

/// Writes summary.csv, curves.csv and, when `plots` is set, nashconv_epoch.svg,
/// nashconv_effort.svg and weights.svg into `dir`.
void write_report(const std::filesystem::path& dir, const std::vector<SelectorSummary>& summaries, bool plots);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};
std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series);

}  // namespace spsro
