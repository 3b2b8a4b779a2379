#include "spsro/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "spsro/errors.hpp"

namespace spsro {

namespace {

// derive_seed tag for selector randomness; the engine uses tags 1 and 2.
constexpr std::uint64_t kSelectorStream = 4;

constexpr std::string_view kTransformerPrefix = "transformer:";

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, std::size_t line) {
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad integer '" + s + "'", line);
  return v;
}

// Runs job(i) for i in [0, n) on up to `parallel` threads. The first failure
// by index is rethrown after every thread has finished.
void parallel_for(std::size_t n, std::size_t parallel, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(parallel, 1), std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct TransformerSelectorSpec {
  std::filesystem::path checkpoint;
  SamplingConfig sampling;
};

TransformerSelectorSpec parse_transformer_spec(std::string_view spec) {
  std::string rest(spec.substr(kTransformerPrefix.size()));
  TransformerSelectorSpec out;
  if (const auto colon = rest.rfind(':'); colon != std::string::npos) {
    const std::string suffix = rest.substr(colon + 1);
    if (suffix == "greedy") {
      out.sampling.mode = SamplingMode::kGreedy;
      rest.resize(colon);
    } else if (suffix.rfind("t=", 0) == 0) {
      try {
        out.sampling.temperature = std::stod(suffix.substr(2));
      } catch (const std::exception&) {
        throw InvalidArgument("bad temperature in selector '" + std::string(spec) + "'");
      }
      out.sampling.validate();
      rest.resize(colon);
    }
  }
  if (rest.empty()) throw InvalidArgument("selector '" + std::string(spec) + "' names no checkpoint");
  out.checkpoint = rest;
  return out;
}

}  // namespace

SelectorFactory::SelectorFactory(const std::vector<std::string>& specs, const ExperimentConfig& config, GameMode mode)
    : config_(config), mode_(mode) {
  for (const auto& spec : specs) {
    if (spec.rfind(kTransformerPrefix, 0) == 0) {
      if (transformers_.contains(spec)) continue;
      auto parsed = parse_transformer_spec(spec);
      if (!std::filesystem::exists(parsed.checkpoint)) {
        throw IoError("checkpoint '" + parsed.checkpoint.string() + "' does not exist");
      }
      auto model = std::make_shared<const TrainedModel>(load_checkpoint(parsed.checkpoint));
      if (model->model.config().mode != mode) {
        throw InvalidArgument("checkpoint '" + parsed.checkpoint.string() + "' was trained in " +
                              std::string(to_string(model->model.config().mode)) + " mode, the game is " +
                              std::string(to_string(mode)));
      }
      if (model->model.config().context_epochs < config.epochs) {
        throw CapacityError("checkpoint '" + parsed.checkpoint.string() + "' holds " +
                            std::to_string(model->model.config().context_epochs) + " epochs, " +
                            std::to_string(config.epochs) + " requested");
      }
      transformers_.emplace(spec, TransformerSpec{std::move(model), parsed.sampling});
    } else {
      make(spec, 0);  // validates the string
    }
  }
}

std::unique_ptr<SelectorPolicy> SelectorFactory::make(const std::string& spec, std::uint64_t run_seed) const {
  const std::uint64_t seed = derive_seed(run_seed, kSelectorStream);
  if (spec.rfind(kTransformerPrefix, 0) == 0) {
    const auto it = transformers_.find(spec);
    if (it == transformers_.end()) throw InvalidArgument("selector '" + spec + "' was not preloaded");
    return std::make_unique<TransformerSelector>(it->second.model, it->second.sampling, seed, spec);
  }
  if (spec == "random" || spec == "tpe") {
    const HyperparamRanges ranges{config_.solvers.size(), config_.k_bar, mode_};
    return std::make_unique<OnlineSelector>(spec == "random" ? OnlineKind::kRandom : OnlineKind::kTpe, ranges, seed,
                                            config_.tpe, config_.solvers);
  }
  if (spec.rfind("switch:", 0) == 0) {
    const auto parts = split(spec, ':');
    if (parts.size() != 4) throw InvalidArgument("selector '" + spec + "': expected switch:<first>:<second>:<epoch>");
    int epoch = 0;
    try {
      epoch = std::stoi(parts[3]);
    } catch (const std::exception&) {
      throw InvalidArgument("selector '" + spec + "': bad switch epoch");
    }
    return solver_switch_schedule(solver_from_string(parts[1]), solver_from_string(parts[2]), epoch, config_.solvers,
                                  config_.k_bar, config_.preset_beta);
  }
  return preset_variant(spec, config_.solvers, config_.k_bar, config_.preset_beta);
}

GameDescriptor game_for_run(const std::string& family, std::uint64_t run_seed) {
  return parse_game_spec(family, run_seed);
}

Dataset generate_dataset(const ExperimentConfig& config) {
  if (config.runs < 1) throw InvalidArgument("dataset needs at least one run");
  const GameMode mode = mode_of(instantiate(game_for_run(config.game, config.seed)));
  const RunConfig rc = config.run_config(true);
  const HyperparamRanges ranges{config.solvers.size(), config.k_bar, mode};
  std::vector<RunTrace> runs(config.runs);
  parallel_for(config.runs, config.parallel, [&](std::size_t i) {
    const std::uint64_t seed = config.seed + i;
    const Game game = instantiate(game_for_run(config.game, seed));
    OnlineSelector behavior(config.hpo_kind, ranges, derive_seed(seed, kSelectorStream), config.tpe, config.solvers);
    runs[i] = run_spsro(game, behavior, config.epochs, rc, seed);
    if (!runs[i].valid) throw SelectorFailure("run " + std::to_string(i) + " failed: " + runs[i].error);
  });
  return make_dataset(std::move(runs), mode, config.solvers, static_cast<std::size_t>(config.epochs), config.q,
                      config.k_bar);
}

std::vector<EvalRun> evaluate(const ExperimentConfig& config) {
  const auto seeds = config.eval_seeds();
  if (seeds.empty()) throw InvalidArgument("no evaluation seeds");
  const GameMode mode = mode_of(instantiate(game_for_run(config.game, seeds.front())));
  const SelectorFactory factory(config.selectors, config, mode);
  const RunConfig base = config.run_config(false);
  std::vector<EvalRun> runs(config.selectors.size() * seeds.size());
  parallel_for(runs.size(), config.parallel, [&](std::size_t i) {
    const auto& spec = config.selectors[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    const Game game = instantiate(game_for_run(config.game, seed));
    auto selector = factory.make(spec, seed);
    EvalRun& out = runs[i];
    out.selector = spec;
    out.seed = seed;
    out.solvers = selector->solver_override().value_or(config.solvers);
    out.trace = run_spsro(game, *selector, config.epochs, base, seed);
  });
  return runs;
}

std::vector<RunRow> rows_of(const EvalRun& run) {
  std::vector<RunRow> rows;
  double cum = 0.0;
  for (const auto& record : run.trace.epochs) {
    RunRow row;
    row.selector = run.selector;
    row.seed = run.seed;
    row.epoch = record.metrics.epoch;
    row.nashconv = record.metrics.nashconv;
    row.effort = record.metrics.br_effort;
    cum += record.metrics.br_effort;
    row.cum_effort = cum;
    row.y = record.metrics.y;
    for (std::size_t b = 0; b < run.solvers.size(); ++b) {
      row.alpha[std::string(to_string(run.solvers.ids[b]))] = record.selection.weights[b];
    }
    row.beta = record.selection.oracle.beta;
    row.k = record.selection.oracle.k;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> solver_columns(const std::vector<RunRow>& rows, const SolverSet& preferred) {
  std::vector<std::string> out;
  std::set<std::string> present;
  for (const auto& row : rows)
    for (const auto& [name, value] : row.alpha) present.insert(name);
  for (auto id : preferred.ids) {
    const std::string name(to_string(id));
    if (present.erase(name)) out.push_back(name);
  }
  for (const auto& row : rows) {
    for (const auto& [name, value] : row.alpha) {
      if (present.erase(name)) out.push_back(name);
    }
  }
  return out;
}

void write_runs_csv(std::ostream& out, const std::vector<RunRow>& rows, const std::vector<std::string>& columns) {
  out << "selector,seed,epoch,nashconv,effort,cum_effort,y";
  for (const auto& c : columns) out << ",alpha_" << c;
  out << ",beta,k\n";
  for (const auto& r : rows) {
    if (r.selector.find_first_of(",\"\n") != std::string::npos) {
      throw InvalidArgument("selector name '" + r.selector + "' cannot be written to CSV");
    }
    out << r.selector << ',' << r.seed << ',' << r.epoch << ',' << format_double(r.nashconv) << ','
        << format_double(r.effort) << ',' << format_double(r.cum_effort) << ',' << format_double(r.y);
    for (const auto& c : columns) {
      out << ',';
      if (const auto it = r.alpha.find(c); it != r.alpha.end()) out << format_double(it->second);
    }
    out << ',' << format_double(r.beta) << ',' << r.k << '\n';
  }
  if (!out) throw IoError("failed writing run CSV");
}

std::vector<RunRow> read_runs_csv(std::istream& in) {
  static const std::vector<std::string> kLeading{"selector", "seed", "epoch", "nashconv", "effort", "cum_effort", "y"};
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty run CSV", 1);
  const auto header = split(line, ',');
  if (header.size() < kLeading.size() + 2 || !std::equal(kLeading.begin(), kLeading.end(), header.begin()) ||
      header[header.size() - 2] != "beta" || header.back() != "k") {
    throw ParseError("not a run CSV header: '" + line + "'", 1);
  }
  std::vector<std::string> solvers;
  for (std::size_t c = kLeading.size(); c + 2 < header.size(); ++c) {
    if (header[c].rfind("alpha_", 0) != 0) throw ParseError("unexpected column '" + header[c] + "'", 1);
    solvers.push_back(header[c].substr(6));
  }
  std::vector<RunRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()),
                       line_no);
    }
    RunRow r;
    r.selector = cells[0];
    r.seed = parse_int<std::uint64_t>(cells[1], line_no);
    r.epoch = parse_int<int>(cells[2], line_no);
    r.nashconv = parse_double(cells[3], line_no);
    r.effort = parse_double(cells[4], line_no);
    r.cum_effort = parse_double(cells[5], line_no);
    r.y = parse_double(cells[6], line_no);
    for (std::size_t s = 0; s < solvers.size(); ++s) {
      const auto& cell = cells[kLeading.size() + s];
      if (!cell.empty()) r.alpha[solvers[s]] = parse_double(cell, line_no);
    }
    r.beta = parse_double(cells[cells.size() - 2], line_no);
    r.k = parse_int<int>(cells.back(), line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

double standard_error(const std::vector<double>& values) {
  const auto n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

std::vector<SelectorSummary> aggregate(const std::vector<RunRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::map<std::uint64_t, std::map<int, const RunRow*>>> grouped;
  for (const auto& r : rows) {
    if (!grouped.contains(r.selector)) order.push_back(r.selector);
    auto& epochs = grouped[r.selector][r.seed];
    if (!epochs.emplace(r.epoch, &r).second) {
      throw InvalidArgument("selector '" + r.selector + "' seed " + std::to_string(r.seed) + " repeats epoch " +
                            std::to_string(r.epoch));
    }
  }
  std::vector<SelectorSummary> out;
  for (const auto& name : order) {
    const auto& seeds = grouped.at(name);
    int last = 0;
    for (const auto& [seed, epochs] : seeds) last = std::max(last, epochs.rbegin()->first);
    for (const auto& [seed, epochs] : seeds) {
      for (int e = 1; e <= last; ++e) {
        if (!epochs.contains(e)) {
          throw InvalidArgument("selector '" + name + "' seed " + std::to_string(seed) + " is missing epoch " +
                                std::to_string(e));
        }
      }
      if (epochs.begin()->first < 1) {
        throw InvalidArgument("selector '" + name + "' seed " + std::to_string(seed) + " has epoch < 1");
      }
    }
    SelectorSummary s;
    s.selector = name;
    s.runs = seeds.size();
    s.final_epoch = last;
    for (int e = 1; e <= last; ++e) {
      CurvePoint p;
      p.epoch = e;
      std::vector<double> values;
      std::map<std::string, std::pair<double, int>> alpha_sums;
      for (const auto& [seed, epochs] : seeds) {
        const RunRow& r = *epochs.at(e);
        values.push_back(r.nashconv);
        p.cum_effort_mean += r.cum_effort;
        for (const auto& [solver, a] : r.alpha) {
          alpha_sums[solver].first += a;
          alpha_sums[solver].second += 1;
        }
      }
      for (double v : values) p.nashconv_mean += v;
      p.nashconv_mean /= static_cast<double>(values.size());
      p.nashconv_se = standard_error(values);
      p.cum_effort_mean /= static_cast<double>(values.size());
      for (const auto& [solver, sum] : alpha_sums) p.alpha_mean[solver] = sum.first / sum.second;
      s.curve.push_back(std::move(p));
    }
    if (!s.curve.empty()) {
      s.final_nashconv_mean = s.curve.back().nashconv_mean;
      s.final_nashconv_se = s.curve.back().nashconv_se;
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SelectorSummary>& summaries) {
  out << "selector,runs,final_epoch,final_nashconv_mean,final_nashconv_se\n";
  for (const auto& s : summaries) {
    out << s.selector << ',' << s.runs << ',' << s.final_epoch << ',' << format_double(s.final_nashconv_mean) << ','
        << format_double(s.final_nashconv_se) << '\n';
  }
}

void write_curves_csv(std::ostream& out, const std::vector<SelectorSummary>& summaries) {
  out << "selector,epoch,nashconv_mean,nashconv_se,cum_effort_mean\n";
  for (const auto& s : summaries) {
    for (const auto& p : s.curve) {
      out << s.selector << ',' << p.epoch << ',' << format_double(p.nashconv_mean) << ','
          << format_double(p.nashconv_se) << ',' << format_double(p.cum_effort_mean) << '\n';
    }
  }
}

namespace {

void write_weights_csv(std::ostream& out, const std::vector<SelectorSummary>& summaries) {
  out << "selector,epoch,solver,alpha_mean\n";
  for (const auto& s : summaries)
    for (const auto& p : s.curve)
      for (const auto& [solver, a] : p.alpha_mean)
        out << s.selector << ',' << p.epoch << ',' << solver << ',' << format_double(a) << '\n';
}

void write_text(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  body(out);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double kWidth = 760, kHeight = 460, kLeft = 70, kRight = 200, kTop = 40, kBottom = 55;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  y0 = std::min(y0, 0.0);
  if (y1 <= y0) y1 = y0 + 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
    << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = x0 + (x1 - x0) * t / 5, yv = y0 + (y1 - y0) * t / 5;
    o << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << tick_label(xv)
      << "</text>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << tick_label(yv)
      << "</text>\n";
    o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
      << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
    << xml_escape(x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) o << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
    o << "\"/>\n";
    const double ly = kTop + 10 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << kLeft + pw + 12 << "\" x2=\"" << kLeft + pw + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_report(const std::filesystem::path& dir, const std::vector<SelectorSummary>& summaries, bool plots) {
  std::filesystem::create_directories(dir);
  write_text(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, summaries); });
  write_text(dir / "curves.csv", [&](std::ostream& o) { write_curves_csv(o, summaries); });
  write_text(dir / "weights.csv", [&](std::ostream& o) { write_weights_csv(o, summaries); });
  if (!plots) return;
  std::vector<PlotSeries> by_epoch, by_effort, weights;
  for (const auto& s : summaries) {
    PlotSeries e{s.selector, {}, {}}, f{s.selector, {}, {}};
    std::map<std::string, PlotSeries> w;
    for (const auto& p : s.curve) {
      e.x.push_back(p.epoch);
      e.y.push_back(p.nashconv_mean);
      f.x.push_back(p.cum_effort_mean);
      f.y.push_back(p.nashconv_mean);
      for (const auto& [solver, a] : p.alpha_mean) {
        auto& ws = w[solver];
        ws.name = s.selector + " / " + solver;
        ws.x.push_back(p.epoch);
        ws.y.push_back(a);
      }
    }
    by_epoch.push_back(std::move(e));
    by_effort.push_back(std::move(f));
    for (auto& [solver, ws] : w) weights.push_back(std::move(ws));
  }
  write_text(dir / "nashconv_epoch.svg",
             [&](std::ostream& o) { o << svg_line_plot("NashConv by epoch", "epoch", "mean NashConv", by_epoch); });
  write_text(dir / "nashconv_effort.svg", [&](std::ostream& o) {
    o << svg_line_plot("NashConv by cumulative effort", "cumulative BR effort", "mean NashConv", by_effort);
  });
  write_text(dir / "weights.svg", [&](std::ostream& o) {
    o << svg_line_plot("Mean meta-solver weights", "epoch", "mean weight", weights);
  });
}

}  // namespace spsro
