#include "spsro/hpo_online.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "spsro/errors.hpp"

namespace spsro {

namespace {

void validate_ranges(const HyperparamRanges& ranges) {
  if (ranges.num_solvers == 0) throw InvalidArgument("hyperparameter ranges need at least one solver");
  if (ranges.k_bar < 1) throw InvalidArgument("hyperparameter ranges need k_bar >= 1");
}

SolverWeights normalized_weights(std::vector<double> raw) {
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (!(total > 0.0)) return SolverWeights::uniform(raw.size());
  return SolverWeights(std::move(raw));
}

int clamp_k(double k, int k_bar) {
  return static_cast<int>(std::clamp(std::round(k), 1.0, static_cast<double>(k_bar)));
}

// One-dimensional Parzen estimator: a truncated Gaussian kernel per observed
// point plus one prior kernel (mid-range, sigma = range), equally weighted.
// Each point's bandwidth is the larger gap to its sorted neighbours (the
// prior center counts as a neighbour), clipped to
// [range / min(100, n + 1), range].
class Parzen {
 public:
  Parzen(std::vector<double> points, double lo, double hi) : points_(std::move(points)), lo_(lo), hi_(hi) {
    const double range = hi - lo;
    const double floor = range / std::min(100.0, static_cast<double>(points_.size()) + 1.0);
    std::vector<double> sorted = points_;
    sorted.push_back(0.5 * (lo + hi));
    std::sort(sorted.begin(), sorted.end());
    sigmas_.reserve(points_.size());
    for (double x : points_) {
      const auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
      const double left = it == sorted.begin() ? x - lo : x - *(it - 1);
      const double right = it + 1 == sorted.end() ? hi - x : *(it + 1) - x;
      sigmas_.push_back(std::clamp(std::max(left, right), floor, range));
    }
  }

  double density(double x) const {
    double total = kernel(x, 0.5 * (lo_ + hi_), hi_ - lo_);
    for (std::size_t i = 0; i < points_.size(); ++i) total += kernel(x, points_[i], sigmas_[i]);
    return total / static_cast<double>(points_.size() + 1);
  }

  double sample(Rng& rng) const {
    const std::size_t pick = rng.below(points_.size() + 1);
    const double center = pick == points_.size() ? 0.5 * (lo_ + hi_) : points_[pick];
    const double sigma = pick == points_.size() ? hi_ - lo_ : sigmas_[pick];
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double x = center + sigma * rng.normal();
      if (x >= lo_ && x <= hi_) return x;
    }
    return std::clamp(center, lo_, hi_);
  }

 private:
  // Gaussian density renormalized to its mass inside [lo, hi].
  double kernel(double x, double mean, double sigma) const {
    const double z = (x - mean) / sigma;
    const double mass = 0.5 * (std::erf((hi_ - mean) / (sigma * std::numbers::sqrt2)) -
                               std::erf((lo_ - mean) / (sigma * std::numbers::sqrt2)));
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi) * std::max(mass, 1e-300));
  }

  std::vector<double> points_;
  double lo_;
  double hi_;
  std::vector<double> sigmas_;
};

double pick_dimension(const std::vector<double>& good, const std::vector<double>& bad, double lo, double hi,
                      std::size_t candidates, Rng& rng) {
  const Parzen l(good, lo, hi);
  const Parzen g(bad, lo, hi);
  double best = lo;
  double best_score = -1.0;
  for (std::size_t c = 0; c < std::max<std::size_t>(candidates, 1); ++c) {
    const double x = l.sample(rng);
    const double score = l.density(x) / std::max(g.density(x), 1e-300);
    if (score > best_score) {
      best = x;
      best_score = score;
    }
  }
  return best;
}

}  // namespace

HyperparamSelection suggest_random(const HyperparamRanges& ranges, Rng& rng) {
  validate_ranges(ranges);
  std::vector<double> raw(ranges.num_solvers);
  for (auto& a : raw) a = rng.uniform();
  HyperparamSelection u{normalized_weights(std::move(raw)), OracleParams{0.0, ranges.k_bar, ranges.k_bar}};
  if (ranges.mode == GameMode::kExtensiveForm) {
    u.oracle.beta = rng.uniform();
    u.oracle.k = static_cast<int>(rng.integer(1, ranges.k_bar));
  }
  return u;
}

HyperparamSelection suggest_tpe(const TrialHistory& history, const HyperparamRanges& ranges, Rng& rng,
                                const TpeConfig& config) {
  validate_ranges(ranges);
  if (!(config.gamma_quantile > 0.0 && config.gamma_quantile < 1.0)) {
    throw InvalidArgument("tpe gamma quantile must lie in (0, 1)");
  }
  if (history.size() < config.startup_trials) return suggest_random(ranges, rng);
  for (const auto& obs : history) {
    if (!std::isfinite(obs.y)) throw InvalidArgument("tpe history contains a non-finite y");
    if (obs.selection.weights.size() != ranges.num_solvers) {
      throw InvalidArgument("tpe history has the wrong number of solver weights");
    }
  }

  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return history[a].y < history[b].y; });
  const auto n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.gamma_quantile * static_cast<double>(history.size()))));

  auto split = [&](auto&& field) {
    std::pair<std::vector<double>, std::vector<double>> sets;
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < n_good ? sets.first : sets.second).push_back(field(history[order[i]].selection));
    }
    return sets;
  };

  std::vector<double> raw(ranges.num_solvers);
  for (std::size_t b = 0; b < ranges.num_solvers; ++b) {
    const auto [good, bad] = split([b](const HyperparamSelection& u) { return u.weights[b]; });
    raw[b] = pick_dimension(good, bad, 0.0, 1.0, config.candidates, rng);
  }
  HyperparamSelection u{normalized_weights(std::move(raw)), OracleParams{0.0, ranges.k_bar, ranges.k_bar}};
  if (ranges.mode == GameMode::kExtensiveForm) {
    const auto [good_beta, bad_beta] = split([](const HyperparamSelection& s) { return s.oracle.beta; });
    u.oracle.beta = pick_dimension(good_beta, bad_beta, 0.0, 1.0, config.candidates, rng);
    if (ranges.k_bar > 1) {
      const auto [good_k, bad_k] = split([](const HyperparamSelection& s) { return static_cast<double>(s.oracle.k); });
      u.oracle.k = clamp_k(pick_dimension(good_k, bad_k, 1.0, static_cast<double>(ranges.k_bar), config.candidates, rng),
                           ranges.k_bar);
    } else {
      u.oracle.k = 1;
    }
  }
  return u;
}

OnlineSelector::OnlineSelector(OnlineKind kind, HyperparamRanges ranges, std::uint64_t seed, TpeConfig config,
                               std::optional<SolverSet> solvers)
    : kind_(kind), ranges_(ranges), rng_(seed), config_(config), solvers_(std::move(solvers)) {
  validate_ranges(ranges_);
  if (solvers_ && solvers_->size() != ranges_.num_solvers) {
    throw InvalidArgument("online selector: solver set size does not match the ranges");
  }
}

HyperparamSelection OnlineSelector::next(const RunTrace& trace) {
  if (kind_ == OnlineKind::kRandom) return suggest_random(ranges_, rng_);
  TrialHistory history;
  history.reserve(trace.size());
  for (const auto& record : trace.epochs) history.push_back(Observation{record.selection, record.metrics.y});
  return suggest_tpe(history, ranges_, rng_, config_);
}

}  // namespace spsro
