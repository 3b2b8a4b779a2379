#include "spsro/meta_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "spsro/errors.hpp"

namespace spsro {

namespace {

void require_nonempty(const PayoffTensor& tensor, const char* who) {
  if (tensor.rows() < 1 || tensor.cols() < 1) throw InvalidArgument(std::string(who) + ": empty payoff tensor");
}

void require_finite(const PayoffTensor& tensor, const char* who) {
  require_nonempty(tensor, who);
  if (!tensor.matrix().allFinite()) throw InvalidArgument(std::string(who) + ": payoff tensor has non-finite entries");
}

Eigen::VectorXd uniform_vector(Eigen::Index n) { return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)); }

Eigen::VectorXd point_mass(Eigen::Index n, Eigen::Index at) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[at] = 1.0;
  return v;
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void validate_meta_strategy(const MetaStrategy& sigma, const PayoffTensor& tensor) {
  const Eigen::Index sizes[2] = {tensor.rows(), tensor.cols()};
  for (int p = 0; p < kNumPlayers; ++p) {
    const auto& d = sigma.dist[p];
    if (d.size() != sizes[p]) throw InvalidArgument("meta-strategy length does not match the policy space");
    if ((d.array() < 0.0).any() || !d.allFinite()) throw InvalidArgument("meta-strategy has negative entries");
    if (std::abs(d.sum() - 1.0) > 1e-9) throw InvalidArgument("meta-strategy does not sum to one");
  }
}

std::string_view to_string(SolverId id) {
  switch (id) {
    case SolverId::kUniform: return "uniform";
    case SolverId::kPrd: return "prd";
    case SolverId::kAlphaRank: return "alpharank";
    case SolverId::kLastOne: return "last_one";
    case SolverId::kPenultimate: return "penultimate";
    case SolverId::kNash: return "nash";
    case SolverId::kRectifiedNash: return "rectified_nash";
    case SolverId::kCce: return "cce";
  }
  return "unknown";
}

SolverId solver_from_string(std::string_view name) {
  for (SolverId id : {SolverId::kUniform, SolverId::kPrd, SolverId::kAlphaRank, SolverId::kLastOne,
                      SolverId::kPenultimate, SolverId::kNash, SolverId::kRectifiedNash, SolverId::kCce}) {
    if (to_string(id) == name) return id;
  }
  throw InvalidArgument("unknown meta-solver '" + std::string(name) + "'");
}

bool SolverSet::contains(SolverId id) const { return index_of(id) >= 0; }

std::ptrdiff_t SolverSet::index_of(SolverId id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : it - ids.begin();
}

SolverWeights::SolverWeights(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  if (alpha_.empty()) throw InvalidArgument("solver weights must be nonempty");
  double total = 0.0;
  for (double a : alpha_) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw InvalidArgument("solver weights must be finite and nonnegative");
    total += a;
  }
  if (!(total > 0.0)) throw InvalidArgument("solver weights must not all be zero");
  // Already-normalized input is kept bit-for-bit so stored traces round-trip.
  if (std::abs(total - 1.0) <= 1e-12) return;
  for (double& a : alpha_) a /= total;
}

SolverWeights SolverWeights::one_hot(std::size_t m, std::size_t index) {
  std::vector<double> alpha(m, 0.0);
  alpha.at(index) = 1.0;
  return SolverWeights(std::move(alpha));
}

SolverWeights SolverWeights::uniform(std::size_t m) { return SolverWeights(std::vector<double>(m, 1.0)); }

MetaStrategy solve_uniform(const PayoffTensor& tensor) {
  require_nonempty(tensor, "solve_uniform");
  return MetaStrategy{{uniform_vector(tensor.rows()), uniform_vector(tensor.cols())}};
}

Eigen::VectorXd project_to_floored_simplex(const Eigen::VectorXd& x, double floor) {
  const Eigen::Index n = x.size();
  const double mass = 1.0 - static_cast<double>(n) * floor;
  if (mass <= 0.0) return uniform_vector(n);
  // Project y = x - floor onto {z >= 0, sum z = mass}.
  std::vector<double> sorted(x.data(), x.data() + n);
  for (double& v : sorted) v -= floor;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - mass) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = std::max(x[i] - floor - theta, 0.0) + floor;
  return out;
}

namespace {

void prd_project(Eigen::VectorXd& x, double floor) {
  if (x.minCoeff() >= floor) {
    x /= x.sum();
  } else {
    x = project_to_floored_simplex(x, floor);
  }
}

}  // namespace

MetaStrategy solve_prd(const PayoffTensor& tensor, const PrdConfig& config) {
  require_finite(tensor, "solve_prd");
  const Eigen::MatrixXd& m = tensor.matrix();
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  Eigen::VectorXd p = uniform_vector(rows);
  Eigen::VectorXd q = uniform_vector(cols);
  if (rows == 1 && cols == 1) return MetaStrategy{{p, q}};

  const Eigen::MatrixXd mt = m.transpose();
  const double floor_p = config.gamma / static_cast<double>(rows);
  const double floor_q = config.gamma / static_cast<double>(cols);
  const double dt = config.step_size;
  Eigen::VectorXd v0(rows);
  Eigen::VectorXd v1(cols);
  Eigen::VectorXd sum_p = Eigen::VectorXd::Zero(rows);
  Eigen::VectorXd sum_q = Eigen::VectorXd::Zero(cols);
  for (std::size_t step = 0; step < config.steps; ++step) {
    v0.noalias() = m * q;
    v1.noalias() = -(mt * p);
    const double avg0 = p.dot(v0);
    const double avg1 = q.dot(v1);
    p.array() += dt * p.array() * (v0.array() - avg0);
    q.array() += dt * q.array() * (v1.array() - avg1);
    prd_project(p, floor_p);
    prd_project(q, floor_q);
    if (config.average_iterates) {
      sum_p += p;
      sum_q += q;
    }
  }
  if (config.average_iterates && config.steps > 0) {
    return MetaStrategy{{sum_p / sum_p.sum(), sum_q / sum_q.sum()}};
  }
  return MetaStrategy{{p, q}};
}

Eigen::MatrixXd alpharank_transition_matrix(const PayoffTensor& tensor, const AlphaRankConfig& config) {
  require_finite(tensor, "solve_alpharank");
  const Eigen::MatrixXd& m = tensor.matrix();
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  const Eigen::Index n = rows * cols;
  Eigen::MatrixXd transition = Eigen::MatrixXd::Zero(n, n);
  const Eigen::Index deviations = (rows - 1) + (cols - 1);
  if (deviations == 0) {
    transition(0, 0) = 1.0;
    return transition;
  }
  const double eta = 1.0 / static_cast<double>(deviations);
  const double mu = config.mutation;
  auto accept = [&](double gain) { return eta * ((1.0 - mu) * logistic(config.alpha_scale * gain) + mu); };
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const Eigen::Index s = i * cols + j;
      double leave = 0.0;
      for (Eigen::Index i2 = 0; i2 < rows; ++i2) {
        if (i2 == i) continue;
        const double prob = accept(m(i2, j) - m(i, j));
        transition(s, i2 * cols + j) = prob;
        leave += prob;
      }
      for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
        if (j2 == j) continue;
        // Column player's payoff is -m.
        const double prob = accept(m(i, j) - m(i, j2));
        transition(s, i * cols + j2) = prob;
        leave += prob;
      }
      transition(s, s) = 1.0 - leave;
    }
  }
  return transition;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition, double tolerance) {
  const Eigen::Index n = transition.rows();
  if (n == 0 || transition.cols() != n) throw InvalidArgument("stationary_distribution: matrix must be square and nonempty");
  Eigen::VectorXd x(n);
  if (n == 1) {
    x[0] = 1.0;
    return x;
  }
  // GTH elimination works on the off-diagonal structure only, so it stays
  // accurate when exit probabilities are many orders of magnitude apart.
  Eigen::MatrixXd a = transition;
  for (Eigen::Index k = n - 1; k > 0; --k) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) s += a(k, j);
    if (!(s > 0.0)) throw InvalidArgument("stationary_distribution: chain is reducible");
    for (Eigen::Index i = 0; i < k; ++i) a(i, k) /= s;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double akj = a(k, j);
      if (akj == 0.0) continue;
      for (Eigen::Index i = 0; i < k; ++i) a(i, j) += a(i, k) * akj;
    }
  }
  x[0] = 1.0;
  for (Eigen::Index k = 1; k < n; ++k) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) v += x[i] * a(i, k);
    x[k] = v;
  }
  x /= x.sum();

  const Eigen::MatrixXd pt = transition.transpose();
  Eigen::VectorXd next(n);
  for (int iter = 0; iter < 10000; ++iter) {
    next.noalias() = pt * x;
    const double residual = (next - x).cwiseAbs().maxCoeff();
    if (residual <= tolerance) return x;
    x = next / next.sum();
  }
  throw ResourceLimit("stationary_distribution: residual did not reach tolerance");
}

MetaStrategy solve_alpharank(const PayoffTensor& tensor, const AlphaRankConfig& config) {
  require_finite(tensor, "solve_alpharank");
  const Eigen::Index rows = tensor.rows();
  const Eigen::Index cols = tensor.cols();
  const auto profiles = static_cast<std::size_t>(rows * cols);
  if (profiles > config.max_profiles) {
    throw ResourceLimit("solve_alpharank: " + std::to_string(profiles) + " strategy profiles exceed the cap of " +
                        std::to_string(config.max_profiles));
  }
  if (!(config.mutation > 0.0 && config.mutation <= 1.0)) {
    throw InvalidArgument("solve_alpharank: mutation must lie in (0, 1]");
  }
  if (profiles == 1) return MetaStrategy{{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)}};
  const Eigen::VectorXd pi = stationary_distribution(alpharank_transition_matrix(tensor, config));
  MetaStrategy sigma{{Eigen::VectorXd::Zero(rows), Eigen::VectorXd::Zero(cols)}};
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      sigma[0][i] += pi[i * cols + j];
      sigma[1][j] += pi[i * cols + j];
    }
  }
  sigma[0] /= sigma[0].sum();
  sigma[1] /= sigma[1].sum();
  return sigma;
}

MetaStrategy solve_last_one(const PayoffTensor& tensor) {
  require_nonempty(tensor, "solve_last_one");
  return MetaStrategy{{point_mass(tensor.rows(), tensor.rows() - 1), point_mass(tensor.cols(), tensor.cols() - 1)}};
}

MetaStrategy solve_penultimate(const PayoffTensor& tensor) {
  require_nonempty(tensor, "solve_penultimate");
  auto index = [](Eigen::Index n) { return n >= 2 ? n - 2 : n - 1; };
  return MetaStrategy{
      {point_mass(tensor.rows(), index(tensor.rows())), point_mass(tensor.cols(), index(tensor.cols()))}};
}

MetaStrategy solve(SolverId id, const PayoffTensor& tensor, const SolverConfig& config) {
  switch (id) {
    case SolverId::kUniform: return solve_uniform(tensor);
    case SolverId::kPrd: return solve_prd(tensor, config.prd);
    case SolverId::kAlphaRank: return solve_alpharank(tensor, config.alpharank);
    case SolverId::kLastOne: return solve_last_one(tensor);
    case SolverId::kPenultimate: return solve_penultimate(tensor);
    case SolverId::kNash:
    case SolverId::kRectifiedNash:
    case SolverId::kCce:
      throw NotImplemented("meta-solver '" + std::string(to_string(id)) +
                           "' is recognized but not implemented; use uniform, prd, alpharank, last_one or penultimate");
  }
  throw InvalidArgument("unknown solver id");
}

MetaStrategy mix_meta_strategies(std::span<const MetaStrategy> strategies, const SolverWeights& weights) {
  if (strategies.empty() || strategies.size() != weights.size()) {
    throw InvalidArgument("mix_meta_strategies: need one strategy per weight");
  }
  MetaStrategy mixed;
  for (int p = 0; p < kNumPlayers; ++p) {
    const Eigen::Index n = strategies[0][p].size();
    mixed[p] = Eigen::VectorXd::Zero(n);
    for (std::size_t b = 0; b < strategies.size(); ++b) {
      if (strategies[b][p].size() != n) throw InvalidArgument("mix_meta_strategies: dimension mismatch");
      if (weights[b] == 0.0) continue;
      mixed[p] += weights[b] * strategies[b][p];
    }
  }
  return mixed;
}

}  // namespace spsro
