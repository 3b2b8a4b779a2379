#include "spsro/evaluation.hpp"

#include <cmath>

#include "spsro/errors.hpp"
#include "spsro/oracles.hpp"

namespace spsro {

namespace {

void check_dims(const PolicySpace& space, const MetaStrategy& sigma) {
  for (int p = 0; p < kNumPlayers; ++p) {
    if (static_cast<std::size_t>(sigma[p].size()) != space.size(p)) {
      throw InvalidArgument("nashconv: meta-strategy of player " + std::to_string(p) +
                            " does not match its policy space");
    }
    if (space.size(p) == 0) throw InvalidArgument("nashconv: empty policy space");
  }
}

double clamp_gap(double gap) { return (gap < 0.0 && gap >= -1e-9) ? 0.0 : gap; }

}  // namespace

double nashconv(const Game& game, const PolicySpace& space, const MetaStrategy& sigma) {
  check_dims(space, sigma);
  if (const auto* nfg = std::get_if<NormalFormGame>(&game)) {
    std::array<Eigen::VectorXd, 2> mixed{Eigen::VectorXd::Zero(nfg->rows), Eigen::VectorXd::Zero(nfg->cols)};
    for (int p = 0; p < kNumPlayers; ++p) {
      for (std::size_t k = 0; k < space.size(p); ++k) {
        const int a = std::get<PureAction>(space.policies[p][k]).index;
        if (a < 0 || a >= mixed[p].size()) throw InvalidPolicy("nashconv: pure action out of range");
        mixed[p][a] += sigma[p][static_cast<Eigen::Index>(k)];
      }
    }
    const Eigen::VectorXd row_values = nfg->payoff * mixed[1];
    const Eigen::VectorXd col_values = -(nfg->payoff.transpose() * mixed[0]);
    const double gap0 = row_values.maxCoeff() - mixed[0].dot(row_values);
    const double gap1 = col_values.maxCoeff() - mixed[1].dot(col_values);
    return clamp_gap(clamp_gap(gap0) + clamp_gap(gap1));
  }

  // Kuhn: the value of each player's mixture is computed from exact pairwise
  // payoffs, the deviation value from an exact tree best response.
  Eigen::MatrixXd pairwise(space.size(0), space.size(1));
  for (std::size_t j = 0; j < space.size(0); ++j)
    for (std::size_t k = 0; k < space.size(1); ++k)
      pairwise(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          expected_value(game, space.policies[0][j], space.policies[1][k])[0];
  const double current0 = sigma[0].dot(pairwise * sigma[1]);
  const double current1 = -current0;
  const double br0 = exact_br_kuhn(0, sigma[1], space.policies[1]).value;
  const double br1 = exact_br_kuhn(1, sigma[0], space.policies[0]).value;
  return clamp_gap(clamp_gap(br0 - current0) + clamp_gap(br1 - current1));
}

MetricValue metric_y(double nashconv_e, double effort_e, const MetricRefs& refs) {
  if (!(refs.effort > 0.0)) throw InvalidArgument("metric_y: reference effort must be positive");
  if (refs.nashconv < 0.0) throw InvalidArgument("metric_y: reference NashConv must be nonnegative");
  const double effort_ratio = effort_e / refs.effort;
  if (refs.nashconv == 0.0) return MetricValue{effort_ratio, true};
  return MetricValue{nashconv_e / refs.nashconv + effort_ratio, false};
}

}  // namespace spsro
