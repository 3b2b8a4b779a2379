#pragma once

#include "spsro/meta_game.hpp"
#include "spsro/meta_solvers.hpp"

namespace spsro {

/// Total NashConv of `sigma` in the underlying game: for each player, the
/// exact best-response value against the opponent's mixture minus the value
/// of the player's own mixture, summed over both players. Values in
/// [-1e-9, 0) are clamped to 0.
double nashconv(const Game& game, const PolicySpace& space, const MetaStrategy& sigma);

/// Epoch-1 values that normalize the per-epoch metric.
struct MetricRefs {
  double nashconv = 0.0;
  double effort = 1.0;
};

struct MetricValue {
  double y = 0.0;
  /// Set when refs.nashconv == 0 (game solved at epoch 1); y is then the
  /// effort ratio alone.
  bool degenerate = false;
};

/// y = nashconv / refs.nashconv + effort / refs.effort.
MetricValue metric_y(double nashconv_e, double effort_e, const MetricRefs& refs);

struct EpochMetrics {
  int epoch = 1;
  double nashconv = 0.0;
  double br_effort = 1.0;
  double y = 0.0;
  bool degenerate = false;

  bool operator==(const EpochMetrics&) const = default;
};

}  // namespace spsro
