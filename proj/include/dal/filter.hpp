#pragma once

#include "dal/likelihood.hpp"

namespace dal {

/// Probability mass over (heading, row, col). Sums to 1; obstacle cells hold 0.
struct BeliefGrid {
  PoseTensor<double> values;
  int level = 0;
};

/// Transition noise in cell units. Smoothing uses a 5-tap truncated Gaussian,
/// circular along heading and mass-preserving at map edges and obstacles.
struct MotionNoise {
  double heading_sigma = 0.25;
  double row_sigma = 0.5;
  double col_sigma = 0.5;
  /// Probability that a Forward command leaves the robot in its cell.
  double forward_slip = 0.0;

  static MotionNoise none() { return {0.0, 0.0, 0.0, 0.0}; }
};

struct UpdateResult {
  BeliefGrid belief;
  bool degenerate = false;
};

BeliefGrid uniform_belief(const GridMap& map);

/// Cell offset (drow, dcol) of one Forward step for a heading index. Diagonal
/// headings move one cell along both axes.
std::pair<int, int> forward_offset(const GridGeometry& geometry, int heading);

/// Whether Forward from `pose` lands in a free in-bounds cell.
bool forward_blocked(const GridMap& map, const CellPose& pose);

/// Pose reached by applying `action` to `pose` on the coarse grid.
CellPose next_pose(const GridMap& map, const CellPose& pose, Action action);

/// Left rotates the heading axis up by one index, Right down by one; Forward
/// shifts each heading plane one cell along its direction, with blocked mass
/// staying in place. Smoothing and renormalization follow.
BeliefGrid transition(const BeliefGrid& belief, Action action, const MotionNoise& noise,
                      const GridMap& map);

/// Elementwise product with the likelihood, obstacle cells zeroed and the
/// result renormalized. An all-zero product returns the prior, flagged.
UpdateResult measurement_update(const BeliefGrid& prior, const LikelihoodGrid& likelihood,
                                const GridMap& map);
/// Shape-only variant without obstacle masking.
UpdateResult measurement_update(const BeliefGrid& prior, const LikelihoodGrid& likelihood);

/// Pose of maximum mass, ties to the smaller (theta, n, m).
CellPose map_estimate(const BeliefGrid& belief);

/// Shannon entropy in nats, 0 ln 0 = 0.
double entropy(const BeliefGrid& belief);
double entropy(const Eigen::Ref<const Eigen::VectorXd>& p);

/// Zeroes obstacle cells in place.
void mask_obstacles(PoseTensor<double>& values, const GridMap& map);

}  // namespace dal
