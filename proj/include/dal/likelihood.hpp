#pragma once

#include "dal/lidar.hpp"

#include <memory>
#include <vector>

namespace dal {

/// Measurement likelihood over poses. Level 0 is the coarse grid; level 1 is
/// the refined grid (Theta x kN x kM).
struct LikelihoodGrid {
  PoseTensor<double> values;
  int level = 0;
  double temperature = 1.0;
};

struct HierarchyConfig {
  int top_c = 4;     // coarse entries refined per step
  int k = 3;         // fine cells per coarse cell side
  int crop_px = 27;  // square crop handed to the fine provider

  void validate(Eigen::Index pose_count) const;
};

/// Cosine scorer with the scan matrix normalized once up front. Stored and
/// query ranges have +inf replaced by max_range; invalid rows score -1.
class ScanMatcher {
 public:
  explicit ScanMatcher(const ScanMatrix& matrix);

  PoseTensor<double> scores(const Scan& scan) const;
  /// Scores against a stored row, as if that row had been observed.
  PoseTensor<double> scores_for_row(Eigen::Index row) const;

  const GridGeometry& geometry() const { return geometry_; }
  int beams() const { return int(unit_rows_.cols()); }
  double max_range() const { return max_range_; }

 private:
  PoseTensor<double> score_unit(const Eigen::VectorXd& unit_query) const;

  GridGeometry geometry_;
  double max_range_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> unit_rows_;
  std::vector<std::uint8_t> valid_;
};

/// Range vector prepared for correlation: reduced to `beams`, rounded to
/// float32 like the scan matrix, +inf clamped to max_range.
Eigen::VectorXd correlation_vector(const Scan& scan, int beams, double max_range);

PoseTensor<double> cosine_scores(const ScanMatrix& matrix, const Scan& scan);

/// exp(beta * s) / sum exp(beta * s), max-subtracted.
LikelihoodGrid tempered_softmax(const PoseTensor<double>& scores, double beta);

/// Indices of the `count` largest entries; ties go to the smaller (theta, n, m).
std::vector<Eigen::Index> top_entries(const PoseTensor<double>& values, int count);

/// Zero-padded square crop centered on a pixel.
Raster crop(const Raster& raster, int center_row, int center_col, int side);

/// Inputs handed to a fine (level 1) likelihood model for one coarse cell.
struct BlockQuery {
  const GridMap* map = nullptr;
  const Scan* scan = nullptr;
  CellPose cell;
  int k = 3;
  Raster map_crop;
  Raster scan_crop;
};

/// Slot for measurement models. The scan-matching classes below fill it; an
/// external learned model attaches through the wire protocol.
class LikelihoodProvider {
 public:
  virtual ~LikelihoodProvider() = default;

  /// Level 0 likelihood over the whole grid.
  virtual LikelihoodGrid coarse(const GridMap& map, const Scan& scan) const;
  /// k x k block for one coarse cell, summing to 1.
  virtual Eigen::MatrixXd fine_block(const BlockQuery& query) const;
};

class ScanMatchingProvider final : public LikelihoodProvider {
 public:
  ScanMatchingProvider(std::shared_ptr<const ScanMatrix> matrix, double beta);

  LikelihoodGrid coarse(const GridMap& map, const Scan& scan) const override;
  const ScanMatcher& matcher() const { return matcher_; }
  double beta() const { return beta_; }

 private:
  std::shared_ptr<const ScanMatrix> matrix_;
  ScanMatcher matcher_;
  double beta_;
};

struct FineMatchConfig {
  double beta = 50.0;
  LidarConfig lidar;
};

/// Classical stand-in for the fine model: ray casts at the k x k sub-cell
/// centroids (coarse heading), cosine-scores them against the query and
/// softmaxes within the block. Obstacle cells get a uniform block.
class FineScanMatchingProvider final : public LikelihoodProvider {
 public:
  explicit FineScanMatchingProvider(FineMatchConfig cfg) : cfg_(cfg) {}
  Eigen::MatrixXd fine_block(const BlockQuery& query) const override;

 private:
  FineMatchConfig cfg_;
};

std::shared_ptr<LikelihoodProvider> fine_scan_matching_provider(const GridMap& map,
                                                                const HierarchyConfig& cfg,
                                                                FineMatchConfig fine = {});

/// Builds the crops for a cell and asks the provider for its block.
BlockQuery make_block_query(const GridMap& map, const Scan& scan, const CellPose& cell,
                            const HierarchyConfig& cfg);

/// Refines the top-c coarse entries into k x k blocks scaled by the coarse
/// value; every other cell is copied as coarse / k^2. Result sums to 1.
LikelihoodGrid refine_hierarchical(const LikelihoodGrid& coarse, const GridMap& map,
                                   const Scan& scan, const HierarchyConfig& cfg,
                                   const LikelihoodProvider& fine_provider);

}  // namespace dal
