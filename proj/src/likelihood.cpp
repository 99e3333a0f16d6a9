#include "dal/likelihood.hpp"

#include <algorithm>
#include <numeric>

namespace dal {

void HierarchyConfig::validate(Eigen::Index pose_count) const {
  if (top_c < 0 || top_c > pose_count) throw ParameterError("top_c out of range");
  if (k < 2) throw ParameterError("k must be at least 2");
  if (crop_px < k) throw ParameterError("crop_px must be at least k");
}

Eigen::VectorXd correlation_vector(const Scan& scan, int beams, double max_range) {
  const Scan reduced = reduce_scan(scan, beams);
  if (reduced.beams() != beams) throw ParameterError("beam count mismatch after reduction");
  Eigen::VectorXd v(beams);
  for (int i = 0; i < beams; ++i) {
    const double r = reduced.ranges[i];
    v[i] = std::isfinite(r) ? double(float(r)) : max_range;
  }
  return v;
}

ScanMatcher::ScanMatcher(const ScanMatrix& matrix)
    : geometry_(matrix.geometry()),
      max_range_(matrix.max_range()),
      unit_rows_(matrix.ranges().rows(), matrix.ranges().cols()),
      valid_(std::size_t(matrix.ranges().rows()), 0) {
  const auto& ranges = matrix.ranges();
  for (Eigen::Index r = 0; r < ranges.rows(); ++r) {
    if (!matrix.valid(r)) {
      unit_rows_.row(r).setZero();
      continue;
    }
    auto row = unit_rows_.row(r);
    for (Eigen::Index i = 0; i < ranges.cols(); ++i) {
      const float v = ranges(r, i);
      row[i] = std::isfinite(v) ? double(v) : max_range_;
    }
    const double norm = row.norm();
    if (norm > 0.0) {
      row /= norm;
      valid_[std::size_t(r)] = 1;
    }
  }
}

PoseTensor<double> ScanMatcher::score_unit(const Eigen::VectorXd& unit_query) const {
  PoseTensor<double> out(geometry_.headings, geometry_.rows, geometry_.cols);
  out.values().noalias() = unit_rows_ * unit_query;
  auto& v = out.values();
  for (Eigen::Index r = 0; r < v.size(); ++r)
    v[r] = valid_[std::size_t(r)] ? std::clamp(v[r], -1.0, 1.0) : -1.0;
  return out;
}

PoseTensor<double> ScanMatcher::scores(const Scan& scan) const {
  Eigen::VectorXd q = correlation_vector(scan, beams(), max_range_);
  const double norm = q.norm();
  if (norm > 0.0) q /= norm;
  return score_unit(q);
}

PoseTensor<double> ScanMatcher::scores_for_row(Eigen::Index row) const {
  return score_unit(unit_rows_.row(row).transpose());
}

PoseTensor<double> cosine_scores(const ScanMatrix& matrix, const Scan& scan) {
  return ScanMatcher(matrix).scores(scan);
}

LikelihoodGrid tempered_softmax(const PoseTensor<double>& scores, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("temperature must be positive");
  if (!scores.values().allFinite()) throw InputError("non-finite score");
  LikelihoodGrid out;
  out.temperature = beta;
  out.values = scores;
  if (scores.size() == 0) return out;
  auto& v = out.values.values();
  const double peak = v.maxCoeff();
  v = ((v.array() - peak) * beta).exp().matrix();
  v /= v.sum();
  return out;
}

std::vector<Eigen::Index> top_entries(const PoseTensor<double>& values, int count) {
  std::vector<Eigen::Index> idx(std::size_t(values.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  count = std::clamp<int>(count, 0, int(idx.size()));
  const auto& v = values.values();
  std::partial_sort(idx.begin(), idx.begin() + count, idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      if (v[a] != v[b]) return v[a] > v[b];
                      return a < b;
                    });
  idx.resize(std::size_t(count));
  return idx;
}

Raster crop(const Raster& raster, int center_row, int center_col, int side) {
  Raster out = Raster::Zero(side, side);
  const int r0 = center_row - side / 2;
  const int c0 = center_col - side / 2;
  for (int r = 0; r < side; ++r) {
    const int sr = r0 + r;
    if (sr < 0 || sr >= raster.rows()) continue;
    for (int c = 0; c < side; ++c) {
      const int sc = c0 + c;
      if (sc < 0 || sc >= raster.cols()) continue;
      out(r, c) = raster(sr, sc);
    }
  }
  return out;
}

LikelihoodGrid LikelihoodProvider::coarse(const GridMap&, const Scan&) const {
  throw ConfigurationError("provider does not produce coarse likelihoods");
}

Eigen::MatrixXd LikelihoodProvider::fine_block(const BlockQuery&) const {
  throw ConfigurationError("provider does not produce fine likelihood blocks");
}

ScanMatchingProvider::ScanMatchingProvider(std::shared_ptr<const ScanMatrix> matrix, double beta)
    : matrix_(matrix ? std::move(matrix)
                     : throw ConfigurationError("scan matching needs a scan matrix")),
      matcher_(*matrix_),
      beta_(beta) {
  if (!(beta > 0.0)) throw ParameterError("temperature must be positive");
}

LikelihoodGrid ScanMatchingProvider::coarse(const GridMap&, const Scan& scan) const {
  LikelihoodGrid lik = tempered_softmax(matcher_.scores(scan), beta_);
  lik.level = 0;
  return lik;
}

Eigen::MatrixXd FineScanMatchingProvider::fine_block(const BlockQuery& query) const {
  if (query.map == nullptr || query.scan == nullptr) throw ParameterError("incomplete block query");
  const GridMap& map = *query.map;
  const int k = query.k;
  const double pitch = map.geometry.cell_pitch();
  const double sub = pitch / k;
  const double heading = map.geometry.heading_angle(query.cell.heading);
  if (!map.cell_free(query.cell.row, query.cell.col)) return Eigen::MatrixXd::Constant(k, k, 1.0 / (k * k));

  LidarConfig lidar = cfg_.lidar;
  lidar.beams = 360;
  lidar.fov = kTwoPi;
  const double max_range = lidar.max_range;
  Eigen::VectorXd q = correlation_vector(*query.scan, lidar.beams, max_range);
  q.normalize();

  Eigen::MatrixXd scores = Eigen::MatrixXd::Constant(k, k, -1.0);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> scored =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(k, k, false);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double x = query.cell.col * pitch + (j + 0.5) * sub;
      const double y = query.cell.row * pitch + (i + 0.5) * sub;
      if (!map.free_at(x, y)) continue;
      const Scan s = raycast(map, ContinuousPose{x, y, heading}, lidar);
      const Eigen::VectorXd v = correlation_vector(s, lidar.beams, max_range);
      const double norm = v.norm();
      if (norm == 0.0) continue;
      scores(i, j) = std::clamp(v.dot(q) / norm, -1.0, 1.0);
      scored(i, j) = true;
    }
  }
  if (!scored.any()) return Eigen::MatrixXd::Constant(k, k, 1.0 / (k * k));
  const double peak = scores.maxCoeff();
  Eigen::MatrixXd block =
      scored.select(((scores.array() - peak) * cfg_.beta).exp(), 0.0).matrix();
  return block / block.sum();
}

std::shared_ptr<LikelihoodProvider> fine_scan_matching_provider(const GridMap& map,
                                                                const HierarchyConfig& cfg,
                                                                FineMatchConfig fine) {
  cfg.validate(map.geometry.pose_count());
  return std::make_shared<FineScanMatchingProvider>(fine);
}

BlockQuery make_block_query(const GridMap& map, const Scan& scan, const CellPose& cell,
                            const HierarchyConfig& cfg) {
  BlockQuery q;
  q.map = &map;
  q.scan = &scan;
  q.cell = cell;
  q.k = cfg.k;
  const int cr = map.centroid_px_row(cell.row);
  const int cc = map.centroid_px_col(cell.col);
  q.map_crop = crop(map.occupancy, cr, cc, cfg.crop_px);
  const Eigen::Vector2d c = map.centroid(cell.row, cell.col);
  const ScanImage img = scan_to_image_at(
      scan, map, ContinuousPose{c.x(), c.y(), map.geometry.heading_angle(cell.heading)});
  q.scan_crop = crop(img.raster, cr, cc, cfg.crop_px);
  return q;
}

LikelihoodGrid refine_hierarchical(const LikelihoodGrid& coarse, const GridMap& map,
                                   const Scan& scan, const HierarchyConfig& cfg,
                                   const LikelihoodProvider& fine_provider) {
  if (coarse.level != 0) throw ParameterError("refinement expects a level-0 likelihood");
  const auto& cv = coarse.values;
  if (cfg.top_c < 0 || cfg.top_c > cv.size()) throw ParameterError("top_c out of range");
  if (cfg.k < 2) throw ParameterError("k must be at least 2");
  const int k = cfg.k;
  const double inv_k2 = 1.0 / (k * k);

  LikelihoodGrid fine;
  fine.level = 1;
  fine.temperature = coarse.temperature;
  fine.values = PoseTensor<double>(cv.headings(), cv.rows() * k, cv.cols() * k);

  for (int h = 0; h < cv.headings(); ++h) {
    auto src = cv.plane(h);
    auto dst = fine.values.plane(h);
    for (int n = 0; n < cv.rows(); ++n)
      for (int m = 0; m < cv.cols(); ++m)
        dst.block(n * k, m * k, k, k).setConstant(src(n, m) * inv_k2);
  }

  for (const Eigen::Index i : top_entries(cv, cfg.top_c)) {
    const CellPose cell = cv.pose_at(i);
    const BlockQuery q = make_block_query(map, scan, cell, cfg);
    Eigen::MatrixXd block = fine_provider.fine_block(q);
    if (block.rows() != k || block.cols() != k) throw InputError("fine block has wrong shape");
    if (!block.allFinite() || (block.array() < 0.0).any())
      throw InputError("fine block is not a distribution");
    const double total = block.sum();
    block = total > 0.0 ? Eigen::MatrixXd(block / total)
                        : Eigen::MatrixXd::Constant(k, k, inv_k2);
    fine.values.plane(cell.heading).block(cell.row * k, cell.col * k, k, k) =
        block * cv.values()[i];
  }

  const double total = fine.values.sum();
  if (total > 0.0) fine.values.values() /= total;
  return fine;
}

}  // namespace dal
