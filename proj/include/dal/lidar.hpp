#pragma once

#include "dal/mapgen.hpp"

#include <filesystem>
#include <limits>
#include <vector>

namespace dal {

inline constexpr double kNoReturn = std::numeric_limits<double>::infinity();

struct LidarConfig {
  int beams = 360;
  double fov = kTwoPi;
  double min_range = 0.15;
  double max_range = 8.0;

  bool full_circle() const { return std::abs(fov - kTwoPi) < 1e-9; }
};

/// One revolution of range readings. Beam angles are relative to the robot
/// heading: i * fov / B for a full circle, otherwise centered on the heading.
struct Scan {
  Eigen::VectorXd ranges;
  double fov = kTwoPi;
  double min_range = 0.15;
  double max_range = 8.0;

  int beams() const { return int(ranges.size()); }
  bool full_circle() const { return std::abs(fov - kTwoPi) < 1e-9; }
  double beam_angle(int i) const;
};

/// Ray casts every beam from `pose` with a grid traversal over pixels. A beam
/// stops at the first obstacle pixel and reports the distance to the pixel
/// boundary it crossed. Misses beyond max_range are +inf.
Scan raycast(const GridMap& map, const ContinuousPose& pose, const LidarConfig& lidar = {});
Scan raycast(const GridMap& map, const ContinuousPose& pose, int beams, double fov,
             double min_range, double max_range);

/// Distance in meters along (cos a, -sin a) to the first obstacle boundary, or
/// +inf past max_range. The start pixel is not tested when ignore_start is set.
double cast_ray(const GridMap& map, double x, double y, double angle, double max_range,
                bool ignore_start = false);

struct ScanNoise {
  double sigma = 0.0;          // meters
  double dropout_prob = 0.0;
  double rot_jitter_deg = 0.0;

  bool none() const { return sigma == 0.0 && dropout_prob == 0.0 && rot_jitter_deg == 0.0; }
};

/// Circular beam shift within +-rot_jitter (whole beams), Gaussian range noise
/// re-clamped to the sensor limits, then independent dropout to +inf.
Scan corrupt_scan(const Scan& scan, double sigma, double dropout_prob, double rot_jitter_deg,
                  std::uint64_t seed);
inline Scan corrupt_scan(const Scan& scan, const ScanNoise& noise, std::uint64_t seed) {
  return corrupt_scan(scan, noise.sigma, noise.dropout_prob, noise.rot_jitter_deg, seed);
}

/// Nearest-angle resampling onto a full circle of `beams` beams. Directions
/// outside the source field of view read +inf.
Scan reduce_scan(const Scan& scan, int beams);

struct ScanImage {
  enum class Frame { RobotCentric, MapAtHypothesis };
  Raster raster;
  Frame frame = Frame::RobotCentric;

  int nonzero() const { return int(raster.cast<int>().sum()); }
};

/// Beam endpoints drawn as 1-pixels on a zero image of the map's size with the
/// robot at the image center facing +x (columns).
ScanImage scan_to_image(const Scan& scan, const GridGeometry& geometry, double resolution);

/// Beam endpoints drawn in the map frame as if the robot stood at `pose`.
ScanImage scan_to_image_at(const Scan& scan, const GridMap& map, const ContinuousPose& pose);

/// Precomputed range vectors at every coarse centroid and heading. Obstacle
/// cells hold an all-zero row and are flagged invalid.
class ScanMatrix {
 public:
  using Storage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  ScanMatrix() = default;
  ScanMatrix(const GridGeometry& geometry, int beams, double min_range, double max_range);

  const GridGeometry& geometry() const { return geometry_; }
  int beams() const { return int(ranges_.cols()); }
  double min_range() const { return min_range_; }
  double max_range() const { return max_range_; }

  Eigen::Index row_index(const CellPose& p) const {
    return (Eigen::Index(p.heading) * geometry_.rows + p.row) * geometry_.cols + p.col;
  }
  auto row(const CellPose& p) const { return ranges_.row(row_index(p)); }
  auto row(const CellPose& p) { return ranges_.row(row_index(p)); }
  bool valid(const CellPose& p) const { return valid_[std::size_t(row_index(p))] != 0; }
  bool valid(Eigen::Index row) const { return valid_[std::size_t(row)] != 0; }
  void set_valid(const CellPose& p, bool v) { set_valid(row_index(p), v); }
  void set_valid(Eigen::Index row, bool v) { valid_[std::size_t(row)] = v ? 1 : 0; }

  /// Stored row as a scan (+inf kept).
  Scan scan_at(const CellPose& p) const;

  const Storage& ranges() const { return ranges_; }
  Storage& ranges() { return ranges_; }
  int valid_count() const;

 private:
  GridGeometry geometry_;
  double min_range_ = 0.15;
  double max_range_ = 8.0;
  Storage ranges_;
  std::vector<std::uint8_t> valid_;
};

ScanMatrix build_scan_matrix(const GridMap& map, const LidarConfig& lidar = {});

/// Cache file: "DALSCNMX", u32 version, u32 Theta, N, M, B, then float32
/// little-endian row-major ranges. Geometry pixel fields come from `geometry`.
void write_scan_matrix(const ScanMatrix& matrix, const std::filesystem::path& path);
ScanMatrix read_scan_matrix(const std::filesystem::path& path, const GridGeometry& geometry,
                            const LidarConfig& lidar = {});

}  // namespace dal
