#include "dal/lidar.hpp"

#include "dal/rng.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dal {

namespace {

constexpr double kAlignTol = 1e-9;

/// Index of the first beam on the canonical full-circle lattice when the
/// heading is aligned with it, -1 otherwise.
long aligned_beam_offset(double heading, int beams) {
  const double k = wrap_angle(heading) / (kTwoPi / beams);
  const double rounded = std::round(k);
  if (std::abs(k - rounded) > kAlignTol) return -1;
  return long(rounded) % beams;
}

double lattice_angle(long index, int beams) { return kTwoPi * double(index) / double(beams); }

Scan make_scan(const LidarConfig& lidar) {
  Scan s;
  s.ranges = Eigen::VectorXd::Constant(lidar.beams, kNoReturn);
  s.fov = lidar.fov;
  s.min_range = lidar.min_range;
  s.max_range = lidar.max_range;
  return s;
}

Scan cast_all(const GridMap& map, double x, double y, double heading, const LidarConfig& lidar,
              bool ignore_start) {
  Scan scan = make_scan(lidar);
  const long offset = lidar.full_circle() ? aligned_beam_offset(heading, lidar.beams) : -1;
  for (int i = 0; i < lidar.beams; ++i) {
    const double angle = offset >= 0 ? lattice_angle((offset + i) % lidar.beams, lidar.beams)
                                     : heading + scan.beam_angle(i);
    double d = cast_ray(map, x, y, angle, lidar.max_range, ignore_start);
    if (std::isfinite(d)) d = std::max(d, lidar.min_range);
    scan.ranges[i] = d;
  }
  return scan;
}

}  // namespace

double Scan::beam_angle(int i) const {
  const int b = beams();
  if (full_circle()) return kTwoPi * double(i) / double(b);
  return -0.5 * fov + fov * double(i) / double(b);
}

double cast_ray(const GridMap& map, double x, double y, double angle, double max_range,
                bool ignore_start) {
  const double res = map.geometry.resolution;
  const double u = x / res;
  const double v = y / res;
  double dx = std::cos(angle);
  double dy = -std::sin(angle);
  if (std::abs(dx) < 1e-12) dx = 0.0;
  if (std::abs(dy) < 1e-12) dy = 0.0;

  int col = int(std::floor(u));
  int row = int(std::floor(v));
  if (!ignore_start && !map.free_px(row, col))
    throw InvalidPoseError("ray origin lies inside an obstacle");

  const int step_c = dx > 0 ? 1 : -1;
  const int step_r = dy > 0 ? 1 : -1;
  constexpr double inf = std::numeric_limits<double>::infinity();
  double t_max_c = dx == 0.0 ? inf : (dx > 0 ? (col + 1 - u) / dx : (u - col) / -dx);
  double t_max_r = dy == 0.0 ? inf : (dy > 0 ? (row + 1 - v) / dy : (v - row) / -dy);
  const double t_delta_c = dx == 0.0 ? inf : 1.0 / std::abs(dx);
  const double t_delta_r = dy == 0.0 ? inf : 1.0 / std::abs(dy);
  const double t_limit = max_range / res;

  while (true) {
    double t;
    if (t_max_c < t_max_r) {
      t = t_max_c;
      col += step_c;
      t_max_c += t_delta_c;
    } else {
      t = t_max_r;
      row += step_r;
      t_max_r += t_delta_r;
    }
    if (t > t_limit) return kNoReturn;
    if (!map.free_px(row, col)) return t * res;
  }
}

Scan raycast(const GridMap& map, const ContinuousPose& pose, const LidarConfig& lidar) {
  if (lidar.beams < 1) throw ParameterError("beam count must be positive");
  if (!map.free_at(pose.x, pose.y)) throw InvalidPoseError("pose lies inside an obstacle");
  return cast_all(map, pose.x, pose.y, pose.heading, lidar, false);
}

Scan raycast(const GridMap& map, const ContinuousPose& pose, int beams, double fov,
             double min_range, double max_range) {
  return raycast(map, pose, LidarConfig{beams, fov, min_range, max_range});
}

Scan corrupt_scan(const Scan& scan, double sigma, double dropout_prob, double rot_jitter_deg,
                  std::uint64_t seed) {
  if (sigma < 0.0) throw ParameterError("sigma must be non-negative");
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0))
    throw ParameterError("dropout probability must lie in [0, 1]");
  Scan out = scan;
  const int b = scan.beams();
  if (b == 0) return out;
  Rng rng = make_rng(seed);

  const double beam_deg = scan.fov * 180.0 / std::numbers::pi / b;
  const int max_shift = int(std::floor(std::abs(rot_jitter_deg) / beam_deg + 1e-9));
  if (max_shift > 0) {
    const int shift = std::uniform_int_distribution<int>(-max_shift, max_shift)(rng);
    for (int i = 0; i < b; ++i) out.ranges[i] = scan.ranges[((i + shift) % b + b) % b];
  }
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (int i = 0; i < b; ++i) {
      const double e = noise(rng);
      if (std::isfinite(out.ranges[i]))
        out.ranges[i] = std::clamp(out.ranges[i] + e, scan.min_range, scan.max_range);
    }
  }
  if (dropout_prob > 0.0) {
    std::bernoulli_distribution drop(dropout_prob);
    for (int i = 0; i < b; ++i)
      if (drop(rng)) out.ranges[i] = kNoReturn;
  }
  return out;
}

Scan reduce_scan(const Scan& scan, int beams) {
  if (beams < 1) throw ParameterError("beam count must be positive");
  if (scan.full_circle() && scan.beams() == beams) return scan;
  Scan out;
  out.fov = kTwoPi;
  out.min_range = scan.min_range;
  out.max_range = scan.max_range;
  out.ranges = Eigen::VectorXd::Constant(beams, kNoReturn);
  const int src = scan.beams();
  if (src == 0) return out;
  const double spacing = scan.fov / src;
  for (int j = 0; j < beams; ++j) {
    const double target = kTwoPi * j / beams;
    if (scan.full_circle()) {
      const long i = std::lround(target / spacing) % src;
      out.ranges[j] = scan.ranges[i];
      continue;
    }
    const double rel = wrap_angle(target + 0.5 * scan.fov);  // 0 at the first beam
    long i = std::lround(rel / spacing);
    if (rel > kTwoPi - 0.5 * spacing) i = 0;
    if (i > src - 1) continue;
    out.ranges[j] = scan.ranges[i];
  }
  return out;
}

ScanImage scan_to_image(const Scan& scan, const GridGeometry& geometry, double resolution) {
  ScanImage img;
  img.frame = ScanImage::Frame::RobotCentric;
  img.raster = Raster::Zero(geometry.height_px(), geometry.width_px());
  const int cr = geometry.height_px() / 2;
  const int cc = geometry.width_px() / 2;
  for (int i = 0; i < scan.beams(); ++i) {
    const double d = scan.ranges[i];
    if (!std::isfinite(d)) continue;
    const double a = scan.beam_angle(i);
    const long r = cr + std::lround(-d * std::sin(a) / resolution);
    const long c = cc + std::lround(d * std::cos(a) / resolution);
    if (r < 0 || c < 0 || r >= img.raster.rows() || c >= img.raster.cols()) continue;
    img.raster(r, c) = 1;
  }
  return img;
}

ScanImage scan_to_image_at(const Scan& scan, const GridMap& map, const ContinuousPose& pose) {
  ScanImage img;
  img.frame = ScanImage::Frame::MapAtHypothesis;
  img.raster = Raster::Zero(map.height(), map.width());
  const double res = map.geometry.resolution;
  for (int i = 0; i < scan.beams(); ++i) {
    const double d = scan.ranges[i];
    if (!std::isfinite(d)) continue;
    const double a = pose.heading + scan.beam_angle(i);
    const double x = pose.x + d * std::cos(a);
    const double y = pose.y - d * std::sin(a);
    const long r = long(std::floor(y / res));
    const long c = long(std::floor(x / res));
    if (r < 0 || c < 0 || r >= img.raster.rows() || c >= img.raster.cols()) continue;
    img.raster(r, c) = 1;
  }
  return img;
}

ScanMatrix::ScanMatrix(const GridGeometry& geometry, int beams, double min_range, double max_range)
    : geometry_(geometry),
      min_range_(min_range),
      max_range_(max_range),
      ranges_(Storage::Zero(geometry.pose_count(), beams)),
      valid_(std::size_t(geometry.pose_count()), 0) {}

Scan ScanMatrix::scan_at(const CellPose& p) const {
  Scan s;
  s.fov = kTwoPi;
  s.min_range = min_range_;
  s.max_range = max_range_;
  s.ranges = row(p).transpose().cast<double>();
  return s;
}

int ScanMatrix::valid_count() const {
  int n = 0;
  for (auto v : valid_) n += v;
  return n;
}

ScanMatrix build_scan_matrix(const GridMap& map, const LidarConfig& lidar) {
  map.validate();
  if (!lidar.full_circle()) throw ParameterError("scan matrix requires a full-circle sensor");
  const auto& g = map.geometry;
  const int b = lidar.beams;
  ScanMatrix matrix(g, b, lidar.min_range, lidar.max_range);
  const bool shiftable = b % g.headings == 0;
  const int shift_per_heading = shiftable ? b / g.headings : 0;

  for (int n = 0; n < g.rows; ++n) {
    for (int m = 0; m < g.cols; ++m) {
      if (!map.cell_free(n, m)) continue;
      const Eigen::Vector2d c = map.centroid(n, m);
      if (shiftable) {
        const Scan base = cast_all(map, c.x(), c.y(), 0.0, lidar, true);
        for (int h = 0; h < g.headings; ++h) {
          const CellPose p{h, n, m};
          auto row = matrix.row(p);
          for (int i = 0; i < b; ++i)
            row[i] = float(base.ranges[(i + h * shift_per_heading) % b]);
          matrix.set_valid(p, true);
        }
      } else {
        for (int h = 0; h < g.headings; ++h) {
          const CellPose p{h, n, m};
          const Scan s = cast_all(map, c.x(), c.y(), g.heading_angle(h), lidar, true);
          matrix.row(p) = s.ranges.transpose().cast<float>();
          matrix.set_valid(p, true);
        }
      }
    }
  }
  return matrix;
}

namespace {

constexpr char kMagic[8] = {'D', 'A', 'L', 'S', 'C', 'N', 'M', 'X'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {std::uint8_t(v), std::uint8_t(v >> 8), std::uint8_t(v >> 16),
                              std::uint8_t(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

}  // namespace

void write_scan_matrix(const ScanMatrix& matrix, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  const auto& g = matrix.geometry();
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, std::uint32_t(g.headings));
  put_u32(out, std::uint32_t(g.rows));
  put_u32(out, std::uint32_t(g.cols));
  put_u32(out, std::uint32_t(matrix.beams()));
  out.write(reinterpret_cast<const char*>(matrix.ranges().data()),
            std::streamsize(matrix.ranges().size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

ScanMatrix read_scan_matrix(const std::filesystem::path& path, const GridGeometry& geometry,
                            const LidarConfig& lidar) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapError("cannot open " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw MapError("not a scan matrix file");
  if (get_u32(in) != kVersion) throw MapError("unsupported scan matrix version");
  GridGeometry g = geometry;
  g.headings = int(get_u32(in));
  g.rows = int(get_u32(in));
  g.cols = int(get_u32(in));
  const int beams = int(get_u32(in));
  if (g.headings != geometry.headings || g.rows != geometry.rows || g.cols != geometry.cols)
    throw MapError("scan matrix geometry does not match the map");
  ScanMatrix matrix(g, beams, lidar.min_range, lidar.max_range);
  in.read(reinterpret_cast<char*>(matrix.ranges().data()),
          std::streamsize(matrix.ranges().size() * sizeof(float)));
  if (!in) throw MapError("truncated scan matrix payload");
  for (Eigen::Index r = 0; r < matrix.ranges().rows(); ++r)
    matrix.set_valid(r, !(matrix.ranges().row(r).array() == 0.0f).all());
  return matrix;
}

}  // namespace dal
