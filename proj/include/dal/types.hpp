#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dal {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPoseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EpisodeFinishedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Binary occupancy raster, 0 = obstacle, 1 = free. Row-major, row 0 at the top.
using Raster = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Real-valued image (low resolution observations, scan images handed to models).
using Image = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Action : int { Left = 0, Right = 1, Forward = 2 };

inline constexpr std::array<Action, 3> kActions{Action::Left, Action::Right, Action::Forward};

inline const char* to_string(Action a) {
  switch (a) {
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::Forward: return "forward";
  }
  return "?";
}

inline Action action_from_index(int index) {
  if (index < 0 || index > 2) throw ParameterError("action index must be 0, 1 or 2");
  return static_cast<Action>(index);
}

/// Discrete pose on the coarse grid: heading index, row, column.
struct CellPose {
  int heading = 0;
  int row = 0;
  int col = 0;

  auto operator<=>(const CellPose&) const = default;
};

/// Continuous pose in meters. x runs along image columns, y along image rows
/// (downwards). Heading is counter-clockwise as seen on the map, 0 = +x.
struct ContinuousPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a;
}

/// Unit direction of a heading in (x, y) map coordinates.
inline Eigen::Vector2d heading_direction(double heading) {
  return {std::cos(heading), -std::sin(heading)};
}

/// Coarse grid geometry and its binding to the pixel raster.
struct GridGeometry {
  int rows = 11;      // N
  int cols = 11;      // M
  int headings = 4;   // Theta
  int cell_px = 9;    // pixels per coarse cell side
  double resolution = 0.1;  // meters per pixel

  int height_px() const { return rows * cell_px; }
  int width_px() const { return cols * cell_px; }
  double cell_pitch() const { return cell_px * resolution; }
  double heading_step() const { return kTwoPi / headings; }
  double heading_angle(int index) const { return heading_step() * index; }
  Eigen::Index pose_count() const { return Eigen::Index(headings) * rows * cols; }

  /// Throws ParameterError when the geometry is unusable.
  void validate() const;
};

/// Dense Theta x N x M tensor over discrete poses, heading-major.
template <typename Scalar>
class PoseTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  PoseTensor() = default;
  PoseTensor(int headings, int rows, int cols, Scalar fill = Scalar(0))
      : headings_(headings), rows_(rows), cols_(cols),
        values_(Vector::Constant(Eigen::Index(headings) * rows * cols, fill)) {}

  int headings() const { return headings_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Eigen::Index size() const { return values_.size(); }

  Eigen::Index index(int h, int r, int c) const {
    return (Eigen::Index(h) * rows_ + r) * cols_ + c;
  }
  Eigen::Index index(const CellPose& p) const { return index(p.heading, p.row, p.col); }
  CellPose pose_at(Eigen::Index i) const {
    const int c = int(i % cols_);
    const int r = int((i / cols_) % rows_);
    const int h = int(i / (Eigen::Index(cols_) * rows_));
    return {h, r, c};
  }

  Scalar& operator()(int h, int r, int c) { return values_[index(h, r, c)]; }
  Scalar operator()(int h, int r, int c) const { return values_[index(h, r, c)]; }
  Scalar& operator[](const CellPose& p) { return values_[index(p)]; }
  Scalar operator[](const CellPose& p) const { return values_[index(p)]; }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  Eigen::Map<Plane> plane(int h) {
    return Eigen::Map<Plane>(values_.data() + index(h, 0, 0), rows_, cols_);
  }
  Eigen::Map<const Plane> plane(int h) const {
    return Eigen::Map<const Plane>(values_.data() + index(h, 0, 0), rows_, cols_);
  }

  bool same_shape(const PoseTensor& o) const {
    return headings_ == o.headings_ && rows_ == o.rows_ && cols_ == o.cols_;
  }
  Scalar sum() const { return values_.sum(); }

 private:
  int headings_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  Vector values_;
};

}  // namespace dal
