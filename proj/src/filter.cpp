#include "dal/filter.hpp"

#include <array>

namespace dal {

namespace {

using FreeMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

FreeMask free_mask(const GridMap& map) {
  const auto& g = map.geometry;
  FreeMask mask(g.rows, g.cols);
  for (int n = 0; n < g.rows; ++n)
    for (int m = 0; m < g.cols; ++m) mask(n, m) = map.cell_free(n, m);
  return mask;
}

constexpr int kTaps = 2;  // offsets -2..2

std::array<double, 2 * kTaps + 1> gaussian_taps(double sigma) {
  std::array<double, 2 * kTaps + 1> w{};
  if (!(sigma > 0.0)) {
    w[kTaps] = 1.0;
    return w;
  }
  double total = 0.0;
  for (int d = -kTaps; d <= kTaps; ++d) {
    w[d + kTaps] = std::exp(-0.5 * d * d / (sigma * sigma));
    total += w[d + kTaps];
  }
  for (auto& x : w) x /= total;
  return w;
}

void smooth_headings(PoseTensor<double>& t, double sigma) {
  if (!(sigma > 0.0)) return;
  const auto w = gaussian_taps(sigma);
  const int headings = t.headings();
  PoseTensor<double> out(headings, t.rows(), t.cols());
  for (int h = 0; h < headings; ++h)
    for (int d = -kTaps; d <= kTaps; ++d)
      out.plane(((h + d) % headings + headings) % headings) += w[d + kTaps] * t.plane(h);
  t = std::move(out);
}

/// Scatters each free cell's mass along one axis over the in-bounds free
/// targets, renormalizing the truncated kernel so no mass is lost.
void smooth_axis(PoseTensor<double>& t, const FreeMask& free, double sigma, bool along_rows) {
  if (!(sigma > 0.0)) return;
  const auto w = gaussian_taps(sigma);
  const int rows = t.rows();
  const int cols = t.cols();
  for (int h = 0; h < t.headings(); ++h) {
    auto plane = t.plane(h);
    const PoseTensor<double>::Plane src = plane;
    plane.setZero();
    for (int n = 0; n < rows; ++n) {
      for (int m = 0; m < cols; ++m) {
        const double mass = src(n, m);
        if (mass == 0.0) continue;
        double norm = 0.0;
        for (int d = -kTaps; d <= kTaps; ++d) {
          const int tn = along_rows ? n + d : n;
          const int tm = along_rows ? m : m + d;
          if (tn < 0 || tm < 0 || tn >= rows || tm >= cols || !free(tn, tm)) continue;
          norm += w[d + kTaps];
        }
        if (norm == 0.0) {
          plane(n, m) += mass;
          continue;
        }
        for (int d = -kTaps; d <= kTaps; ++d) {
          const int tn = along_rows ? n + d : n;
          const int tm = along_rows ? m : m + d;
          if (tn < 0 || tm < 0 || tn >= rows || tm >= cols || !free(tn, tm)) continue;
          plane(tn, tm) += mass * w[d + kTaps] / norm;
        }
      }
    }
  }
}

void mask_with(PoseTensor<double>& t, const FreeMask& free) {
  for (int h = 0; h < t.headings(); ++h) {
    auto plane = t.plane(h);
    for (int n = 0; n < t.rows(); ++n)
      for (int m = 0; m < t.cols(); ++m)
        if (!free(n, m)) plane(n, m) = 0.0;
  }
}

void normalize(PoseTensor<double>& t) {
  const double total = t.sum();
  if (total > 0.0) t.values() /= total;
}

void check_shape(const PoseTensor<double>& t, const GridMap& map) {
  const auto& g = map.geometry;
  if (t.headings() != g.headings || t.rows() != g.rows || t.cols() != g.cols)
    throw ParameterError("belief shape does not match the map geometry");
}

}  // namespace

BeliefGrid uniform_belief(const GridMap& map) {
  const auto& g = map.geometry;
  const FreeMask free = free_mask(map);
  const auto count = free.count();
  if (count == 0) throw MapError("map has no free cells");
  BeliefGrid b;
  b.values = PoseTensor<double>(g.headings, g.rows, g.cols);
  const double p = 1.0 / (double(count) * g.headings);
  for (int h = 0; h < g.headings; ++h)
    b.values.plane(h) = free.cast<double>().matrix() * p;
  return b;
}

std::pair<int, int> forward_offset(const GridGeometry& geometry, int heading) {
  constexpr double kAxisThreshold = 0.3826834323650898;  // sin(22.5 deg)
  const double a = geometry.heading_angle(heading);
  const double c = std::cos(a);
  const double s = -std::sin(a);
  auto sign = [&](double v) { return v > kAxisThreshold + 1e-9 ? 1 : (v < -kAxisThreshold - 1e-9 ? -1 : 0); };
  return {sign(s), sign(c)};
}

bool forward_blocked(const GridMap& map, const CellPose& pose) {
  const auto [dr, dc] = forward_offset(map.geometry, pose.heading);
  return !map.cell_free(pose.row + dr, pose.col + dc);
}

CellPose next_pose(const GridMap& map, const CellPose& pose, Action action) {
  const int headings = map.geometry.headings;
  CellPose out = pose;
  switch (action) {
    case Action::Left: out.heading = (pose.heading + 1) % headings; break;
    case Action::Right: out.heading = (pose.heading + headings - 1) % headings; break;
    case Action::Forward:
      if (!forward_blocked(map, pose)) {
        const auto [dr, dc] = forward_offset(map.geometry, pose.heading);
        out.row += dr;
        out.col += dc;
      }
      break;
  }
  return out;
}

BeliefGrid transition(const BeliefGrid& belief, Action action, const MotionNoise& noise,
                      const GridMap& map) {
  check_shape(belief.values, map);
  const auto& src = belief.values;
  const int headings = src.headings();
  const FreeMask free = free_mask(map);

  BeliefGrid out;
  out.level = belief.level;
  out.values = PoseTensor<double>(headings, src.rows(), src.cols());
  auto& dst = out.values;

  switch (action) {
    case Action::Left:
      for (int h = 0; h < headings; ++h) dst.plane((h + 1) % headings) = src.plane(h);
      break;
    case Action::Right:
      for (int h = 0; h < headings; ++h) dst.plane((h + headings - 1) % headings) = src.plane(h);
      break;
    case Action::Forward: {
      const double moved = 1.0 - std::clamp(noise.forward_slip, 0.0, 1.0);
      for (int h = 0; h < headings; ++h) {
        const auto [dr, dc] = forward_offset(map.geometry, h);
        auto in = src.plane(h);
        auto res = dst.plane(h);
        for (int n = 0; n < src.rows(); ++n) {
          for (int m = 0; m < src.cols(); ++m) {
            const double mass = in(n, m);
            if (mass == 0.0) continue;
            const int tn = n + dr;
            const int tm = m + dc;
            const bool open = tn >= 0 && tm >= 0 && tn < src.rows() && tm < src.cols() &&
                              free(tn, tm);
            if (!open) {
              res(n, m) += mass;
              continue;
            }
            res(tn, tm) += mass * moved;
            res(n, m) += mass * (1.0 - moved);
          }
        }
      }
      break;
    }
  }

  smooth_headings(dst, noise.heading_sigma);
  mask_with(dst, free);
  smooth_axis(dst, free, noise.row_sigma, true);
  smooth_axis(dst, free, noise.col_sigma, false);
  mask_with(dst, free);
  normalize(dst);
  return out;
}

UpdateResult measurement_update(const BeliefGrid& prior, const LikelihoodGrid& likelihood) {
  if (!prior.values.same_shape(likelihood.values))
    throw ParameterError("likelihood shape does not match the belief");
  UpdateResult r;
  r.belief.level = prior.level;
  r.belief.values = prior.values;
  r.belief.values.values().array() *= likelihood.values.values().array();
  const double total = r.belief.values.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    r.belief = prior;
    r.degenerate = true;
    return r;
  }
  r.belief.values.values() /= total;
  return r;
}

UpdateResult measurement_update(const BeliefGrid& prior, const LikelihoodGrid& likelihood,
                                const GridMap& map) {
  check_shape(prior.values, map);
  if (!prior.values.same_shape(likelihood.values))
    throw ParameterError("likelihood shape does not match the belief");
  BeliefGrid masked = prior;
  masked.values.values().array() *= likelihood.values.values().array();
  mask_with(masked.values, free_mask(map));
  const double total = masked.values.sum();
  if (!(total > 0.0) || !std::isfinite(total)) return {prior, true};
  masked.values.values() /= total;
  return {std::move(masked), false};
}

CellPose map_estimate(const BeliefGrid& belief) {
  const auto& v = belief.values.values();
  if (v.size() == 0) throw ParameterError("empty belief");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return belief.values.pose_at(best);
}

double entropy(const Eigen::Ref<const Eigen::VectorXd>& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

double entropy(const BeliefGrid& belief) { return entropy(belief.values.values()); }

void mask_obstacles(PoseTensor<double>& values, const GridMap& map) {
  check_shape(values, map);
  mask_with(values, free_mask(map));
}

}  // namespace dal
