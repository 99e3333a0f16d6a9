#include "dal/benchmark.hpp"

#include "dal/policy.hpp"

#include <chrono>
#include <iomanip>
#include <ostream>

namespace dal {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::vector<BenchRow> run_benchmark(const std::vector<BenchGrid>& grids, const BenchConfig& cfg) {
  if (cfg.reps < 1) throw ParameterError("reps must be at least 1");
  std::vector<BenchRow> rows;
  for (std::size_t gi = 0; gi < grids.size(); ++gi) {
    const BenchGrid& bg = grids[gi];
    const GridGeometry geometry{bg.rows, bg.cols, bg.headings, cfg.cell_px, cfg.resolution};
    const GridMap map = generate_map(geometry, 0.1, TextureConfig::noise_free(),
                                     derive_seed(cfg.seed, {gi}));
    auto matrix = std::make_shared<const ScanMatrix>(build_scan_matrix(map));
    const ScanMatchingProvider sm(matrix, 40.0);

    CellPose pose{0, 1, 1};
    const Eigen::Vector2d c = map.centroid(pose.row, pose.col);
    const Scan scan = raycast(map, {c.x(), c.y(), 0.0});

    BenchRow row;
    row.grid = bg;
    row.reps = cfg.reps;
    double sink = sm.coarse(map, scan).values.sum();  // warm-up
    const auto t0 = Clock::now();
    for (int r = 0; r < cfg.reps; ++r) sink += sm.coarse(map, scan).values.sum();
    row.sm_seconds = seconds_since(t0) / cfg.reps;

    if (cfg.aml_reps > 0) {
      const UpdateResult post = measurement_update(uniform_belief(map), sm.coarse(map, scan), map);
      const AmlPolicy aml(LookaheadConfig{16, 40.0, MotionNoise{}, matrix});
      const Image lr_map = Image::Zero(bg.rows, bg.cols);
      const PolicyInput input{post.belief, map, lr_map, lr_map};
      const auto t1 = Clock::now();
      for (int r = 0; r < cfg.aml_reps; ++r) sink += aml.distribution(input)[0];
      row.aml_seconds = seconds_since(t1) / cfg.aml_reps;
    }
    if (!std::isfinite(sink)) throw std::logic_error("non-finite benchmark result");
    rows.push_back(row);
  }
  return rows;
}

void write_benchmark_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
  out << "theta,n,m,reps,sm_seconds,aml_seconds\n" << std::setprecision(6);
  for (const auto& r : rows)
    out << r.grid.headings << ',' << r.grid.rows << ',' << r.grid.cols << ',' << r.reps << ','
        << r.sm_seconds << ',' << r.aml_seconds << '\n';
}

}  // namespace dal
