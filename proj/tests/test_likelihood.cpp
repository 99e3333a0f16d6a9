#include "fixtures.hpp"

#include <catch_amalgamated.hpp>

using namespace dal;
using Catch::Approx;

namespace {

Scan full_scan(std::initializer_list<double> ranges) {
  Scan s;
  s.ranges = Eigen::VectorXd(Eigen::Index(ranges.size()));
  Eigen::Index i = 0;
  for (double r : ranges) s.ranges[i++] = r;
  return s;
}

class ConstantBlock final : public LikelihoodProvider {
 public:
  Eigen::MatrixXd fine_block(const BlockQuery& q) const override {
    return Eigen::MatrixXd::Constant(q.k, q.k, 1.0 / (q.k * q.k));
  }
};

}  // namespace

TEST_CASE("cosine scores on hand-built vectors") {
  ScanMatrix matrix(GridGeometry{1, 2, 1, 1, 1.0}, 4, 0.15, 8.0);
  matrix.row(CellPose{0, 0, 0}) << 3, 3, 3, 3;
  matrix.row(CellPose{0, 0, 1}) << 1, 3, 1, 3;
  matrix.set_valid(CellPose{0, 0, 0}, true);
  matrix.set_valid(CellPose{0, 0, 1}, true);
  const auto s = cosine_scores(matrix, full_scan({3, 3, 3, 3}));
  REQUIRE(s(0, 0, 0) == Approx(1.0).margin(1e-12));
  REQUIRE(s(0, 0, 1) == Approx(24.0 / (6.0 * std::sqrt(20.0))).margin(1e-12));
  REQUIRE(s(0, 0, 1) == Approx(0.894).margin(5e-4));
}

TEST_CASE("cosine scores: max range rows and invalid cells") {
  ScanMatrix matrix(GridGeometry{1, 3, 1, 1, 1.0}, 4, 0.15, 8.0);
  matrix.row(CellPose{0, 0, 0}).setConstant(std::numeric_limits<float>::infinity());
  matrix.row(CellPose{0, 0, 1}) << 1, 2, 3, 4;
  matrix.set_valid(CellPose{0, 0, 0}, true);
  matrix.set_valid(CellPose{0, 0, 1}, true);
  const auto s = cosine_scores(matrix, full_scan({kNoReturn, 8.0, kNoReturn, 8.0}));
  REQUIRE(s(0, 0, 0) == Approx(1.0).margin(1e-12));
  REQUIRE(s(0, 0, 2) == -1.0);
}

TEST_CASE("stored row scores one and is the maximum") {
  const GridMap map = generate_map(GridGeometry{11, 11, 4, 9, 0.1}, 0.1, TextureConfig{}, 6);
  const ScanMatrix matrix = build_scan_matrix(map);
  const CellPose p{2, 3, 5};
  REQUIRE(map.cell_free(3, 5));
  const auto s = cosine_scores(matrix, matrix.scan_at(p));
  REQUIRE(s[p] == Approx(1.0).margin(1e-12));
  REQUIRE(s.values().maxCoeff() <= 1.0);
  const ScanMatcher matcher(matrix);
  const auto by_row = matcher.scores_for_row(matrix.row_index(p));
  REQUIRE((by_row.values() - s.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cosine scores are invariant to query scaling") {
  const GridMap map = generate_map(GridGeometry{11, 11, 4, 9, 0.1}, 0.1, TextureConfig{}, 6);
  const ScanMatrix matrix = build_scan_matrix(map);
  const Eigen::Vector2d c = map.centroid(1, 1);
  Scan scan = raycast(map, ContinuousPose{c.x() + 0.1, c.y(), 0.2});
  const auto a = cosine_scores(matrix, scan);
  scan.ranges *= 2.0;
  const auto b = cosine_scores(matrix, scan);
  REQUIRE((a.values() - b.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tempered softmax examples") {
  PoseTensor<double> uniform(2, 2, 3, 0.4);
  const auto u = tempered_softmax(uniform, 7.0);
  REQUIRE((u.values.values().array() - 1.0 / 12.0).abs().maxCoeff() < 1e-15);

  PoseTensor<double> two(1, 1, 2);
  two(0, 0, 1) = std::log(2.0);
  const auto t = tempered_softmax(two, 1.0);
  REQUIRE(t.values(0, 0, 0) == Approx(1.0 / 3.0).margin(1e-12));
  REQUIRE(t.values(0, 0, 1) == Approx(2.0 / 3.0).margin(1e-12));
  REQUIRE(t.temperature == 1.0);

  PoseTensor<double> distinct(1, 1, 4);
  distinct.values() << 0.0, 0.5, 0.9, 1.0;
  REQUIRE(tempered_softmax(distinct, 1000.0).values(0, 0, 3) >= 0.999);

  REQUIRE_THROWS_AS(tempered_softmax(distinct, 0.0), ParameterError);
  distinct(0, 0, 1) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(tempered_softmax(distinct, 1.0), InputError);
}

TEST_CASE("tempered softmax preserves the argmax") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    PoseTensor<double> s(4, 5, 5);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.values()[i] = u(rng);
    Eigen::Index expected = 0;
    s.values().maxCoeff(&expected);
    for (const double beta : {0.1, 1.0, 10.0, 1000.0}) {
      const auto lik = tempered_softmax(s, beta);
      REQUIRE(lik.values.sum() == Approx(1.0).margin(1e-12));
      Eigen::Index got = 0;
      lik.values.values().maxCoeff(&got);
      REQUIRE(got == expected);
    }
  }
}

TEST_CASE("top entries break ties by index") {
  PoseTensor<double> v(1, 1, 5);
  v.values() << 0.2, 0.5, 0.5, 0.1, 0.5;
  REQUIRE(top_entries(v, 3) == std::vector<Eigen::Index>{1, 2, 4});
  REQUIRE(top_entries(v, 0).empty());
  REQUIRE(top_entries(v, 9).size() == 5);
}

TEST_CASE("crop pads with zeros") {
  Raster r = Raster::Ones(5, 5);
  const Raster c = crop(r, 0, 0, 3);
  REQUIRE(c(0, 0) == 0);
  REQUIRE(c(1, 1) == 1);
  REQUIRE(c.cast<int>().sum() == 4);
}

TEST_CASE("refinement of a uniform coarse grid without refined cells") {
  const GridMap map = fixtures::ascii_map({"####", "#..#", "#..#", "####"});
  LikelihoodGrid coarse;
  coarse.values = PoseTensor<double>(4, 4, 4, 1.0 / 64.0);
  const Scan scan = raycast(map, ContinuousPose{1.35, 1.35, 0.0});
  HierarchyConfig cfg;
  cfg.top_c = 0;
  const auto fine = refine_hierarchical(coarse, map, scan, cfg, ConstantBlock{});
  REQUIRE(fine.level == 1);
  REQUIRE(fine.values.rows() == 12);
  REQUIRE((fine.values.values().array() - 1.0 / (64.0 * 9.0)).abs().maxCoeff() < 1e-15);
}

TEST_CASE("refinement of a one-hot coarse grid") {
  const GridMap map = fixtures::ascii_map({"####", "#..#", "#..#", "####"});
  LikelihoodGrid coarse;
  coarse.values = PoseTensor<double>(4, 4, 4);
  coarse.values(1, 2, 1) = 1.0;
  const Scan scan = raycast(map, ContinuousPose{1.35, 1.35, 0.0});
  HierarchyConfig cfg;
  cfg.top_c = 1;
  const auto fine = refine_hierarchical(coarse, map, scan, cfg, ConstantBlock{});
  const auto block = fine.values.plane(1).block(6, 3, 3, 3);
  REQUIRE((block.array() - 1.0 / 9.0).abs().maxCoeff() < 1e-15);
  REQUIRE(fine.values.sum() == Approx(1.0).margin(1e-15));
}

TEST_CASE("refinement conserves mass and keeps non-refined block sums") {
  const GridMap map = fixtures::ascii_map({"####", "#..#", "#..#", "####"});
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LikelihoodGrid coarse;
  coarse.values = PoseTensor<double>(4, 4, 4);
  for (Eigen::Index i = 0; i < coarse.values.size(); ++i) coarse.values.values()[i] = u(rng);
  coarse.values.values() /= coarse.values.sum();

  const Eigen::Vector2d c = map.centroid(1, 2);
  const Scan scan = raycast(map, ContinuousPose{c.x() - 0.2, c.y() + 0.1, 0.0});
  HierarchyConfig cfg;
  cfg.top_c = 2;
  cfg.k = 3;
  const auto fine_provider = fine_scan_matching_provider(map, cfg);
  const auto fine = refine_hierarchical(coarse, map, scan, cfg, *fine_provider);
  REQUIRE(fine.values.sum() == Approx(1.0).margin(1e-9));

  const auto refined = top_entries(coarse.values, 2);
  for (Eigen::Index i = 0; i < coarse.values.size(); ++i) {
    const CellPose p = coarse.values.pose_at(i);
    const double block = fine.values.plane(p.heading).block(p.row * 3, p.col * 3, 3, 3).sum();
    REQUIRE(block == Approx(coarse.values.values()[i]).margin(1e-9));
    if (std::find(refined.begin(), refined.end(), i) == refined.end()) {
      const double first = fine.values.plane(p.heading)(p.row * 3, p.col * 3);
      REQUIRE(first == Approx(coarse.values.values()[i] / 9.0).margin(1e-12));
    }
  }
}

TEST_CASE("fine block argmax at an exact sub-cell centroid") {
  const GridMap map = generate_map(GridGeometry{11, 11, 4, 9, 0.1}, 0.1, TextureConfig{}, 12);
  FineScanMatchingProvider provider(FineMatchConfig{});
  HierarchyConfig cfg;
  int checked = 0;
  for (int n = 1; n < 11 && checked < 6; n += 2)
    for (int m = 1; m < 11 && checked < 6; m += 2) {
      if (!map.cell_free(n, m)) continue;
      const double sub = map.geometry.cell_pitch() / 3;
      const double x = m * map.geometry.cell_pitch() + 2.5 * sub;
      const double y = n * map.geometry.cell_pitch() + 0.5 * sub;
      if (!map.free_at(x, y)) continue;
      const Scan scan = raycast(map, ContinuousPose{x, y, 0.0});
      const auto block = provider.fine_block(make_block_query(map, scan, CellPose{0, n, m}, cfg));
      Eigen::Index bi = 0, bj = 0;
      block.maxCoeff(&bi, &bj);
      REQUIRE(bi == 0);
      REQUIRE(bj == 2);
      REQUIRE(block.sum() == Approx(1.0).margin(1e-12));
      ++checked;
    }
  REQUIRE(checked > 0);
}

TEST_CASE("fine block is symmetric in a symmetric corridor") {
  const GridMap map = fixtures::ascii_map({"#######", "#.....#", "#######"});
  FineScanMatchingProvider provider(FineMatchConfig{});
  const Eigen::Vector2d c = map.centroid(1, 3);
  const Scan scan = raycast(map, ContinuousPose{c.x(), c.y(), 0.0});
  const auto block =
      provider.fine_block(make_block_query(map, scan, CellPose{0, 1, 3}, HierarchyConfig{}));
  for (int i = 0; i < 3; ++i) REQUIRE(block(i, 0) == Approx(block(i, 2)).margin(1e-9));
  Eigen::Index bi = 0, bj = 0;
  block.maxCoeff(&bi, &bj);
  REQUIRE(bj == 1);
}

TEST_CASE("fine block inside an obstacle is uniform") {
  const GridMap map = fixtures::ascii_map({"###", "#.#", "###"});
  FineScanMatchingProvider provider(FineMatchConfig{});
  const Eigen::Vector2d c = map.centroid(1, 1);
  const Scan scan = raycast(map, ContinuousPose{c.x(), c.y(), 0.0});
  HierarchyConfig cfg;
  cfg.k = 4;
  const auto block = provider.fine_block(make_block_query(map, scan, CellPose{0, 0, 0}, cfg));
  REQUIRE((block.array() - 1.0 / 16.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("fine argmax lands within one sub-cell of the truth") {
  const GridMap map = generate_map(GridGeometry{11, 11, 4, 9, 0.1}, 0.1, TextureConfig{}, 13);
  FineScanMatchingProvider provider(FineMatchConfig{});
  HierarchyConfig cfg;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> cell(0, 10), heading(0, 3);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  const double pitch = map.geometry.cell_pitch();
  int trials = 0, close = 0;
  while (trials < 20) {
    const int n = cell(rng), m = cell(rng), h = heading(rng);
    if (!map.cell_free(n, m)) continue;
    const double fx = frac(rng), fy = frac(rng);
    const double x = (m + fx) * pitch, y = (n + fy) * pitch;
    if (!map.free_at(x, y)) continue;
    const Scan scan = raycast(map, ContinuousPose{x, y, map.geometry.heading_angle(h)});
    const auto block = provider.fine_block(make_block_query(map, scan, CellPose{h, n, m}, cfg));
    Eigen::Index bi = 0, bj = 0;
    block.maxCoeff(&bi, &bj);
    const int ti = std::min(2, int(fy * 3)), tj = std::min(2, int(fx * 3));
    close += (std::abs(int(bi) - ti) <= 1 && std::abs(int(bj) - tj) <= 1) ? 1 : 0;
    ++trials;
  }
  REQUIRE(close >= 18);
}

TEST_CASE("scan matching provider is a tempered cosine softmax") {
  const GridMap map = generate_map(GridGeometry{11, 11, 4, 9, 0.1}, 0.1, TextureConfig{}, 6);
  auto matrix = std::make_shared<const ScanMatrix>(build_scan_matrix(map));
  const ScanMatchingProvider provider(matrix, 5.0);
  const Scan scan = matrix->scan_at(CellPose{1, 1, 1});
  const auto lik = provider.coarse(map, scan);
  const auto direct = tempered_softmax(cosine_scores(*matrix, scan), 5.0);
  REQUIRE((lik.values.values() - direct.values.values()).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE(lik.level == 0);
  REQUIRE_THROWS_AS(ScanMatchingProvider(nullptr, 1.0), ConfigurationError);
  REQUIRE_THROWS_AS(ScanMatchingProvider(matrix, 0.0), ParameterError);
}
