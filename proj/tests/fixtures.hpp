#pragma once

#include "dal/env.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Block grid from rows of '#' (obstacle) and '.' (free).
inline BoolGrid blocks(const std::vector<std::string>& rows) {
  BoolGrid free(int(rows.size()), int(rows.front().size()));
  for (int n = 0; n < free.rows(); ++n)
    for (int m = 0; m < free.cols(); ++m) free(n, m) = rows[std::size_t(n)][std::size_t(m)] == '.';
  return free;
}

inline dal::GridMap ascii_map(const std::vector<std::string>& rows, int headings = 4,
                              int cell_px = 9, double resolution = 0.1) {
  const dal::GridGeometry g{int(rows.size()), int(rows.front().size()), headings, cell_px,
                            resolution};
  return dal::rasterize_blocks(blocks(rows), g, dal::TextureConfig::noise_free(), 1);
}

/// Random distribution over the poses of a shape, optionally zero on obstacles.
inline dal::BeliefGrid random_belief(int headings, int rows, int cols, std::mt19937_64& rng) {
  dal::BeliefGrid b;
  b.values = dal::PoseTensor<double>(headings, rows, cols);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < b.values.values().size(); ++i)
    b.values.values()[i] = u(rng) < 0.3 ? 0.0 : u(rng);
  b.values.values()[0] += 1e-3;
  b.values.values() /= b.values.sum();
  return b;
}

inline dal::BeliefGrid random_belief_on(const dal::GridMap& map, std::mt19937_64& rng) {
  const auto& g = map.geometry;
  dal::BeliefGrid b = random_belief(g.headings, g.rows, g.cols, rng);
  dal::mask_obstacles(b.values, map);
  b.values.values() /= b.values.sum();
  return b;
}

/// Scratch directory removed when the object goes out of scope.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           (name + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

/// Three 5 x 5 block grids used by the oracle tests.
inline std::vector<std::vector<std::string>> small_fixtures() {
  return {{"#####", "#...#", "#.#.#", "#...#", "#####"},
          {"#####", "#...#", "#..##", "##..#", "#####"},
          {"#####", "#..##", "#.#.#", "#...#", "#####"}};
}

}  // namespace fixtures
