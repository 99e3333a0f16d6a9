#pragma once

#include "dal/types.hpp"

#include <cstdint>

namespace dal {

/// Maze over rows x cols rooms. Walls live on the edges between adjacent rooms;
/// the block grid view lays rooms and walls out as (2 rows + 1) x (2 cols + 1)
/// coarse cells, which is the grid the filter runs on.
struct CoarseMaze {
  int rows = 0;
  int cols = 0;
  /// (rows - 1) x cols, true = wall between room (r, c) and (r + 1, c).
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> horizontal_walls;
  /// rows x (cols - 1), true = wall between room (r, c) and (r, c + 1).
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> vertical_walls;

  int interior_wall_count() const { return (rows - 1) * cols + rows * (cols - 1); }
  int removed_wall_count() const;
  int block_rows() const { return 2 * rows + 1; }
  int block_cols() const { return 2 * cols + 1; }

  /// Free mask over the block grid. Room cells and opened wall cells are free;
  /// lattice corners and the outer ring are obstacle.
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> free_mask() const;
};

CoarseMaze generate_maze(int rows, int cols, double prune_prob, std::uint64_t seed);

/// Count of free block cells reachable from the first free cell (4-connected).
int flood_fill_count(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& free);

struct MorphConfig {
  int dilate_min = 0;
  int dilate_max = 0;
  int erode_min = 0;
  int erode_max = 0;
  /// Probability that an eligible boundary pixel changes during one pass.
  double pass_prob = 1.0;
};

struct TextureConfig {
  int thickness_min_px = 3;
  int thickness_max_px = 5;
  /// Each wall arm is shortened by a uniform draw in [0, length_jitter_px].
  int length_jitter_px = 0;
  MorphConfig morph{0, 2, 0, 1, 0.5};

  static TextureConfig noise_free(int thickness_px = 3) {
    return {thickness_px, thickness_px, 0, MorphConfig{}};
  }
};

/// High resolution occupancy raster bound to a coarse grid.
struct GridMap {
  Raster occupancy;
  GridGeometry geometry;
  std::uint64_t seed = 0;

  int height() const { return int(occupancy.rows()); }
  int width() const { return int(occupancy.cols()); }
  bool free_px(int r, int c) const {
    return r >= 0 && c >= 0 && r < height() && c < width() && occupancy(r, c) != 0;
  }
  /// True when the pixel containing the point (meters) is free.
  bool free_at(double x, double y) const;

  int centroid_px_row(int n) const { return n * geometry.cell_px + geometry.cell_px / 2; }
  int centroid_px_col(int m) const { return m * geometry.cell_px + geometry.cell_px / 2; }
  /// Centroid of coarse cell (n, m) in meters, at the center of its centroid pixel.
  Eigen::Vector2d centroid(int n, int m) const;

  /// A coarse cell is free when the majority of the 3x3 pixel patch around its
  /// centroid pixel is free. Isolated pixel noise does not flip a cell.
  bool cell_free(int n, int m) const;
  bool cell_in_bounds(int n, int m) const {
    return n >= 0 && m >= 0 && n < geometry.rows && m < geometry.cols;
  }
  int free_cell_count() const;
  /// Coarse cell containing the point (meters), clamped to the grid.
  std::pair<int, int> cell_of(double x, double y) const;

  void validate() const;
};

GridMap rasterize(const CoarseMaze& maze, const GridGeometry& geometry,
                  const TextureConfig& texture, std::uint64_t seed);

/// Rasterizes an arbitrary block-grid free mask (one entry per coarse cell).
GridMap rasterize_blocks(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& free,
                         const GridGeometry& geometry, const TextureConfig& texture,
                         std::uint64_t seed);

/// Copy of the map with flip_count uniformly drawn pixels inverted (with
/// replacement) followed by morphological passes. The input is not modified.
GridMap perturb_map(const GridMap& map, int flip_count, const MorphConfig& morph,
                    std::uint64_t seed);

/// Single morphology pass with a 3x3 cross; grows obstacles when dilate is true.
void morph_pass(Raster& raster, bool dilate, double prob, std::uint64_t seed);

int obstacle_pixel_count(const GridMap& map);

/// Convenience: maze + rasterization for a coarse geometry with odd N and M.
GridMap generate_map(const GridGeometry& geometry, double prune_prob,
                     const TextureConfig& texture, std::uint64_t seed);

}  // namespace dal
