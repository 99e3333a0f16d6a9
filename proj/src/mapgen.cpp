#include "dal/mapgen.hpp"

#include "dal/rng.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <vector>

namespace dal {

void GridGeometry::validate() const {
  if (rows < 1 || cols < 1) throw ParameterError("grid needs at least one row and column");
  if (headings < 2) throw ParameterError("heading count must be at least 2");
  if (cell_px < 1) throw ParameterError("cell_px must be positive");
  if (!(resolution > 0.0)) throw ParameterError("resolution must be positive");
}

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

struct WallCandidate {
  bool horizontal;
  int r;
  int c;
};

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

void stamp(Raster& img, int r0, int r1, int c0, int c1, std::uint8_t value) {
  r0 = std::max(r0, 0);
  c0 = std::max(c0, 0);
  r1 = std::min(r1, int(img.rows()) - 1);
  c1 = std::min(c1, int(img.cols()) - 1);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) img(r, c) = value;
}

void seal_border(Raster& img) {
  img.row(0).setZero();
  img.row(img.rows() - 1).setZero();
  img.col(0).setZero();
  img.col(img.cols() - 1).setZero();
}

int draw_count(Rng& rng, int lo, int hi) {
  if (hi <= lo) return lo;
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

void apply_morph(Raster& raster, const MorphConfig& morph, Rng& rng) {
  const int dilations = draw_count(rng, morph.dilate_min, morph.dilate_max);
  const int erosions = draw_count(rng, morph.erode_min, morph.erode_max);
  for (int i = 0; i < dilations; ++i) morph_pass(raster, true, morph.pass_prob, rng());
  for (int i = 0; i < erosions; ++i) morph_pass(raster, false, morph.pass_prob, rng());
}

}  // namespace

int CoarseMaze::removed_wall_count() const {
  return int((!horizontal_walls).count() + (!vertical_walls).count());
}

BoolGrid CoarseMaze::free_mask() const {
  BoolGrid free = BoolGrid::Constant(block_rows(), block_cols(), false);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) free(2 * r + 1, 2 * c + 1) = true;
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!horizontal_walls(r, c)) free(2 * r + 2, 2 * c + 1) = true;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c)
      if (!vertical_walls(r, c)) free(2 * r + 1, 2 * c + 2) = true;
  return free;
}

CoarseMaze generate_maze(int rows, int cols, double prune_prob, std::uint64_t seed) {
  if (rows < 1 || cols < 1 || rows * cols < 2)
    throw ParameterError("maze needs at least two rooms");
  if (!(prune_prob >= 0.0 && prune_prob < 1.0))
    throw ParameterError("prune_prob must lie in [0, 1)");

  CoarseMaze maze;
  maze.rows = rows;
  maze.cols = cols;
  maze.horizontal_walls = BoolGrid::Constant(std::max(rows - 1, 0), cols, true);
  maze.vertical_walls = BoolGrid::Constant(rows, std::max(cols - 1, 0), true);

  std::vector<WallCandidate> walls;
  walls.reserve(maze.interior_wall_count());
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c < cols; ++c) walls.push_back({true, r, c});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) walls.push_back({false, r, c});

  Rng rng = make_rng(seed);
  std::shuffle(walls.begin(), walls.end(), rng);

  DisjointSet rooms(rows * cols);
  for (const auto& w : walls) {
    const int a = w.r * cols + w.c;
    const int b = w.horizontal ? a + cols : a + 1;
    if (rooms.unite(a, b)) {
      (w.horizontal ? maze.horizontal_walls : maze.vertical_walls)(w.r, w.c) = false;
    }
  }

  if (prune_prob > 0.0) {
    std::bernoulli_distribution prune(prune_prob);
    for (const auto& w : walls) {
      auto& grid = w.horizontal ? maze.horizontal_walls : maze.vertical_walls;
      if (grid(w.r, w.c) && prune(rng)) grid(w.r, w.c) = false;
    }
  }
  return maze;
}

int flood_fill_count(const BoolGrid& free) {
  const int rows = int(free.rows());
  const int cols = int(free.cols());
  BoolGrid seen = BoolGrid::Constant(rows, cols, false);
  std::queue<std::pair<int, int>> open;
  for (int r = 0; r < rows && open.empty(); ++r)
    for (int c = 0; c < cols; ++c)
      if (free(r, c)) {
        open.push({r, c});
        seen(r, c) = true;
        break;
      }
  int count = 0;
  constexpr int dr[] = {-1, 1, 0, 0};
  constexpr int dc[] = {0, 0, -1, 1};
  while (!open.empty()) {
    const auto [r, c] = open.front();
    open.pop();
    ++count;
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k];
      const int nc = c + dc[k];
      if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
      if (!free(nr, nc) || seen(nr, nc)) continue;
      seen(nr, nc) = true;
      open.push({nr, nc});
    }
  }
  return count;
}

bool GridMap::free_at(double x, double y) const {
  const double u = x / geometry.resolution;
  const double v = y / geometry.resolution;
  if (!(u >= 0.0 && v >= 0.0)) return false;
  return free_px(int(std::floor(v)), int(std::floor(u)));
}

Eigen::Vector2d GridMap::centroid(int n, int m) const {
  const double res = geometry.resolution;
  return {(centroid_px_col(m) + 0.5) * res, (centroid_px_row(n) + 0.5) * res};
}

bool GridMap::cell_free(int n, int m) const {
  if (!cell_in_bounds(n, m)) return false;
  const int cr = centroid_px_row(n);
  const int cc = centroid_px_col(m);
  int free = 0;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) free += free_px(cr + dr, cc + dc) ? 1 : 0;
  return free >= 5;
}

int GridMap::free_cell_count() const {
  int count = 0;
  for (int n = 0; n < geometry.rows; ++n)
    for (int m = 0; m < geometry.cols; ++m) count += cell_free(n, m) ? 1 : 0;
  return count;
}

std::pair<int, int> GridMap::cell_of(double x, double y) const {
  const double pitch = geometry.cell_pitch();
  const int n = std::clamp(int(std::floor(y / pitch)), 0, geometry.rows - 1);
  const int m = std::clamp(int(std::floor(x / pitch)), 0, geometry.cols - 1);
  return {n, m};
}

void GridMap::validate() const {
  geometry.validate();
  if (occupancy.rows() != geometry.height_px() || occupancy.cols() != geometry.width_px())
    throw MapError("raster size does not match the coarse geometry");
  if (occupancy.rows() % geometry.rows != 0 || occupancy.cols() % geometry.cols != 0)
    throw MapError("raster size not divisible by the coarse grid");
}

void morph_pass(Raster& raster, bool dilate, double prob, std::uint64_t seed) {
  const int rows = int(raster.rows());
  const int cols = int(raster.cols());
  const Raster src = raster;
  const std::uint8_t target = dilate ? 1 : 0;  // pixels that may change
  Rng rng = make_rng(seed);
  std::bernoulli_distribution accept(std::clamp(prob, 0.0, 1.0));
  constexpr int dr[] = {-1, 1, 0, 0};
  constexpr int dc[] = {0, 0, -1, 1};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (src(r, c) != target) continue;
      bool touches = false;
      for (int k = 0; k < 4 && !touches; ++k) {
        const int nr = r + dr[k];
        const int nc = c + dc[k];
        if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
        touches = src(nr, nc) != target;
      }
      if (touches && accept(rng)) raster(r, c) = std::uint8_t(1 - target);
    }
  }
}

GridMap rasterize_blocks(const BoolGrid& free, const GridGeometry& geometry,
                         const TextureConfig& texture, std::uint64_t seed) {
  geometry.validate();
  if (free.rows() != geometry.rows || free.cols() != geometry.cols)
    throw ParameterError("geometry does not match the block grid");
  if (texture.thickness_min_px < 1 || texture.thickness_min_px > texture.thickness_max_px)
    throw ParameterError("invalid wall thickness range");
  if (texture.thickness_max_px >= geometry.cell_px)
    throw ParameterError("wall thickness must be smaller than cell_px");

  const int px = geometry.cell_px;
  Rng rng = make_rng(seed);

  GridMap map;
  map.geometry = geometry;
  map.seed = seed;
  map.occupancy = Raster::Ones(geometry.height_px(), geometry.width_px());
  Raster& img = map.occupancy;

  auto obstacle = [&](int n, int m) {
    return n >= 0 && m >= 0 && n < geometry.rows && m < geometry.cols && !free(n, m);
  };

  std::uniform_int_distribution<int> thickness(texture.thickness_min_px, texture.thickness_max_px);
  std::uniform_int_distribution<int> shrink(0, std::max(texture.length_jitter_px, 0));
  for (int n = 0; n < geometry.rows; ++n) {
    for (int m = 0; m < geometry.cols; ++m) {
      if (!obstacle(n, m)) continue;
      const int t = thickness(rng);
      const int cr = map.centroid_px_row(n);
      const int cc = map.centroid_px_col(m);
      const int lo = -(t - 1) / 2;
      const int hi = lo + t - 1;
      stamp(img, cr + lo, cr + hi, cc + lo, cc + hi, 0);
      const int top = n * px;
      const int left = m * px;
      const int bottom = top + px - 1;
      const int right = left + px - 1;
      if (obstacle(n - 1, m)) stamp(img, top + shrink(rng), cr, cc + lo, cc + hi, 0);
      if (obstacle(n + 1, m)) stamp(img, cr, bottom - shrink(rng), cc + lo, cc + hi, 0);
      if (obstacle(n, m - 1)) stamp(img, cr + lo, cr + hi, left + shrink(rng), cc, 0);
      if (obstacle(n, m + 1)) stamp(img, cr + lo, cr + hi, cc, right - shrink(rng), 0);
    }
  }

  apply_morph(img, texture.morph, rng);
  seal_border(img);

  // Restore the coarse topology the texture passes may have blurred.
  const int radius = std::max(1, px / 4);
  for (int n = 0; n < geometry.rows; ++n) {
    for (int m = 0; m < geometry.cols; ++m) {
      const int cr = map.centroid_px_row(n);
      const int cc = map.centroid_px_col(m);
      if (!free(n, m)) {
        stamp(img, cr - 1, cr + 1, cc - 1, cc + 1, 0);
        continue;
      }
      if (img(cr, cc) != 0 && map.cell_free(n, m)) continue;
      for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc)
          if (dr * dr + dc * dc <= radius * radius) stamp(img, cr + dr, cr + dr, cc + dc, cc + dc, 1);
      seal_border(img);
    }
  }
  return map;
}

GridMap rasterize(const CoarseMaze& maze, const GridGeometry& geometry,
                  const TextureConfig& texture, std::uint64_t seed) {
  if (geometry.rows != maze.block_rows() || geometry.cols != maze.block_cols())
    throw ParameterError("geometry must be (2 rows + 1) x (2 cols + 1) for the maze");
  return rasterize_blocks(maze.free_mask(), geometry, texture, seed);
}

GridMap perturb_map(const GridMap& map, int flip_count, const MorphConfig& morph,
                    std::uint64_t seed) {
  const auto pixels = map.occupancy.size();
  if (flip_count < 0 || flip_count > pixels) throw ParameterError("flip_count out of range");
  GridMap out = map;
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, pixels - 1);
  for (int i = 0; i < flip_count; ++i) {
    auto& p = out.occupancy.data()[pick(rng)];
    p = std::uint8_t(1 - p);
  }
  apply_morph(out.occupancy, morph, rng);
  seal_border(out.occupancy);
  return out;
}

int obstacle_pixel_count(const GridMap& map) {
  return int((map.occupancy.array() == 0).count());
}

GridMap generate_map(const GridGeometry& geometry, double prune_prob,
                     const TextureConfig& texture, std::uint64_t seed) {
  if (geometry.rows < 3 || geometry.cols < 3 || geometry.rows % 2 == 0 || geometry.cols % 2 == 0)
    throw ParameterError("maze geometry needs odd N, M >= 3");
  const auto maze = generate_maze((geometry.rows - 1) / 2, (geometry.cols - 1) / 2, prune_prob,
                                  stream_seed(seed, Stream::Maze));
  GridMap map = rasterize(maze, geometry, texture, stream_seed(seed, Stream::Texture));
  map.seed = seed;
  return map;
}

}  // namespace dal
