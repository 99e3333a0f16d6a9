#include "dal/dataset.hpp"

#include "dal/map_io.hpp"
#include "dal/rng.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <fstream>

namespace dal {

namespace fs = std::filesystem;

namespace {

std::string map_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return buf;
}

std::vector<std::pair<int, int>> spawn_cells(const GridMap& map) {
  std::vector<std::pair<int, int>> cells;
  for (int n = 0; n < map.geometry.rows; ++n)
    for (int m = 0; m < map.geometry.cols; ++m)
      if (map.cell_free(n, m) && map.free_px(map.centroid_px_row(n), map.centroid_px_col(m)))
        cells.emplace_back(n, m);
  return cells;
}

nlohmann::json to_json(const ManifestEntry& e, const GridGeometry& g) {
  return {{"map_id", e.map_id},
          {"sample", e.sample},
          {"seed", e.seed},
          {"pose", {{"x", e.pose.x}, {"y", e.pose.y}, {"heading", e.pose.heading}}},
          {"cell", {e.cell.heading, e.cell.row, e.cell.col}},
          {"beta", e.beta},
          {"shape", {g.headings, g.rows, g.cols}},
          {"scan", e.scan_file},
          {"lik", e.lik_file},
          {"map", e.map_file},
          {"image", e.image_file}};
}

}  // namespace

void write_float32(const float* data, std::size_t count, const fs::path& path) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<float> read_float32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto size = std::size_t(in.tellg());
  if (size % sizeof(float) != 0) throw InputError(path.string() + ": not a float32 file");
  std::vector<float> v(size / sizeof(float));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(size));
  return v;
}

std::vector<ManifestEntry> generate_dataset(int n_maps, int poses_per_map,
                                            const DomainRandomizationConfig& dr,
                                            const fs::path& out, std::uint64_t seed) {
  if (n_maps < 0 || poses_per_map < 0) throw ParameterError("counts must be nonnegative");
  if (!(dr.beta_min > 0.0) || dr.beta_max < dr.beta_min)
    throw ParameterError("temperature range must satisfy 0 < min <= max");
  dr.geometry.validate();

  const fs::path manifest_path = out / "manifest.jsonl";
  std::vector<ManifestEntry> entries;
  try {
    fs::create_directories(out / "maps");
    fs::create_directories(out / "samples");
    std::ofstream manifest(manifest_path, std::ios::trunc);
    if (!manifest) throw IoError("cannot open " + manifest_path.string() + " for writing");

    const auto& g = dr.geometry;
    for (int i = 0; i < n_maps; ++i) {
      const std::string id = map_name(i);
      const std::uint64_t map_seed = stream_seed(seed, Stream::Dataset, std::uint64_t(i));
      const GridMap map = generate_map(g, dr.prune_prob, dr.texture, map_seed);
      write_map(map, out / "maps" / (id + ".pgm"));
      const ScanMatrix matrix = build_scan_matrix(map, dr.lidar);
      const auto cells = spawn_cells(map);
      if (cells.empty()) throw MapError("generated map " + id + " has no free cells");
      const fs::path sample_dir = out / "samples" / id;
      fs::create_directories(sample_dir);

      for (int k = 0; k < poses_per_map; ++k) {
        ManifestEntry e;
        e.map_id = id;
        e.sample = k;
        e.seed = derive_seed(map_seed, {std::uint64_t(k)});
        Rng rng = make_rng(e.seed);

        const auto [n, m] = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
        e.cell = {std::uniform_int_distribution<int>(0, g.headings - 1)(rng), n, m};
        const Eigen::Vector2d c = map.centroid(n, m);
        e.pose = {c.x(), c.y(), g.heading_angle(e.cell.heading)};
        e.beta = std::uniform_real_distribution<double>(dr.beta_min, dr.beta_max)(rng);
        const std::uint64_t noise_seed = rng();

        GridMap input_map = map;
        Scan scan;
        if (dr.enabled) {
          const double r = dr.pose_error * g.cell_pitch();
          std::uniform_real_distribution<double> offset(-r, r);
          const double dh = dr.heading_error_deg * std::numbers::pi / 180.0;
          std::uniform_real_distribution<double> turn(-dh, dh);
          for (int attempt = 0; attempt < 32; ++attempt) {
            const double x = c.x() + offset(rng), y = c.y() + offset(rng);
            if (map.free_at(x, y)) {
              e.pose.x = x;
              e.pose.y = y;
              break;
            }
          }
          e.pose.heading = wrap_angle(e.pose.heading + turn(rng));
          scan = corrupt_scan(raycast(map, e.pose, dr.lidar), dr.sensor, noise_seed);
          input_map = perturb_map(map, dr.flip_count, dr.map_morph, derive_seed(e.seed, {1}));
        } else {
          scan = raycast(map, e.pose, dr.lidar);
        }

        const LikelihoodGrid lik = tempered_softmax(cosine_scores(matrix, scan), e.beta);
        const Eigen::VectorXf lik_f = lik.values.values().cast<float>();
        const Eigen::VectorXf ranges_f = scan.ranges.cast<float>();

        const std::string stem = std::to_string(k);
        e.scan_file = "samples/" + id + "/" + stem + ".scan";
        e.lik_file = "samples/" + id + "/" + stem + ".lik";
        e.map_file = "samples/" + id + "/" + stem + ".map.pgm";
        e.image_file = "samples/" + id + "/" + stem + ".img.pgm";
        write_float32(ranges_f.data(), std::size_t(ranges_f.size()), out / e.scan_file);
        write_float32(lik_f.data(), std::size_t(lik_f.size()), out / e.lik_file);
        write_pgm(input_map.occupancy, out / e.map_file);
        const Raster image = scan_to_image(scan, g, g.resolution).raster;
        write_pgm(Raster((1 - image.array().cast<int>()).cast<std::uint8_t>().matrix()),
                  out / e.image_file);

        manifest << to_json(e, g).dump() << '\n';
        if (!manifest) throw IoError("write failed: " + manifest_path.string());
        entries.push_back(std::move(e));
      }
    }
  } catch (const fs::filesystem_error& err) {
    std::error_code ec;
    fs::remove(manifest_path, ec);
    throw IoError(err.what());
  } catch (const IoError&) {
    std::error_code ec;
    fs::remove(manifest_path, ec);
    throw;
  }
  return entries;
}

}  // namespace dal
