#pragma once

#include "dal/likelihood.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dal {

/// Randomization applied per exported sample. With `enabled` false every
/// sample is noiseless: robot at the centroid, aligned heading, clean scan,
/// unperturbed map.
struct DomainRandomizationConfig {
  bool enabled = true;
  GridGeometry geometry;
  double prune_prob = 0.1;
  TextureConfig texture;
  double pose_error = 0.25;  // offset bound as a fraction of the cell pitch
  double heading_error_deg = 5.0;
  double beta_min = 0.1;
  double beta_max = 1.0;
  ScanNoise sensor{0.02, 0.01, 2.0};
  int flip_count = 100;
  MorphConfig map_morph{0, 1, 0, 1, 0.3};
  LidarConfig lidar;
};

struct ManifestEntry {
  std::string map_id;
  int sample = 0;
  std::uint64_t seed = 0;
  ContinuousPose pose;
  CellPose cell;
  double beta = 1.0;
  std::string scan_file, lik_file, map_file, image_file;
};

/// Writes maps/<id>.pgm (+ .json), samples/<id>/<k>.scan (float32 ranges),
/// <k>.lik (float32 Theta x N x M), <k>.map.pgm (perturbed map), <k>.img.pgm
/// (robot-centric scan image) and manifest.jsonl under `out`. Output bytes
/// depend only on the arguments.
std::vector<ManifestEntry> generate_dataset(int n_maps, int poses_per_map,
                                            const DomainRandomizationConfig& dr,
                                            const std::filesystem::path& out, std::uint64_t seed);

void write_float32(const float* data, std::size_t count, const std::filesystem::path& path);
std::vector<float> read_float32(const std::filesystem::path& path);

}  // namespace dal
