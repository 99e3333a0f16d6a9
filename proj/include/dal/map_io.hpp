#pragma once

#include "dal/mapgen.hpp"

#include <filesystem>

namespace dal {

/// Writes `pgm_path` (binary P5, 0 = obstacle, 255 = free) and its sidecar
/// `<stem>.json` holding resolution, N, M, Theta, cell_px and seed.
void write_map(const GridMap& map, const std::filesystem::path& pgm_path);

/// Reads a PGM and its sidecar. Pixels below 128 are obstacles.
GridMap read_map(const std::filesystem::path& pgm_path);

void write_pgm(const Raster& raster, const std::filesystem::path& path);
Raster read_pgm(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path);

}  // namespace dal
