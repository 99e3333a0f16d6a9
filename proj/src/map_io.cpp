#include "dal/map_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace dal {

namespace fs = std::filesystem;

fs::path sidecar_path(const fs::path& pgm_path) {
  fs::path p = pgm_path;
  p.replace_extension(".json");
  return p;
}

void write_pgm(const Raster& raster, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << raster.cols() << ' ' << raster.rows() << "\n255\n";
  std::string row(std::size_t(raster.cols()), '\0');
  for (Eigen::Index r = 0; r < raster.rows(); ++r) {
    for (Eigen::Index c = 0; c < raster.cols(); ++c)
      row[std::size_t(c)] = raster(r, c) ? char(255) : char(0);
    out.write(row.data(), std::streamsize(row.size()));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

}  // namespace

Raster read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapError("cannot open " + path.string());
  if (next_token(in) != "P5") throw MapError(path.string() + ": not a binary PGM");
  const int width = std::stoi(next_token(in));
  const int height = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (width <= 0 || height <= 0 || maxval != 255)
    throw MapError(path.string() + ": unsupported PGM header");
  in.get();  // single whitespace before the payload
  std::string payload(std::size_t(width) * std::size_t(height), '\0');
  in.read(payload.data(), std::streamsize(payload.size()));
  if (in.gcount() != std::streamsize(payload.size())) throw MapError(path.string() + ": truncated");
  Raster raster(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      raster(r, c) = static_cast<unsigned char>(payload[std::size_t(r) * width + c]) >= 128 ? 1 : 0;
  return raster;
}

void write_map(const GridMap& map, const fs::path& pgm_path) {
  write_pgm(map.occupancy, pgm_path);
  const nlohmann::json meta = {
      {"resolution", map.geometry.resolution}, {"N", map.geometry.rows},
      {"M", map.geometry.cols},                {"Theta", map.geometry.headings},
      {"cell_px", map.geometry.cell_px},       {"seed", map.seed},
  };
  std::ofstream out(sidecar_path(pgm_path));
  if (!out) throw IoError("cannot write sidecar for " + pgm_path.string());
  out << meta.dump(2) << '\n';
}

GridMap read_map(const fs::path& pgm_path) {
  std::ifstream meta_in(sidecar_path(pgm_path));
  if (!meta_in) throw MapError("missing sidecar for " + pgm_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw MapError("bad sidecar for " + pgm_path.string() + ": " + e.what());
  }
  GridMap map;
  try {
    map.geometry.resolution = meta.at("resolution").get<double>();
    map.geometry.rows = meta.at("N").get<int>();
    map.geometry.cols = meta.at("M").get<int>();
    map.geometry.headings = meta.at("Theta").get<int>();
    map.geometry.cell_px = meta.at("cell_px").get<int>();
    map.seed = meta.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw MapError("incomplete sidecar for " + pgm_path.string() + ": " + e.what());
  }
  map.occupancy = read_pgm(pgm_path);
  try {
    map.validate();
  } catch (const ParameterError& e) {
    throw MapError(e.what());
  }
  return map;
}

}  // namespace dal
