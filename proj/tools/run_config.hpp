#pragma once

#include "dal/benchmark.hpp"
#include "dal/dataset.hpp"
#include "dal/env.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dal::cli {

struct RunConfig {
  std::string map;  // PGM path; empty means generated mazes
  GridGeometry geometry{11, 11, 4, 9, 0.1};
  double prune_prob = 0.1;
  bool textured = false;
  std::string policy = "aml";  // random | aml | greedy | left | external
  std::string likelihood = "sm";  // sm | external
  std::string external_cmd;       // command line of the external model
  std::string reward = "bel-gt";
  int episodes = 10;
  int horizon = 11;
  std::uint64_t seed = 0;
  std::string noise_profile = "none";
  std::string out = "out";
  std::string serve_addr = "stdio";
  double sm_beta = 40.0;
  int top_h = 16;
  double tie_tolerance = 1e-3;
  bool drift_correction = true;
  int count = 10;  // gen-maps
  int maps = 10;   // gen-dataset
  int poses = 10;
  bool domain_randomization = true;
  int reps = 20;
  std::vector<BenchGrid> grids{{4, 11, 11}, {4, 33, 33}, {8, 33, 33}, {24, 33, 33}};
};

/// "N,M,Theta".
GridGeometry parse_geometry(const std::string& text, const GridGeometry& base);
/// "4x11x11,8x33x33" as Theta x N x M.
std::vector<BenchGrid> parse_grids(const std::string& text);

/// Applies the keys present in a JSON config object; unknown keys are errors.
void apply_json(const nlohmann::json& j, RunConfig& cfg);
void apply_config_file(const std::filesystem::path& path, RunConfig& cfg);

/// Checks enum values and referenced files.
void validate(const RunConfig& cfg);

EpisodeConfig episode_config(const RunConfig& cfg);
TextureConfig texture_config(const RunConfig& cfg);

/// Map source: the --map file, or a maze generated from (seed, index).
GridMap load_or_generate_map(const RunConfig& cfg, std::uint64_t index);

/// World with the noise profile's map perturbation applied to the filter copy.
std::shared_ptr<const World> make_run_world(const RunConfig& cfg, std::uint64_t index);

}  // namespace dal::cli
