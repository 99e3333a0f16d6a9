#include "run_config.hpp"

#include "dal/map_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace dal::cli {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw ParameterError("not an integer: " + s);
  return v;
}

}  // namespace

GridGeometry parse_geometry(const std::string& text, const GridGeometry& base) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw ParameterError("geometry must be N,M,Theta: " + text);
  GridGeometry g = base;
  try {
    g.rows = to_int(parts[0]);
    g.cols = to_int(parts[1]);
    g.headings = to_int(parts[2]);
  } catch (const std::logic_error&) {
    throw ParameterError("geometry must be N,M,Theta: " + text);
  }
  g.validate();
  return g;
}

std::vector<BenchGrid> parse_grids(const std::string& text) {
  std::vector<BenchGrid> grids;
  for (const auto& item : split(text, ',')) {
    const auto dims = split(item, 'x');
    if (dims.size() != 3) throw ParameterError("grid must be ThetaxNxM: " + item);
    grids.push_back({to_int(dims[0]), to_int(dims[1]), to_int(dims[2])});
  }
  return grids;
}

void apply_json(const json& j, RunConfig& cfg) {
  if (!j.is_object()) throw ConfigurationError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "map") cfg.map = v.get<std::string>();
    else if (key == "geometry") {
      if (v.is_string()) cfg.geometry = parse_geometry(v.get<std::string>(), cfg.geometry);
      else {
        const auto dims = v.get<std::vector<int>>();
        if (dims.size() != 3) throw ConfigurationError("geometry must hold N, M, Theta");
        cfg.geometry = parse_geometry(std::to_string(dims[0]) + "," + std::to_string(dims[1]) +
                                          "," + std::to_string(dims[2]),
                                      cfg.geometry);
      }
    } else if (key == "N") cfg.geometry.rows = v.get<int>();
    else if (key == "M") cfg.geometry.cols = v.get<int>();
    else if (key == "Theta") cfg.geometry.headings = v.get<int>();
    else if (key == "cell_px") cfg.geometry.cell_px = v.get<int>();
    else if (key == "resolution") cfg.geometry.resolution = v.get<double>();
    else if (key == "prune_prob") cfg.prune_prob = v.get<double>();
    else if (key == "textured") cfg.textured = v.get<bool>();
    else if (key == "policy") cfg.policy = v.get<std::string>();
    else if (key == "likelihood") cfg.likelihood = v.get<std::string>();
    else if (key == "external_cmd") cfg.external_cmd = v.get<std::string>();
    else if (key == "reward") cfg.reward = v.get<std::string>();
    else if (key == "episodes") cfg.episodes = v.get<int>();
    else if (key == "horizon") cfg.horizon = v.get<int>();
    else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
    else if (key == "noise_profile") cfg.noise_profile = v.get<std::string>();
    else if (key == "out") cfg.out = v.get<std::string>();
    else if (key == "serve_addr") cfg.serve_addr = v.get<std::string>();
    else if (key == "sm_beta") cfg.sm_beta = v.get<double>();
    else if (key == "top_h") cfg.top_h = v.get<int>();
    else if (key == "tie_tolerance") cfg.tie_tolerance = v.get<double>();
    else if (key == "drift_correction") cfg.drift_correction = v.get<bool>();
    else if (key == "count") cfg.count = v.get<int>();
    else if (key == "maps") cfg.maps = v.get<int>();
    else if (key == "poses") cfg.poses = v.get<int>();
    else if (key == "domain_randomization") cfg.domain_randomization = v.get<bool>();
    else if (key == "reps") cfg.reps = v.get<int>();
    else if (key == "grids") cfg.grids = parse_grids(v.get<std::string>());
    else throw ConfigurationError("unknown config key: " + key);
  }
}

void apply_config_file(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read config " + path.string());
  try {
    apply_json(json::parse(in), cfg);
  } catch (const json::exception& e) {
    throw ConfigurationError("bad config " + path.string() + ": " + e.what());
  }
}

void validate(const RunConfig& cfg) {
  static const std::set<std::string> policies{"random", "aml", "greedy", "left", "external"};
  if (!policies.contains(cfg.policy)) throw ConfigurationError("unknown policy: " + cfg.policy);
  if (cfg.likelihood != "sm" && cfg.likelihood != "external")
    throw ConfigurationError("unknown likelihood: " + cfg.likelihood);
  if ((cfg.policy == "external" || cfg.likelihood == "external") && cfg.external_cmd.empty())
    throw ConfigurationError("external models need --external-cmd");
  reward_kind_from_string(cfg.reward);
  noise_profile(cfg.noise_profile);
  cfg.geometry.validate();
  if (!cfg.map.empty() && !std::filesystem::exists(cfg.map))
    throw ConfigurationError("map file does not exist: " + cfg.map);
  if (cfg.episodes < 0 || cfg.horizon < 1) throw ConfigurationError("bad episode counts");
}

TextureConfig texture_config(const RunConfig& cfg) {
  return cfg.textured ? TextureConfig{} : TextureConfig::noise_free();
}

EpisodeConfig episode_config(const RunConfig& cfg) {
  EpisodeConfig ec;
  ec.horizon = cfg.horizon;
  ec.reward = reward_kind_from_string(cfg.reward);
  ec.sm_beta = cfg.sm_beta;
  ec.drift_correction = cfg.drift_correction;
  apply_profile(noise_profile(cfg.noise_profile), ec);
  return ec;
}

GridMap load_or_generate_map(const RunConfig& cfg, std::uint64_t index) {
  if (!cfg.map.empty()) return read_map(cfg.map);
  return generate_map(cfg.geometry, cfg.prune_prob, texture_config(cfg),
                      stream_seed(cfg.seed, Stream::Maze, index));
}

std::shared_ptr<const World> make_run_world(const RunConfig& cfg, std::uint64_t index) {
  const NoiseProfile profile = noise_profile(cfg.noise_profile);
  return make_world(load_or_generate_map(cfg, index), profile.flip_count, profile.map_morph,
                    stream_seed(cfg.seed, Stream::Perturb, index));
}

}  // namespace dal::cli
