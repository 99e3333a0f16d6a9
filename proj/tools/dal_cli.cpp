#include "run_config.hpp"

#include "dal/map_io.hpp"
#include "dal/trace.hpp"
#include "dal/wire.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace dal;
using namespace dal::cli;
using nlohmann::json;

namespace {

/// Flags are stored separately and applied after the config file so that
/// explicit flags win over config values, which win over defaults.
struct Flags {
  std::string config;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

  template <class T>
  void add(CLI::App* app, const std::string& name, const std::string& help,
           std::function<void(RunConfig&, const T&)> apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    overrides.emplace_back(opt, [value, apply](RunConfig& cfg) { apply(cfg, *value); });
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config.empty()) apply_config_file(config, cfg);
    for (const auto& [opt, apply] : overrides)
      if (opt->count() > 0) apply(cfg);
    validate(cfg);
    return cfg;
  }
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file (flags take precedence)");
  f.add<std::string>(app, "--map", "map PGM with a JSON sidecar",
                     [](RunConfig& c, const std::string& v) { c.map = v; });
  f.add<std::string>(app, "--geometry", "coarse grid as N,M,Theta",
                     [](RunConfig& c, const std::string& v) { c.geometry = parse_geometry(v, c.geometry); });
  f.add<std::uint64_t>(app, "--seed", "root seed",
                       [](RunConfig& c, const std::uint64_t& v) { c.seed = v; });
  f.add<std::string>(app, "--out", "output path",
                     [](RunConfig& c, const std::string& v) { c.out = v; });
  f.add<double>(app, "--prune", "wall pruning probability for generated mazes",
                [](RunConfig& c, const double& v) { c.prune_prob = v; });
  f.add<bool>(app, "--textured", "randomized wall texture for generated mazes",
              [](RunConfig& c, const bool& v) { c.textured = v; });
}

void add_episode_flags(CLI::App* app, Flags& f) {
  f.add<std::string>(app, "--policy", "random | aml | greedy | left | external",
                     [](RunConfig& c, const std::string& v) { c.policy = v; });
  f.add<std::string>(app, "--likelihood", "sm | external",
                     [](RunConfig& c, const std::string& v) { c.likelihood = v; });
  f.add<std::string>(app, "--external-cmd", "command serving policy/likelihood queries on stdio",
                     [](RunConfig& c, const std::string& v) { c.external_cmd = v; });
  f.add<std::string>(app, "--reward", "bel-gt | info-gain | bel-new | expl | bel-ent | hit-rate | dist",
                     [](RunConfig& c, const std::string& v) { c.reward = v; });
  f.add<int>(app, "--horizon", "steps per episode", [](RunConfig& c, const int& v) { c.horizon = v; });
  f.add<std::string>(app, "--noise-profile", "none | moderate | heavy",
                     [](RunConfig& c, const std::string& v) { c.noise_profile = v; });
  f.add<double>(app, "--sm-beta", "scan-matching temperature",
                [](RunConfig& c, const double& v) { c.sm_beta = v; });
  f.add<int>(app, "--top-h", "AML hypotheses per action", [](RunConfig& c, const int& v) { c.top_h = v; });
  f.add<double>(app, "--tie-tolerance", "AML expected-entropy tie tolerance",
                [](RunConfig& c, const double& v) { c.tie_tolerance = v; });
  f.add<bool>(app, "--drift-correction", "fine within-cell pose correction",
              [](RunConfig& c, const bool& v) { c.drift_correction = v; });
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::istringstream ss(cmd);
  std::vector<std::string> argv;
  for (std::string tok; ss >> tok;) argv.push_back(tok);
  return argv;
}

std::shared_ptr<MessageChannel> external_channel(const RunConfig& cfg) {
  static std::shared_ptr<MessageChannel> channel;
  if (!channel) channel = std::make_shared<ProcessChannel>(split_command(cfg.external_cmd));
  return channel;
}

std::shared_ptr<const PolicyProvider> make_policy(const RunConfig& cfg, const World& world) {
  if (cfg.policy == "random") return random_policy();
  if (cfg.policy == "greedy") return greedy_follow_policy();
  if (cfg.policy == "left") return constant_policy(Action::Left);
  if (cfg.policy == "external") return std::make_shared<RemotePolicyProvider>(external_channel(cfg));
  LookaheadConfig lc;
  lc.top_h = cfg.top_h;
  lc.beta = cfg.sm_beta;
  lc.noise = episode_config(cfg).filter_noise;
  lc.scan_matrix = world.scan_matrix;
  lc.tie_tolerance = cfg.tie_tolerance;
  return aml_policy(lc);
}

std::shared_ptr<const LikelihoodProvider> make_likelihood(const RunConfig& cfg) {
  if (cfg.likelihood == "external")
    return std::make_shared<RemoteLikelihoodProvider>(external_channel(cfg));
  return nullptr;
}

std::string map_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return buf;
}

int cmd_gen_maps(const RunConfig& cfg) {
  const fs::path out(cfg.out);
  fs::create_directories(out);
  std::ofstream manifest(out / "manifest.jsonl", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (out / "manifest.jsonl").string());
  for (int i = 0; i < cfg.count; ++i) {
    const GridMap map = load_or_generate_map(cfg, std::uint64_t(i));
    const std::string id = map_id(i);
    write_map(map, out / (id + ".pgm"));
    manifest << json{{"map_id", id}, {"seed", map.seed}, {"pgm", id + ".pgm"},
                     {"free_cells", map.free_cell_count()}}
                    .dump()
             << '\n';
  }
  if (!manifest) throw IoError("write failed: manifest.jsonl");
  std::cout << "wrote " << cfg.count << " maps to " << out.string() << '\n';
  return 0;
}

int cmd_gen_dataset(const RunConfig& cfg) {
  DomainRandomizationConfig dr;
  dr.enabled = cfg.domain_randomization;
  dr.geometry = cfg.geometry;
  dr.prune_prob = cfg.prune_prob;
  dr.texture = texture_config(cfg);
  const auto entries = generate_dataset(cfg.maps, cfg.poses, dr, cfg.out, cfg.seed);
  std::cout << "wrote " << entries.size() << " samples to " << cfg.out << '\n';
  return 0;
}

int cmd_run(const RunConfig& cfg) {
  const fs::path out(cfg.out);
  fs::create_directories(out / "traces");
  const EpisodeConfig ec = episode_config(cfg);
  const auto coarse = make_likelihood(cfg);
  std::shared_ptr<const World> file_world;
  std::vector<EpisodeRecord> records;
  for (int e = 0; e < cfg.episodes; ++e) {
    std::shared_ptr<const World> world;
    if (!cfg.map.empty()) {
      if (!file_world) file_world = make_run_world(cfg, 0);
      world = file_world;
    } else {
      world = make_run_world(cfg, std::uint64_t(e));
    }
    const auto policy = make_policy(cfg, *world);
    Episode episode(world, ec, coarse);
    const std::uint64_t seed = derive_seed(cfg.seed, {std::uint64_t(e)});
    EpisodeRecord record = run_episode(episode, *policy, seed, std::nullopt, true);

    TraceHeader header;
    header.seed = seed;
    header.map_id = cfg.map.empty() ? map_id(e) : fs::path(cfg.map).stem().string();
    header.policy = policy->name();
    header.likelihood = cfg.likelihood;
    header.reward = ec.reward;
    header.geometry = world->truth.geometry;
    write_trace(record, header, out / "traces" / ("episode_" + map_id(e)));
    record.beliefs.clear();
    records.push_back(std::move(record));
  }
  const auto rows = summarize(records);
  std::ofstream csv(out / "summary.csv", std::ios::trunc);
  write_summary_csv(rows, csv);
  if (!csv) throw IoError("write failed: summary.csv");
  write_summary_csv(rows, std::cout);
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  BenchConfig bc;
  bc.reps = cfg.reps;
  bc.seed = cfg.seed;
  bc.cell_px = cfg.geometry.cell_px;
  bc.resolution = cfg.geometry.resolution;
  const auto rows = run_benchmark(cfg.grids, bc);
  write_benchmark_csv(rows, std::cout);
  if (!cfg.out.empty() && cfg.out != "out") {
    const fs::path path(cfg.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream csv(path, std::ios::trunc);
    write_benchmark_csv(rows, csv);
    if (!csv) throw IoError("write failed: " + cfg.out);
  }
  return 0;
}

int cmd_serve(const RunConfig& cfg) {
  const std::string default_id = cfg.map.empty() ? "0" : fs::path(cfg.map).stem().string();
  WorldSource source = [cfg, default_id](const std::string& id) -> std::shared_ptr<const World> {
    if (!cfg.map.empty()) return id == default_id ? make_run_world(cfg, 0) : nullptr;
    std::size_t used = 0;
    const unsigned long long index = std::stoull(id, &used);
    if (used != id.size()) return nullptr;
    return make_run_world(cfg, index);
  };
  const EpisodeConfig ec = episode_config(cfg);
  const auto coarse = make_likelihood(cfg);
  auto make_server = [&] { return EnvServer(source, ec, default_id, coarse); };
  if (cfg.serve_addr == "stdio") {
    EnvServer server = make_server();
    serve_stream(server, std::cin, std::cout);
  } else {
    std::cerr << "serving on " << cfg.serve_addr << '\n';
    serve_tcp(cfg.serve_addr, make_server);
  }
  return 0;
}

int cmd_scan_matrix(const RunConfig& cfg) {
  if (cfg.map.empty()) throw ConfigurationError("scan-matrix needs --map");
  const GridMap map = read_map(cfg.map);
  const ScanMatrix matrix = build_scan_matrix(map);
  write_scan_matrix(matrix, cfg.out);
  std::cout << "wrote " << matrix.ranges().rows() << " x " << matrix.beams() << " scan matrix to "
            << cfg.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep active localization engine"};
  app.require_subcommand(1);

  Flags maps_f, data_f, run_f, bench_f, serve_f, matrix_f;

  auto* gen_maps = app.add_subcommand("gen-maps", "generate maze maps as PGM + JSON");
  add_common(gen_maps, maps_f);
  maps_f.add<int>(gen_maps, "--count", "number of maps", [](RunConfig& c, const int& v) { c.count = v; });

  auto* gen_data = app.add_subcommand("gen-dataset", "export (map, scan, likelihood) triplets");
  add_common(gen_data, data_f);
  data_f.add<int>(gen_data, "--maps", "number of maps", [](RunConfig& c, const int& v) { c.maps = v; });
  data_f.add<int>(gen_data, "--poses", "samples per map", [](RunConfig& c, const int& v) { c.poses = v; });
  data_f.add<bool>(gen_data, "--domain-randomization", "randomize pose, scan, map and temperature",
                   [](RunConfig& c, const bool& v) { c.domain_randomization = v; });

  auto* run = app.add_subcommand("run", "run episodes, write traces and a summary CSV");
  add_common(run, run_f);
  add_episode_flags(run, run_f);
  run_f.add<int>(run, "--episodes", "number of episodes", [](RunConfig& c, const int& v) { c.episodes = v; });

  auto* bench = app.add_subcommand("bench", "time likelihood evaluation and AML decisions");
  add_common(bench, bench_f);
  bench_f.add<int>(bench, "--reps", "repetitions per grid", [](RunConfig& c, const int& v) { c.reps = v; });
  bench_f.add<std::string>(bench, "--grids", "grid list as ThetaxNxM,...",
                           [](RunConfig& c, const std::string& v) { c.grids = parse_grids(v); });

  auto* serve = app.add_subcommand("serve", "serve the environment protocol");
  add_common(serve, serve_f);
  add_episode_flags(serve, serve_f);
  serve_f.add<std::string>(serve, "--serve-addr", "stdio or host:port",
                           [](RunConfig& c, const std::string& v) { c.serve_addr = v; });

  auto* matrix = app.add_subcommand("scan-matrix", "precompute the scan matrix cache for a map");
  add_common(matrix, matrix_f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_maps->parsed()) return cmd_gen_maps(maps_f.resolve());
    if (gen_data->parsed()) return cmd_gen_dataset(data_f.resolve());
    if (run->parsed()) return cmd_run(run_f.resolve());
    if (bench->parsed()) return cmd_bench(bench_f.resolve());
    if (serve->parsed()) return cmd_serve(serve_f.resolve());
    if (matrix->parsed()) return cmd_scan_matrix(matrix_f.resolve());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
