// Runs each acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is nonzero when any fails.

#include "fixtures.hpp"
#include "oracles.hpp"

#include "dal/benchmark.hpp"
#include "dal/dataset.hpp"
#include "dal/map_io.hpp"
#include "run_config.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace dal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

template <class F>
void criterion(const std::string& name, F&& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(4);
  ss << x;
  return ss.str();
}

std::shared_ptr<const PolicyProvider> aml_for(const World& world, const EpisodeConfig& ec) {
  LookaheadConfig lc;
  lc.scan_matrix = world.scan_matrix;
  lc.beta = ec.sm_beta;
  lc.noise = ec.filter_noise;
  return aml_policy(lc);
}

// ---------------------------------------------------------------------------

Outcome table_trend() {
  BenchConfig bc;
  bc.reps = 20;
  bc.aml_reps = 0;
  const auto rows = run_benchmark({{4, 11, 11}, {4, 33, 33}, {8, 33, 33}, {24, 33, 33}}, bc);
  bool increasing = true;
  std::string detail = "seconds";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += " " + fmt(rows[i].sm_seconds);
    if (i > 0 && !(rows[i].sm_seconds > rows[i - 1].sm_seconds)) increasing = false;
  }
  const double ratio = rows[2].sm_seconds / rows[1].sm_seconds;
  detail += "; 8x33x33 / 4x33x33 = " + fmt(ratio);
  return {increasing && ratio >= 1.5 && ratio <= 2.5, detail};
}

Outcome noiseless_convergence() {
  cli::RunConfig rc;
  rc.seed = 100;
  const EpisodeConfig ec = cli::episode_config(rc);
  double hit = 0.0, w = 0.0;
  const int episodes = 20;
  for (int e = 0; e < episodes; ++e) {
    const auto world = cli::make_run_world(rc, std::uint64_t(e));
    Episode episode(world, ec);
    const auto record = run_episode(episode, *aml_for(*world, ec), derive_seed(rc.seed, {std::uint64_t(e)}));
    hit += record.infos[9].hit ? 1.0 : 0.0;
    w += record.infos[9].wasserstein;
  }
  hit /= episodes;
  w /= episodes;
  return {hit >= 0.9 && w <= 0.5, "hit@10 " + fmt(hit) + ", W@10 " + fmt(w)};
}

Outcome policy_ordering() {
  cli::RunConfig rc;
  rc.seed = 200;
  rc.noise_profile = "moderate";
  const EpisodeConfig ec = cli::episode_config(rc);
  const int episodes = 50;
  double w_aml = 0.0, w_random = 0.0, w_left = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const auto world = cli::make_run_world(rc, std::uint64_t(e));
    const std::uint64_t seed = derive_seed(rc.seed, {std::uint64_t(e)});
    std::vector<CellPose> free;
    const auto& g = world->truth.geometry;
    for (int h = 0; h < g.headings; ++h)
      for (int n = 0; n < g.rows; ++n)
        for (int m = 0; m < g.cols; ++m)
          if (world->truth.cell_free(n, m)) free.push_back({h, n, m});
    Rng rng = make_rng(seed);
    const CellPose start = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];

    auto final_w = [&](const PolicyProvider& policy) {
      Episode episode(world, ec);
      return run_episode(episode, policy, seed, start).infos.back().wasserstein;
    };
    w_aml += final_w(*aml_for(*world, ec));
    w_random += final_w(*random_policy());
    w_left += final_w(*constant_policy(Action::Left));
  }
  w_aml /= episodes;
  w_random /= episodes;
  w_left /= episodes;
  return {w_aml < w_random && w_random <= w_left,
          "final W aml " + fmt(w_aml) + ", random " + fmt(w_random) + ", left " + fmt(w_left)};
}

Outcome oracle_equivalence() {
  int checked = 0, mismatched = 0;
  for (const auto& rows : fixtures::small_fixtures()) {
    const GridMap map = fixtures::ascii_map(rows);
    const auto matrix = std::make_shared<const ScanMatrix>(build_scan_matrix(map));
    LookaheadConfig lc;
    lc.scan_matrix = matrix;
    lc.noise = MotionNoise::none();
    lc.top_h = int(map.geometry.pose_count());
    const auto aml = aml_policy(lc);
    const oracle::BruteForceAml brute(map, *matrix, lc.beta);
    const Image low = Image::Zero(map.geometry.rows, map.geometry.cols);

    std::vector<CellPose> free;
    const auto& g = map.geometry;
    for (int h = 0; h < g.headings; ++h)
      for (int n = 0; n < g.rows; ++n)
        for (int m = 0; m < g.cols; ++m)
          if (map.cell_free(n, m)) free.push_back({h, n, m});

    std::vector<BeliefGrid> beliefs;
    for (std::size_t i = 0; i < free.size(); ++i) {
      // Point mass at each free state, and that state paired with the next one.
      BeliefGrid point{PoseTensor<double>(g.headings, g.rows, g.cols), 0};
      point.values[free[i]] = 1.0;
      beliefs.push_back(point);
      BeliefGrid pair = point;
      pair.values[free[i]] = 0.5;
      pair.values[free[(i + 1) % free.size()]] += 0.5;
      beliefs.push_back(pair);
    }
    std::mt19937_64 rng(31);
    for (int i = 0; i < 20; ++i) beliefs.push_back(fixtures::random_belief_on(map, rng));
    beliefs.push_back(uniform_belief(map));

    for (const auto& b : beliefs) {
      const auto want = brute.expected_entropies(b);
      const auto got = aml->expected_entropies(b, map);
      const auto d = aml->distribution(PolicyInput{b, map, low, low});
      const int chosen = int(std::max_element(d.begin(), d.end()) - d.begin());
      bool ok = chosen == oracle::BruteForceAml::choose(want, lc.tie_tolerance);
      for (int a = 0; a < 3; ++a) ok = ok && std::abs(got[std::size_t(a)] - want[std::size_t(a)]) <= 1e-9;
      ++checked;
      mismatched += ok ? 0 : 1;
    }
  }

  int w_bad = 0, est_bad = 0;
  std::mt19937_64 rng(47);
  std::uniform_int_distribution<int> h(0, 7), n(0, 12), m(0, 14);
  for (int i = 0; i < 100; ++i) {
    const BeliefGrid b = fixtures::random_belief(8, 13, 15, rng);
    const CellPose t{h(rng), n(rng), m(rng)};
    w_bad += std::abs(wasserstein(b, t) - oracle::wasserstein(b, t)) <= 1e-9 ? 0 : 1;
    est_bad += map_estimate(b) == oracle::argmax(b) ? 0 : 1;
  }
  return {mismatched == 0 && w_bad == 0 && est_bad == 0,
          std::to_string(checked) + " AML beliefs, " + std::to_string(mismatched) + " mismatched; W mismatches " +
              std::to_string(w_bad) + "/100; estimate mismatches " + std::to_string(est_bad) + "/100"};
}

Outcome filter_invariants() {
  std::vector<std::string> failed;
  const GridMap map = generate_map(GridGeometry{11, 11, 4, 9, 0.1}, 0.1, TextureConfig{}, 77);
  const auto& g = map.geometry;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 2);

  double worst = 0.0;
  BeliefGrid b = uniform_belief(map);
  for (int call = 0; call < 10000; ++call) {
    if (call % 2 == 0) {
      const MotionNoise noise{u(rng), u(rng), u(rng), u(rng)};
      b = transition(b, static_cast<Action>(pick(rng)), noise, map);
    } else {
      LikelihoodGrid lik;
      lik.values = PoseTensor<double>(g.headings, g.rows, g.cols);
      for (Eigen::Index i = 0; i < lik.values.size(); ++i) lik.values.values()[i] = u(rng) < 0.5 ? 0.0 : u(rng);
      b = measurement_update(b, lik, map).belief;
    }
    worst = std::max(worst, std::abs(b.values.sum() - 1.0));
    if (b.values.values().minCoeff() < 0.0) failed.push_back("negative mass");
    if (call % 500 == 0) b = fixtures::random_belief_on(map, rng);
  }
  if (worst > 1e-9) failed.push_back("mass drift " + fmt(worst));

  const BeliefGrid r = fixtures::random_belief_on(map, rng);
  const BeliefGrid lr = transition(transition(r, Action::Right, MotionNoise::none(), map), Action::Left,
                                   MotionNoise::none(), map);
  if ((lr.values.values() - r.values.values()).cwiseAbs().maxCoeff() > 1e-15) failed.push_back("L o R");

  const GridMap box = fixtures::ascii_map({"#####", "#...#", "#####"});
  BeliefGrid wall{PoseTensor<double>(4, 3, 5), 0};
  wall.values[CellPose{1, 1, 2}] = 1.0;  // facing north into the wall
  const BeliefGrid after = transition(wall, Action::Forward, MotionNoise::none(), box);
  if (after.values[CellPose{1, 1, 2}] != 1.0) failed.push_back("blocked forward");

  for (int trial = 0; trial < 20; ++trial) {
    PoseTensor<double> scores(4, 5, 5);
    for (Eigen::Index i = 0; i < scores.size(); ++i) scores.values()[i] = 2.0 * u(rng) - 1.0;
    const auto best = oracle::argmax(BeliefGrid{scores, 0});
    for (double beta : {0.1, 1.0, 10.0, 1000.0})
      if (map_estimate(BeliefGrid{tempered_softmax(scores, beta).values, 0}) != best)
        failed.push_back("softmax argmax at beta " + fmt(beta));
  }

  LikelihoodGrid coarse;
  coarse.values = PoseTensor<double>(g.headings, g.rows, g.cols);
  for (Eigen::Index i = 0; i < coarse.values.size(); ++i) coarse.values.values()[i] = u(rng);
  coarse.values.values() /= coarse.values.sum();
  HierarchyConfig hc;
  const Eigen::Vector2d c = map.centroid(1, 1);
  const Scan scan = raycast(map, ContinuousPose{c.x(), c.y(), 0.0});
  const auto fine = refine_hierarchical(coarse, map, scan, hc, *fine_scan_matching_provider(map, hc));
  if (std::abs(fine.values.sum() - 1.0) > 1e-9) failed.push_back("refinement mass");
  const auto refined = top_entries(coarse.values, hc.top_c);
  for (Eigen::Index i = 0; i < coarse.values.size(); ++i) {
    const CellPose p = coarse.values.pose_at(i);
    const double s = fine.values.plane(p.heading).block(p.row * hc.k, p.col * hc.k, hc.k, hc.k).sum();
    const bool is_refined = std::find(refined.begin(), refined.end(), i) != refined.end();
    const double corner = fine.values.plane(p.heading)(p.row * hc.k, p.col * hc.k);
    if (std::abs(s - coarse.values.values()[i]) > 1e-9 ||
        (!is_refined && std::abs(corner * hc.k * hc.k - coarse.values.values()[i]) > 1e-12)) {
      failed.push_back("block sum");
      break;
    }
  }

  std::string detail = "10000 fuzzed calls, max |sum - 1| " + fmt(worst);
  for (const auto& f : failed) detail += "; failed " + f;
  return {failed.empty(), detail};
}

std::string hash_directory(const fs::path& root) {
  std::map<std::string, std::uint64_t> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::uint64_t h = 1469598103934665603ull;
    for (char ch; in.get(ch);) h = (h ^ std::uint8_t(ch)) * 1099511628211ull;
    files[fs::relative(entry.path(), root).string()] = h;
  }
  std::ostringstream ss;
  for (const auto& [name, h] : files) ss << name << ' ' << std::hex << h << '\n';
  return ss.str();
}

int run_cli(const std::vector<std::string>& args) {
  std::string cmd = DAL_CLI_PATH;
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " > /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome dataset_determinism() {
  fixtures::TempDir dir("dal_accept_dataset");
  const std::vector<std::string> args{"gen-dataset", "--maps", "3", "--poses", "4", "--seed", "11",
                                      "--textured", "true"};
  auto with_out = [&](const fs::path& out) {
    auto a = args;
    a.push_back("--out");
    a.push_back(out.string());
    return run_cli(a);
  };
  if (with_out(dir.path / "a") != 0 || with_out(dir.path / "b") != 0) return {false, "gen-dataset failed"};
  const std::string ha = hash_directory(dir.path / "a");
  const bool same = ha == hash_directory(dir.path / "b") && !ha.empty();

  if (run_cli({"gen-dataset", "--maps", "20", "--poses", "10", "--seed", "12", "--domain-randomization", "false",
               "--out", (dir.path / "clean").string()}) != 0)
    return {false, "noiseless gen-dataset failed"};
  std::ifstream manifest(dir.path / "clean" / "manifest.jsonl");
  int samples = 0, hits = 0;
  for (std::string line; std::getline(manifest, line);) {
    const auto j = nlohmann::json::parse(line);
    const auto lik = read_float32(dir.path / "clean" / j.at("lik").get<std::string>());
    const auto shape = j.at("shape");
    const PoseTensor<double> grid(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>());
    const auto best = std::max_element(lik.begin(), lik.end()) - lik.begin();
    const auto cell = j.at("cell");
    const CellPose spawn{cell[0].get<int>(), cell[1].get<int>(), cell[2].get<int>()};
    hits += grid.pose_at(best) == spawn ? 1 : 0;
    ++samples;
  }
  const double rate = samples > 0 ? double(hits) / samples : 0.0;
  return {same && samples == 200 && rate >= 0.95,
          std::string(same ? "identical" : "different") + " directories; argmax hit " + std::to_string(hits) + "/" +
              std::to_string(samples)};
}

Outcome dr_bound() {
  cli::RunConfig rc;
  rc.seed = 300;
  rc.noise_profile = "heavy";
  const EpisodeConfig ec = cli::episode_config(rc);
  cli::RunConfig clean = rc;
  clean.noise_profile = "none";
  const EpisodeConfig ec_clean = cli::episode_config(clean);

  const int episodes = 50;
  int beat = 0;
  double w_noisy = 0.0, w_clean = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t seed = derive_seed(rc.seed, {std::uint64_t(e)});
    const auto world = cli::make_run_world(rc, std::uint64_t(e));
    Episode episode(world, ec);
    const auto record = run_episode(episode, *aml_for(*world, ec), seed);
    const StepInfo& last = record.infos.back();
    const double baseline = wasserstein(uniform_belief(world->belief_map), last.true_cell);
    beat += last.wasserstein < baseline ? 1 : 0;
    w_noisy += last.wasserstein;

    const auto clean_world = cli::make_run_world(clean, std::uint64_t(e));
    Episode reference(clean_world, ec_clean);
    w_clean += run_episode(reference, *aml_for(*clean_world, ec_clean), seed).infos.back().wasserstein;
  }
  w_noisy /= episodes;
  w_clean /= episodes;
  const double factor = w_noisy / std::max(w_clean, 1e-12);
  return {beat >= 40 && std::isfinite(w_noisy),
          std::to_string(beat) + "/50 beat the uniform baseline; final W " + fmt(w_noisy) + " vs noiseless " +
              fmt(w_clean) + " (factor " + fmt(factor) + ")"};
}

}  // namespace

int main() {
  criterion("likelihood_scaling_trend", table_trend);
  criterion("noiseless_convergence", noiseless_convergence);
  criterion("policy_ordering", policy_ordering);
  criterion("oracle_equivalence", oracle_equivalence);
  criterion("filter_invariants", filter_invariants);
  criterion("dataset_determinism", dataset_determinism);
  criterion("domain_randomization_bound", dr_bound);
  return failures == 0 ? 0 : 1;
}
