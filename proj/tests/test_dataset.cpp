#include "fixtures.hpp"

#include "dal/dataset.hpp"
#include "dal/map_io.hpp"

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <fstream>
#include <map>

using namespace dal;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> directory_bytes(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files[fs::relative(entry.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

std::vector<nlohmann::json> manifest_lines(const fs::path& root) {
  std::ifstream in(root / "manifest.jsonl");
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
  return lines;
}

DomainRandomizationConfig small_config() {
  DomainRandomizationConfig dr;
  dr.geometry = {11, 11, 4, 9, 0.1};
  return dr;
}

}  // namespace

TEST_CASE("two maps with three poses give six samples") {
  fixtures::TempDir dir("dal_ds_count");
  const auto entries = generate_dataset(2, 3, small_config(), dir.path, 5);
  REQUIRE(entries.size() == 6);
  const auto lines = manifest_lines(dir.path);
  REQUIRE(lines.size() == 6);
  REQUIRE(fs::exists(dir.path / "maps" / "00000.pgm"));
  REQUIRE(fs::exists(dir.path / "maps" / "00001.json"));
  for (const auto& line : lines) {
    for (const char* key : {"scan", "lik", "map", "image"})
      REQUIRE(fs::exists(dir.path / line.at(key).get<std::string>()));
    REQUIRE(line.at("shape") == nlohmann::json::array({4, 11, 11}));
    const double beta = line.at("beta").get<double>();
    REQUIRE(beta >= 0.1);
    REQUIRE(beta <= 1.0);
  }
  const auto lik = read_float32(dir.path / lines[0].at("lik").get<std::string>());
  REQUIRE(lik.size() == 4 * 11 * 11);
  double total = 0.0;
  for (float v : lik) total += v;
  REQUIRE(total == Catch::Approx(1.0).margin(1e-5));
  REQUIRE(read_float32(dir.path / lines[0].at("scan").get<std::string>()).size() == 360);
  const GridMap perturbed_shape = read_map(dir.path / "maps" / "00000.pgm");
  REQUIRE(read_pgm(dir.path / lines[0].at("map").get<std::string>()).rows() ==
          perturbed_shape.height());
}

TEST_CASE("dataset bytes depend only on the seed") {
  fixtures::TempDir a("dal_ds_a"), b("dal_ds_b"), c("dal_ds_c");
  generate_dataset(2, 2, small_config(), a.path, 9);
  generate_dataset(2, 2, small_config(), b.path, 9);
  generate_dataset(2, 2, small_config(), c.path, 10);
  const auto ba = directory_bytes(a.path);
  REQUIRE(ba == directory_bytes(b.path));
  REQUIRE(ba != directory_bytes(c.path));
}

TEST_CASE("noiseless samples match their own pose") {
  fixtures::TempDir dir("dal_ds_clean");
  DomainRandomizationConfig dr = small_config();
  dr.enabled = false;
  dr.texture = TextureConfig::noise_free();
  const auto entries = generate_dataset(3, 10, dr, dir.path, 3);
  int hits = 0;
  for (const auto& e : entries) {
    const auto lik = read_float32(dir.path / e.lik_file);
    const auto best = std::max_element(lik.begin(), lik.end()) - lik.begin();
    const PoseTensor<double> shape(4, 11, 11);
    hits += shape.pose_at(best) == e.cell ? 1 : 0;
    // The exported map is the clean map.
    const GridMap clean = read_map(dir.path / "maps" / (e.map_id + ".pgm"));
    REQUIRE(read_pgm(dir.path / e.map_file) == clean.occupancy);
  }
  REQUIRE(hits >= 28);
}

TEST_CASE("randomized samples perturb the map copy and the pose") {
  fixtures::TempDir dir("dal_ds_dr");
  const auto entries = generate_dataset(1, 4, small_config(), dir.path, 3);
  const GridMap clean = read_map(dir.path / "maps" / "00000.pgm");
  int moved = 0;
  for (const auto& e : entries) {
    REQUIRE(read_pgm(dir.path / e.map_file) != clean.occupancy);
    const Eigen::Vector2d c = clean.centroid(e.cell.row, e.cell.col);
    moved += (std::abs(e.pose.x - c.x()) > 0.0 || std::abs(e.pose.y - c.y()) > 0.0) ? 1 : 0;
    REQUIRE(std::abs(e.pose.x - c.x()) <= 0.25 * 0.9 + 1e-12);
  }
  REQUIRE(moved == 4);
}

TEST_CASE("zero maps writes an empty manifest") {
  fixtures::TempDir dir("dal_ds_empty");
  REQUIRE(generate_dataset(0, 5, small_config(), dir.path / "nested", 1).empty());
  REQUIRE(fs::exists(dir.path / "nested" / "manifest.jsonl"));
  REQUIRE(fs::file_size(dir.path / "nested" / "manifest.jsonl") == 0);
}

TEST_CASE("I/O failure removes the partial manifest") {
  fixtures::TempDir dir("dal_ds_fail");
  fs::create_directories(dir.path / "samples");
  std::ofstream(dir.path / "samples" / "00001") << "in the way";
  REQUIRE_THROWS_AS(generate_dataset(2, 1, small_config(), dir.path, 1), IoError);
  REQUIRE(!fs::exists(dir.path / "manifest.jsonl"));
}

TEST_CASE("dataset parameter checks") {
  fixtures::TempDir dir("dal_ds_params");
  DomainRandomizationConfig dr = small_config();
  REQUIRE_THROWS_AS(generate_dataset(-1, 1, dr, dir.path, 1), ParameterError);
  dr.beta_min = 0.0;
  REQUIRE_THROWS_AS(generate_dataset(1, 1, dr, dir.path, 1), ParameterError);
}

TEST_CASE("float32 files round trip") {
  fixtures::TempDir dir("dal_f32");
  const std::vector<float> v{1.5f, -2.0f, std::numeric_limits<float>::infinity()};
  write_float32(v.data(), v.size(), dir.path / "v.bin");
  REQUIRE(read_float32(dir.path / "v.bin") == v);
  REQUIRE(fs::file_size(dir.path / "v.bin") == 12);
}
