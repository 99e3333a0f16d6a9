#include "dal/trace.hpp"

#include "dal/wire.hpp"

#include <cstring>
#include <fstream>

namespace dal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'A', 'L', 'B', 'E', 'L', 'F', '1'};
constexpr std::size_t kHeaderBytes = sizeof kMagic + 3 * sizeof(std::uint32_t);

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  return fs::path(stem.string() + suffix);
}

}  // namespace

void write_trace(const EpisodeRecord& record, const TraceHeader& header, const fs::path& stem) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  const fs::path jsonl = with_suffix(stem, ".jsonl");
  const fs::path bel = with_suffix(stem, ".bel");
  const auto& g = header.geometry;
  const bool snapshots = !record.beliefs.empty();

  std::ofstream out(jsonl, std::ios::trunc);
  if (!out) throw IoError("cannot open " + jsonl.string() + " for writing");
  out << json{{"kind", "header"},
              {"version", kProtocolVersion},
              {"seed", header.seed},
              {"map_id", header.map_id},
              {"policy", header.policy},
              {"likelihood", header.likelihood},
              {"reward", to_string(header.reward)},
              {"shape", {g.headings, g.rows, g.cols}},
              {"steps", record.actions.size()},
              {"beliefs", snapshots ? bel.filename().string() : std::string()}}
             .dump()
      << '\n';

  std::ofstream bin;
  if (snapshots) {
    bin.open(bel, std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot open " + bel.string() + " for writing");
    const std::uint32_t dims[3] = {std::uint32_t(g.headings), std::uint32_t(g.rows),
                                   std::uint32_t(g.cols)};
    bin.write(kMagic, sizeof kMagic);
    bin.write(reinterpret_cast<const char*>(dims), sizeof dims);
  }
  const std::size_t snapshot_bytes = std::size_t(g.pose_count()) * sizeof(float);

  for (std::size_t s = 0; s < record.actions.size(); ++s) {
    json line{{"kind", "step"},
              {"action", int(record.actions[s])},
              {"reward", record.rewards[s]},
              {"info", encode_info(record.infos[s])}};
    if (snapshots) {
      const Tensor t = to_tensor(record.beliefs[s].values);
      line["belief_offset"] = kHeaderBytes + s * snapshot_bytes;
      line["belief_checksum"] = checksum(t);
      bin.write(reinterpret_cast<const char*>(t.data.data()), std::streamsize(snapshot_bytes));
    }
    out << line.dump() << '\n';
  }
  if (!out || (snapshots && !bin)) throw IoError("write failed for trace " + stem.string());
}

PoseTensor<double> read_belief_snapshot(const fs::path& path, std::size_t index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof kMagic];
  std::uint32_t dims[3];
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw InputError(path.string() + ": not a belief snapshot file");
  PoseTensor<double> out{int(dims[0]), int(dims[1]), int(dims[2])};
  std::vector<float> buf(std::size_t(out.values().size()));
  in.seekg(std::streamoff(kHeaderBytes + index * buf.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  if (!in) throw InputError(path.string() + ": snapshot index out of range");
  out.values() = Eigen::Map<Eigen::VectorXf>(buf.data(), Eigen::Index(buf.size())).cast<double>();
  return out;
}

}  // namespace dal
