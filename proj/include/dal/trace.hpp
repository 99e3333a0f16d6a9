#pragma once

#include "dal/env.hpp"

#include <filesystem>
#include <string>

namespace dal {

struct TraceHeader {
  std::uint64_t seed = 0;
  std::string map_id;
  std::string policy;
  std::string likelihood;
  RewardKind reward = RewardKind::BelGT;
  GridGeometry geometry;
};

/// Writes `<stem>.jsonl` (one header line, then one line per step) and, when
/// the record kept beliefs, `<stem>.bel`: "DALBELF1", u32 Theta, N, M, then
/// one float32 little-endian Theta x N x M snapshot per step. Step lines
/// carry the byte offset of their snapshot.
void write_trace(const EpisodeRecord& record, const TraceHeader& header,
                 const std::filesystem::path& stem);

/// Reads snapshot `index` back from a belief file.
PoseTensor<double> read_belief_snapshot(const std::filesystem::path& path, std::size_t index);

}  // namespace dal
