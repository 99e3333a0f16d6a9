#pragma once

#include "dal/types.hpp"

#include <iosfwd>
#include <vector>

namespace dal {

struct BenchGrid {
  int headings = 4;
  int rows = 11;
  int cols = 11;
};

struct BenchRow {
  BenchGrid grid;
  int reps = 0;
  double sm_seconds = 0.0;   // mean scan-matching likelihood evaluation
  double aml_seconds = 0.0;  // mean AML decision, 0 when skipped
};

struct BenchConfig {
  int reps = 20;
  int aml_reps = 3;  // 0 skips the AML timing
  int cell_px = 9;
  double resolution = 0.1;
  std::uint64_t seed = 1;
};

/// Times one likelihood evaluation (reduce, cosine scores, softmax) and one
/// AML decision per grid on a generated maze. Scan matrix construction is
/// excluded.
std::vector<BenchRow> run_benchmark(const std::vector<BenchGrid>& grids, const BenchConfig& cfg);

void write_benchmark_csv(const std::vector<BenchRow>& rows, std::ostream& out);

}  // namespace dal
