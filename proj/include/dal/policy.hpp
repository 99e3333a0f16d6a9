#pragma once

#include "dal/filter.hpp"
#include "dal/rng.hpp"

#include <array>
#include <memory>

namespace dal {

/// Probabilities for Left, Right, Forward.
using ActionDistribution = std::array<double, 3>;

/// State handed to a policy: posterior belief plus the downsampled map and
/// scan image (N x M each).
struct PolicyInput {
  const BeliefGrid& belief;
  const GridMap& map;
  const Image& low_res_map;
  const Image& low_res_scan;
};

class PolicyProvider {
 public:
  virtual ~PolicyProvider() = default;
  virtual ActionDistribution distribution(const PolicyInput& input) const = 0;
  virtual std::string name() const = 0;
};

/// Inverse-CDF draw from a distribution using one uniform sample.
Action sample_action(const ActionDistribution& dist, Rng& rng);

bool is_distribution(const ActionDistribution& dist, double tol = 1e-9);

std::shared_ptr<PolicyProvider> random_policy();

/// One-hot on a fixed action; a degenerate baseline.
std::shared_ptr<PolicyProvider> constant_policy(Action action);

/// Forward unless the believed pose faces a blocked cell, then Left.
std::shared_ptr<PolicyProvider> greedy_follow_policy();

struct LookaheadConfig {
  int top_h = 16;
  double beta = 40.0;
  MotionNoise noise;
  std::shared_ptr<const ScanMatrix> scan_matrix;
  /// Expected entropies closer than this count as tied.
  double tie_tolerance = 1e-3;
};

/// Active Markov Localization with one-step lookahead.
class AmlPolicy final : public PolicyProvider {
 public:
  explicit AmlPolicy(LookaheadConfig cfg);

  ActionDistribution distribution(const PolicyInput& input) const override;
  std::string name() const override { return "aml"; }

  /// Expected posterior entropy for each action (Left, Right, Forward).
  std::array<double, 3> expected_entropies(const BeliefGrid& belief, const GridMap& map) const;

 private:
  LookaheadConfig cfg_;
  ScanMatcher matcher_;
};

std::shared_ptr<AmlPolicy> aml_policy(LookaheadConfig cfg);

/// First action whose value is within `tol` of the smallest.
int argmin_action(const std::array<double, 3>& values, double tol = 1e-12);

}  // namespace dal
