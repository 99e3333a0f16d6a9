#include "dal/policy.hpp"

#include <algorithm>
#include <map>

namespace dal {

namespace {

class RandomPolicy final : public PolicyProvider {
 public:
  ActionDistribution distribution(const PolicyInput&) const override {
    return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  }
  std::string name() const override { return "random"; }
};

class ConstantPolicy final : public PolicyProvider {
 public:
  explicit ConstantPolicy(Action a) : action_(a) {}
  ActionDistribution distribution(const PolicyInput&) const override {
    ActionDistribution d{0.0, 0.0, 0.0};
    d[std::size_t(action_)] = 1.0;
    return d;
  }
  std::string name() const override { return std::string("always-") + to_string(action_); }

 private:
  Action action_;
};

class GreedyFollowPolicy final : public PolicyProvider {
 public:
  ActionDistribution distribution(const PolicyInput& input) const override {
    const CellPose believed = map_estimate(input.belief);
    if (forward_blocked(input.map, believed)) return {1.0, 0.0, 0.0};
    return {0.0, 0.0, 1.0};
  }
  std::string name() const override { return "greedy"; }
};

}  // namespace

Action sample_action(const ActionDistribution& dist, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    if (u < acc) return static_cast<Action>(i);
  }
  for (std::size_t i = dist.size(); i-- > 0;)
    if (dist[i] > 0.0) return static_cast<Action>(i);
  return Action::Left;
}

bool is_distribution(const ActionDistribution& dist, double tol) {
  double total = 0.0;
  for (const double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    total += p;
  }
  return std::abs(total - 1.0) <= tol;
}

std::shared_ptr<PolicyProvider> random_policy() { return std::make_shared<RandomPolicy>(); }

std::shared_ptr<PolicyProvider> constant_policy(Action action) {
  return std::make_shared<ConstantPolicy>(action);
}

std::shared_ptr<PolicyProvider> greedy_follow_policy() {
  return std::make_shared<GreedyFollowPolicy>();
}

int argmin_action(const std::array<double, 3>& values, double tol) {
  const double low = *std::min_element(values.begin(), values.end());
  for (int i = 0; i < 3; ++i)
    if (values[std::size_t(i)] <= low + tol) return i;
  return 0;
}

AmlPolicy::AmlPolicy(LookaheadConfig cfg)
    : cfg_(std::move(cfg)),
      matcher_(cfg_.scan_matrix ? *cfg_.scan_matrix
                                : throw ConfigurationError("AML needs a scan matrix")) {
  if (cfg_.top_h < 1) throw ParameterError("top_h must be at least 1");
  if (!(cfg_.beta > 0.0)) throw ParameterError("temperature must be positive");
  if (!(cfg_.tie_tolerance >= 0.0)) throw ParameterError("tie tolerance must be nonnegative");
}

std::array<double, 3> AmlPolicy::expected_entropies(const BeliefGrid& belief,
                                                    const GridMap& map) const {
  const ScanMatrix& matrix = *cfg_.scan_matrix;
  std::map<Eigen::Index, LikelihoodGrid> simulated;
  std::array<double, 3> out{};
  for (const Action a : kActions) {
    const BeliefGrid prior = transition(belief, a, cfg_.noise, map);
    double weight = 0.0;
    double acc = 0.0;
    for (const Eigen::Index i : top_entries(prior.values, cfg_.top_h)) {
      const double w = prior.values.values()[i];
      if (w <= 0.0) continue;
      const Eigen::Index row = matrix.row_index(prior.values.pose_at(i));
      if (!matrix.valid(row)) continue;
      auto it = simulated.find(row);
      if (it == simulated.end())
        it = simulated.emplace(row, tempered_softmax(matcher_.scores_for_row(row), cfg_.beta)).first;
      const UpdateResult post = measurement_update(prior, it->second, map);
      acc += w * entropy(post.belief);
      weight += w;
    }
    out[std::size_t(a)] = weight > 0.0 ? acc / weight : entropy(prior);
  }
  return out;
}

ActionDistribution AmlPolicy::distribution(const PolicyInput& input) const {
  const auto h = expected_entropies(input.belief, input.map);
  ActionDistribution d{0.0, 0.0, 0.0};
  d[std::size_t(argmin_action(h, cfg_.tie_tolerance))] = 1.0;
  return d;
}

std::shared_ptr<AmlPolicy> aml_policy(LookaheadConfig cfg) {
  return std::make_shared<AmlPolicy>(std::move(cfg));
}

}  // namespace dal
