#pragma once

#include "dal/policy.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dal {

enum class RewardKind { BelGT, InfoGain, BelNew, Expl, BelEnt, HitRate, Dist };

std::string to_string(RewardKind kind);
/// Accepts the short names: bel-gt, info-gain, bel-new, expl, bel-ent, hit-rate, dist.
RewardKind reward_kind_from_string(const std::string& name);

/// Actuation error applied to the true robot: displacement scaled by
/// (1 + eps), eps ~ N(0, scale_sigma), and heading jitter per step.
struct ActuationNoise {
  double scale_sigma = 0.05;
  double heading_sigma_deg = 1.0;

  static ActuationNoise none() { return {0.0, 0.0}; }
};

struct EpisodeConfig {
  int horizon = 11;
  RewardKind reward = RewardKind::BelGT;
  LidarConfig lidar;
  ScanNoise sensor;
  ActuationNoise actuation;
  MotionNoise filter_noise;
  /// Spawn offset from the centroid, uniform in +- this fraction of the pitch.
  double spawn_offset = 0.0;
  /// Temperature of the coarse scan-matching likelihood used by the filter.
  double sm_beta = 40.0;
  HierarchyConfig hierarchy;
  FineMatchConfig fine;
  bool drift_correction = true;
  int correction_every = 1;
};

/// Named bundle of noise settings: "none", "moderate" or "heavy".
struct NoiseProfile {
  std::string name = "none";
  ScanNoise sensor;
  ActuationNoise actuation = ActuationNoise::none();
  MotionNoise filter_noise = MotionNoise::none();
  double spawn_offset = 0.0;
  int flip_count = 0;  // pixel flips on the filter's map copy
  MorphConfig map_morph;
};

NoiseProfile noise_profile(const std::string& name);
void apply_profile(const NoiseProfile& profile, EpisodeConfig& cfg);

/// True map for ray casting plus the (possibly perturbed) copy the filter and
/// likelihood models see, with its scan matrix.
struct World {
  GridMap truth;
  GridMap belief_map;
  std::shared_ptr<const ScanMatrix> scan_matrix;
};

std::shared_ptr<const World> make_world(GridMap truth, int flip_count = 0,
                                        const MorphConfig& morph = {}, std::uint64_t seed = 0,
                                        const LidarConfig& lidar = {});

struct Observation {
  BeliefGrid belief;
  Image low_res_map;   // obstacle indicator max-pooled to N x M
  Image low_res_scan;  // robot-centric scan image max-pooled to N x M
};

struct StepInfo {
  int step = 0;
  CellPose true_cell;
  CellPose believed_cell;
  ContinuousPose true_pose;
  double wasserstein = 0.0;
  double belief_at_true = 0.0;
  bool hit = false;
  bool degenerate = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EpisodeState {
  ContinuousPose true_pose;
  CellPose true_cell;
  BeliefGrid belief;
  int step = 0;
  int horizon = 0;
  Rng motion_rng;
  Rng sensor_rng;
  std::set<CellPose> visited_true;
  std::set<CellPose> visited_believed;
  bool degenerate = false;
  Scan last_scan;
};

/// Expected Manhattan pose distance between the belief and the true pose,
/// with the heading term taken circularly.
double wasserstein(const BeliefGrid& belief, const CellPose& truth);

int manhattan(const CellPose& a, const CellPose& b, int headings);

/// Nearest free coarse centroid and nearest heading index.
CellPose snap_pose(const GridMap& map, const ContinuousPose& pose);

/// Reward for the transition prev -> state. Visited sets are read from prev.
double reward(RewardKind kind, const EpisodeState& state, const EpisodeState& prev);

Image downsample_max(const Eigen::Ref<const Image>& image, int rows, int cols);

class Episode {
 public:
  Episode(std::shared_ptr<const World> world, EpisodeConfig cfg,
          std::shared_ptr<const LikelihoodProvider> coarse = nullptr,
          std::shared_ptr<const LikelihoodProvider> fine = nullptr);

  Observation reset(std::uint64_t seed);
  /// Reset with the spawn cell fixed (paired comparisons).
  Observation reset(std::uint64_t seed, const CellPose& start);
  StepResult step(Action action);

  bool active() const { return started_ && state_.step < state_.horizon; }
  const EpisodeState& state() const { return state_; }
  const World& world() const { return *world_; }
  const EpisodeConfig& config() const { return cfg_; }
  Observation observation() const;
  StepInfo metrics() const;

 private:
  Observation begin(std::uint64_t seed, std::optional<CellPose> start);
  void sense();
  ContinuousPose estimate_pose(const CellPose& believed) const;
  void actuate(const ContinuousPose& estimate, const CellPose& goal, const CellPose& fallback);

  std::shared_ptr<const World> world_;
  EpisodeConfig cfg_;
  std::shared_ptr<const LikelihoodProvider> coarse_;
  std::shared_ptr<const LikelihoodProvider> fine_;
  EpisodeState state_;
  bool started_ = false;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<StepInfo> infos;
  std::vector<BeliefGrid> beliefs;  // after each step, when requested
};

/// Runs one episode to its horizon with actions sampled from the policy.
EpisodeRecord run_episode(Episode& episode, const PolicyProvider& policy, std::uint64_t seed,
                          std::optional<CellPose> start = std::nullopt, bool keep_beliefs = false);

struct SummaryRow {
  int step = 0;
  double wasserstein_mean = 0.0, wasserstein_std = 0.0;
  double belief_mean = 0.0, belief_std = 0.0;
  double hit_mean = 0.0, hit_std = 0.0;
};

/// Mean and standard deviation of the three metrics per step across episodes.
std::vector<SummaryRow> summarize(const std::vector<EpisodeRecord>& records);

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);

}  // namespace dal
