#include "dal/env.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace dal {

namespace {

constexpr std::array<const char*, 7> kRewardNames = {"bel-gt",  "info-gain", "bel-new", "expl",
                                                     "bel-ent", "hit-rate",  "dist"};

double wrap_pi(double a) {
  a = wrap_angle(a);
  return a > std::numbers::pi ? a - kTwoPi : a;
}

Eigen::Vector2d left_of(double heading) { return {-std::sin(heading), -std::cos(heading)}; }

}  // namespace

std::string to_string(RewardKind kind) { return kRewardNames[std::size_t(kind)]; }

RewardKind reward_kind_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kRewardNames.size(); ++i)
    if (name == kRewardNames[i]) return static_cast<RewardKind>(i);
  throw ParameterError("unknown reward kind: " + name);
}

NoiseProfile noise_profile(const std::string& name) {
  NoiseProfile p;
  p.name = name;
  if (name == "none") return p;
  if (name == "moderate") {
    p.sensor = {0.03, 0.01, 1.0};
    p.actuation = ActuationNoise{};
    p.filter_noise = MotionNoise{};
    p.spawn_offset = 0.1;
    return p;
  }
  if (name == "heavy") {
    p.sensor = {0.02, 0.0, 2.0};
    p.actuation = ActuationNoise{};
    p.filter_noise = MotionNoise{};
    p.spawn_offset = 0.1;
    p.flip_count = 100;
    return p;
  }
  throw ParameterError("unknown noise profile: " + name);
}

void apply_profile(const NoiseProfile& profile, EpisodeConfig& cfg) {
  cfg.sensor = profile.sensor;
  cfg.actuation = profile.actuation;
  cfg.filter_noise = profile.filter_noise;
  cfg.spawn_offset = profile.spawn_offset;
}

std::shared_ptr<const World> make_world(GridMap truth, int flip_count, const MorphConfig& morph,
                                        std::uint64_t seed, const LidarConfig& lidar) {
  auto world = std::make_shared<World>();
  world->belief_map = flip_count > 0 || morph.dilate_max > 0 || morph.erode_max > 0
                          ? perturb_map(truth, flip_count, morph, seed)
                          : truth;
  world->truth = std::move(truth);
  LidarConfig matrix_lidar = lidar;
  matrix_lidar.beams = 360;
  matrix_lidar.fov = kTwoPi;
  world->scan_matrix =
      std::make_shared<const ScanMatrix>(build_scan_matrix(world->belief_map, matrix_lidar));
  return world;
}

int manhattan(const CellPose& a, const CellPose& b, int headings) {
  const int dh = std::abs(a.heading - b.heading) % headings;
  return std::abs(a.row - b.row) + std::abs(a.col - b.col) + std::min(dh, headings - dh);
}

double wasserstein(const BeliefGrid& belief, const CellPose& truth) {
  const auto& v = belief.values;
  const int headings = v.headings();
  double total = 0.0;
  for (int h = 0; h < headings; ++h) {
    const int dh = std::abs(h - truth.heading) % headings;
    const int heading_cost = std::min(dh, headings - dh);
    auto plane = v.plane(h);
    for (int n = 0; n < v.rows(); ++n)
      for (int m = 0; m < v.cols(); ++m) {
        const double p = plane(n, m);
        if (p != 0.0)
          total += p * (heading_cost + std::abs(n - truth.row) + std::abs(m - truth.col));
      }
  }
  return total;
}

CellPose snap_pose(const GridMap& map, const ContinuousPose& pose) {
  const auto& g = map.geometry;
  CellPose best{0, -1, -1};
  double best_d = std::numeric_limits<double>::infinity();
  for (int n = 0; n < g.rows; ++n)
    for (int m = 0; m < g.cols; ++m) {
      if (!map.cell_free(n, m)) continue;
      const double d = (map.centroid(n, m) - Eigen::Vector2d(pose.x, pose.y)).squaredNorm();
      if (d < best_d - 1e-12) {
        best_d = d;
        best.row = n;
        best.col = m;
      }
    }
  if (best.row < 0) throw MapError("map has no free cells");
  best.heading = int(std::lround(wrap_angle(pose.heading) / g.heading_step())) % g.headings;
  return best;
}

double reward(RewardKind kind, const EpisodeState& state, const EpisodeState& prev) {
  const int headings = state.belief.values.headings();
  switch (kind) {
    case RewardKind::BelGT: return state.belief.values[state.true_cell];
    case RewardKind::InfoGain: return entropy(prev.belief) - entropy(state.belief);
    case RewardKind::BelNew:
      return prev.visited_believed.contains(map_estimate(state.belief)) ? 0.0 : 1.0;
    case RewardKind::Expl: return prev.visited_true.contains(state.true_cell) ? 0.0 : 1.0;
    case RewardKind::BelEnt: return -entropy(state.belief);
    case RewardKind::HitRate: return map_estimate(state.belief) == state.true_cell ? 1.0 : 0.0;
    case RewardKind::Dist:
      return -double(manhattan(map_estimate(state.belief), state.true_cell, headings));
  }
  throw ParameterError("unknown reward kind");
}

Image downsample_max(const Eigen::Ref<const Image>& image, int rows, int cols) {
  Image out = Image::Zero(rows, cols);
  const Eigen::Index br = image.rows() / rows;
  const Eigen::Index bc = image.cols() / cols;
  if (br * rows != image.rows() || bc * cols != image.cols())
    throw ParameterError("image size not divisible by the target grid");
  for (int n = 0; n < rows; ++n)
    for (int m = 0; m < cols; ++m) out(n, m) = image.block(n * br, m * bc, br, bc).maxCoeff();
  return out;
}

Episode::Episode(std::shared_ptr<const World> world, EpisodeConfig cfg,
                 std::shared_ptr<const LikelihoodProvider> coarse,
                 std::shared_ptr<const LikelihoodProvider> fine)
    : world_(std::move(world)), cfg_(std::move(cfg)), coarse_(std::move(coarse)),
      fine_(std::move(fine)) {
  if (!world_) throw ConfigurationError("episode needs a world");
  if (cfg_.horizon < 1) throw ParameterError("horizon must be at least 1");
  if (cfg_.correction_every < 1) throw ParameterError("correction_every must be at least 1");
  if (!coarse_) coarse_ = std::make_shared<ScanMatchingProvider>(world_->scan_matrix, cfg_.sm_beta);
  if (!fine_ && cfg_.drift_correction) {
    FineMatchConfig fine_cfg = cfg_.fine;
    fine_cfg.lidar = cfg_.lidar;
    fine_ = fine_scan_matching_provider(world_->belief_map, cfg_.hierarchy, fine_cfg);
  }
}

Observation Episode::reset(std::uint64_t seed) { return begin(seed, std::nullopt); }

Observation Episode::reset(std::uint64_t seed, const CellPose& start) { return begin(seed, start); }

Observation Episode::begin(std::uint64_t seed, std::optional<CellPose> start) {
  const GridMap& truth = world_->truth;
  const auto& g = truth.geometry;
  Rng spawn = make_rng(stream_seed(seed, Stream::Spawn));

  std::vector<std::pair<int, int>> cells;
  for (int n = 0; n < g.rows; ++n)
    for (int m = 0; m < g.cols; ++m)
      if (truth.cell_free(n, m) && truth.free_px(truth.centroid_px_row(n), truth.centroid_px_col(m)))
        cells.emplace_back(n, m);
  if (cells.empty()) throw MapError("map has no free cells");

  CellPose cell;
  if (start) {
    cell = *start;
    if (!truth.cell_free(cell.row, cell.col) || cell.heading < 0 || cell.heading >= g.headings)
      throw InvalidPoseError("start cell is not free");
  } else {
    const auto [n, m] = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(spawn)];
    cell = {std::uniform_int_distribution<int>(0, g.headings - 1)(spawn), n, m};
  }

  const Eigen::Vector2d c = truth.centroid(cell.row, cell.col);
  ContinuousPose pose{c.x(), c.y(), g.heading_angle(cell.heading)};
  if (cfg_.spawn_offset > 0.0) {
    const double r = cfg_.spawn_offset * g.cell_pitch();
    std::uniform_real_distribution<double> offset(-r, r);
    for (int attempt = 0; attempt < 32; ++attempt) {
      const ContinuousPose candidate{c.x() + offset(spawn), c.y() + offset(spawn), pose.heading};
      if (truth.free_at(candidate.x, candidate.y)) {
        pose = candidate;
        break;
      }
    }
  }

  state_ = EpisodeState{};
  state_.true_pose = pose;
  state_.true_cell = snap_pose(truth, pose);
  state_.belief = uniform_belief(world_->belief_map);
  state_.horizon = cfg_.horizon;
  state_.motion_rng = make_rng(stream_seed(seed, Stream::Motion));
  state_.sensor_rng = make_rng(stream_seed(seed, Stream::Sensor));
  started_ = true;

  sense();
  state_.visited_true.insert(state_.true_cell);
  state_.visited_believed.insert(map_estimate(state_.belief));
  return observation();
}

void Episode::sense() {
  const Scan clean = raycast(world_->truth, state_.true_pose, cfg_.lidar);
  state_.last_scan = cfg_.sensor.none() ? clean : corrupt_scan(clean, cfg_.sensor, state_.sensor_rng());
  const LikelihoodGrid lik = coarse_->coarse(world_->belief_map, state_.last_scan);
  const UpdateResult up = measurement_update(state_.belief, lik, world_->belief_map);
  state_.belief = up.belief;
  state_.degenerate = up.degenerate;
}

ContinuousPose Episode::estimate_pose(const CellPose& believed) const {
  const GridMap& map = world_->belief_map;
  const Eigen::Vector2d c = map.centroid(believed.row, believed.col);
  ContinuousPose est{c.x(), c.y(), map.geometry.heading_angle(believed.heading)};
  if (!cfg_.drift_correction || !fine_ || state_.step % cfg_.correction_every != 0) return est;
  const BlockQuery q = make_block_query(map, state_.last_scan, believed, cfg_.hierarchy);
  const Eigen::MatrixXd block = fine_->fine_block(q);
  Eigen::Index bi = 0, bj = 0;
  block.maxCoeff(&bi, &bj);
  const double pitch = map.geometry.cell_pitch();
  const double sub = pitch / cfg_.hierarchy.k;
  est.x = believed.col * pitch + (double(bj) + 0.5) * sub;
  est.y = believed.row * pitch + (double(bi) + 0.5) * sub;
  return est;
}

void Episode::actuate(const ContinuousPose& estimate, const CellPose& goal,
                      const CellPose& fallback) {
  const GridMap& truth = world_->truth;
  const auto& g = truth.geometry;
  const double goal_heading = g.heading_angle(goal.heading);
  const double turn = wrap_pi(goal_heading - estimate.heading);

  auto& rng = state_.motion_rng;
  std::normal_distribution<double> unit(0.0, 1.0);
  const double jitter = unit(rng) * cfg_.actuation.heading_sigma_deg * std::numbers::pi / 180.0;
  const double scale = 1.0 + unit(rng) * cfg_.actuation.scale_sigma;

  ContinuousPose& pose = state_.true_pose;
  pose.heading = wrap_angle(pose.heading + turn + jitter);

  // Translation commanded in the robot frame as the robot believes it to be
  // after turning, then executed from the true pose. Obstacle cells count as
  // solid even where their wall texture leaves free pixels.
  auto drive = [&](const CellPose& target_cell) {
    const Eigen::Vector2d target = world_->belief_map.centroid(target_cell.row, target_cell.col);
    const Eigen::Vector2d cmd = target - Eigen::Vector2d(estimate.x, estimate.y);
    const double fwd = cmd.dot(heading_direction(goal_heading));
    const double lat = cmd.dot(left_of(goal_heading));
    const Eigen::Vector2d disp =
        scale * (fwd * heading_direction(pose.heading) + lat * left_of(pose.heading));
    const Eigen::Vector2d start(pose.x, pose.y);
    const int steps = std::max(1, int(std::ceil(disp.norm() / (0.25 * g.resolution))));
    for (int i = 1; i <= steps; ++i) {
      const Eigen::Vector2d next = start + disp * (double(i) / steps);
      const auto [n, m] = truth.cell_of(next.x(), next.y());
      if (!truth.free_at(next.x(), next.y()) || !truth.cell_free(n, m)) return false;
    }
    pose.x = start.x() + disp.x();
    pose.y = start.y() + disp.y();
    return true;
  };
  // A blocked move falls back to re-centering in the current cell, which is
  // what the transition model assumes for blocked Forward mass.
  if (!drive(goal) && !(fallback == goal)) drive(fallback);
}

StepResult Episode::step(Action action) {
  if (!started_) throw EpisodeFinishedError("episode has not been reset");
  if (state_.step >= state_.horizon) throw EpisodeFinishedError("episode finished; call reset");

  const EpisodeState prev = state_;
  const GridMap& map = world_->belief_map;
  const CellPose believed = map_estimate(state_.belief);
  // The controller drives toward the cell ahead even when the filter's map
  // shows it blocked; the true map decides whether the robot gets there.
  CellPose goal = next_pose(map, believed, action);
  if (action == Action::Forward) {
    const auto [dr, dc] = forward_offset(map.geometry, believed.heading);
    if (map.cell_in_bounds(believed.row + dr, believed.col + dc)) {
      goal.row = believed.row + dr;
      goal.col = believed.col + dc;
    }
  }

  CellPose stay = believed;
  stay.heading = goal.heading;
  actuate(estimate_pose(believed), goal, stay);
  state_.true_cell = snap_pose(world_->truth, state_.true_pose);
  state_.belief = transition(state_.belief, action, cfg_.filter_noise, map);
  sense();
  ++state_.step;

  StepResult out;
  out.reward = reward(cfg_.reward, state_, prev);
  state_.visited_true.insert(state_.true_cell);
  state_.visited_believed.insert(map_estimate(state_.belief));
  out.done = state_.step >= state_.horizon;
  out.info = metrics();
  out.observation = observation();
  return out;
}

Observation Episode::observation() const {
  const GridMap& map = world_->belief_map;
  const auto& g = map.geometry;
  Observation obs;
  obs.belief = state_.belief;
  const Image obstacles = (1 - map.occupancy.array().cast<int>()).cast<float>().matrix();
  obs.low_res_map = downsample_max(obstacles, g.rows, g.cols);
  const ScanImage img = scan_to_image(state_.last_scan, g, g.resolution);
  obs.low_res_scan = downsample_max(img.raster.cast<float>(), g.rows, g.cols);
  return obs;
}

StepInfo Episode::metrics() const {
  StepInfo info;
  info.step = state_.step;
  info.true_cell = state_.true_cell;
  info.true_pose = state_.true_pose;
  info.believed_cell = map_estimate(state_.belief);
  info.wasserstein = wasserstein(state_.belief, state_.true_cell);
  info.belief_at_true = state_.belief.values[state_.true_cell];
  info.hit = info.believed_cell == state_.true_cell;
  info.degenerate = state_.degenerate;
  return info;
}

EpisodeRecord run_episode(Episode& episode, const PolicyProvider& policy, std::uint64_t seed,
                          std::optional<CellPose> start, bool keep_beliefs) {
  EpisodeRecord record;
  record.seed = seed;
  Observation obs = start ? episode.reset(seed, *start) : episode.reset(seed);
  Rng rng = make_rng(stream_seed(seed, Stream::Policy));
  bool done = false;
  while (!done) {
    const PolicyInput input{obs.belief, episode.world().belief_map, obs.low_res_map,
                            obs.low_res_scan};
    const ActionDistribution dist = policy.distribution(input);
    if (!is_distribution(dist, 1e-6)) throw InputError("policy returned an invalid distribution");
    const Action a = sample_action(dist, rng);
    StepResult r = episode.step(a);
    record.actions.push_back(a);
    record.rewards.push_back(r.reward);
    record.infos.push_back(r.info);
    if (keep_beliefs) record.beliefs.push_back(r.observation.belief);
    obs = std::move(r.observation);
    done = r.done;
  }
  return record;
}

std::vector<SummaryRow> summarize(const std::vector<EpisodeRecord>& records) {
  std::vector<SummaryRow> rows;
  if (records.empty()) return rows;
  std::size_t steps = 0;
  for (const auto& r : records) steps = std::max(steps, r.infos.size());
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<double> w, b, h;
    for (const auto& r : records) {
      if (s >= r.infos.size()) continue;
      w.push_back(r.infos[s].wasserstein);
      b.push_back(r.infos[s].belief_at_true);
      h.push_back(r.infos[s].hit ? 1.0 : 0.0);
    }
    auto stats = [](const std::vector<double>& x) {
      const Eigen::Map<const Eigen::ArrayXd> a(x.data(), Eigen::Index(x.size()));
      const double mean = a.mean();
      return std::pair{mean, std::sqrt((a - mean).square().mean())};
    };
    SummaryRow row;
    row.step = int(s) + 1;
    std::tie(row.wasserstein_mean, row.wasserstein_std) = stats(w);
    std::tie(row.belief_mean, row.belief_std) = stats(b);
    std::tie(row.hit_mean, row.hit_std) = stats(h);
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "step,wasserstein_mean,wasserstein_std,belief_at_true_mean,belief_at_true_std,"
         "hit_rate_mean,hit_rate_std\n";
  out << std::setprecision(9);
  for (const auto& r : rows)
    out << r.step << ',' << r.wasserstein_mean << ',' << r.wasserstein_std << ','
        << r.belief_mean << ',' << r.belief_std << ',' << r.hit_mean << ',' << r.hit_std << '\n';
}

}  // namespace dal
