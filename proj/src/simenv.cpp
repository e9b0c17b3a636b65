#include "driveimit/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "driveimit/error.hpp"

namespace driveimit {

namespace {

// Vehicles farther than this from the ego cannot interact with it within a
// step (IDM interaction at highway speeds vanishes well inside this range).
constexpr double kInteractionRadius = 250.0;

}  // namespace

Dataset::Dataset(Roadway roadway, std::vector<Trajectory> trajectories)
    : roadway_(std::move(roadway)), trajectories_(std::move(trajectories)), index_(trajectories_) {
  for (std::size_t i = 0; i < trajectories_.size(); ++i) by_id_[trajectories_[i].vehicle.id] = i;
}

const Trajectory* Dataset::find(int vehicle_id) const {
  auto it = by_id_.find(vehicle_id);
  return it == by_id_.end() ? nullptr : &trajectories_[it->second];
}

std::vector<Scene> Dataset::eligible_scenes(int horizon) const {
  std::vector<Scene> out;
  for (const auto& t : trajectories_) {
    if (t.vehicle.vclass != VehicleClass::kCar || t.degenerate) continue;
    for (int f = t.first_frame; f + horizon <= t.last_frame(); ++f) out.push_back({f, t.vehicle.id});
  }
  std::sort(out.begin(), out.end(), [](const Scene& a, const Scene& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ego_id < b.ego_id;
  });
  return out;
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::kNone: return "none";
    case Termination::kHorizon: return "horizon";
    case Termination::kCollision: return "collision";
    case Termination::kOffroad: return "offroad";
    case Termination::kReverse: return "reverse";
  }
  return "none";
}

LaneNeighbors lane_neighbors(double ego_s, double ego_length, int lane,
                             std::span<const ProjectedParticipant> others) {
  LaneNeighbors n;
  double best_ahead = kInteractionRadius;
  double best_behind = kInteractionRadius;
  for (const auto& o : others) {
    if (o.proj.lane_index != lane) continue;
    const double ds = o.proj.s - ego_s;
    const double gap = std::abs(ds) - 0.5 * (ego_length + o.p.def.length);
    if (ds >= 0.0 && ds < best_ahead) {
      best_ahead = ds;
      n.leader = Neighbor{gap, o.p.state.speed};
    } else if (ds < 0.0 && -ds < best_behind) {
      best_behind = -ds;
      n.follower = Neighbor{gap, o.p.state.speed};
    }
  }
  return n;
}

Env::Env(std::shared_ptr<const Dataset> data, SimConfig config, FeatureNormalizer normalizer)
    : data_(std::move(data)), config_(config), normalizer_(normalizer) {
  if (!(config_.dt > 0.0) || config_.horizon < 1) {
    throw Error(ErrorCode::kConfigError, "sim requires dt > 0 and horizon >= 1");
  }
  scenes_ = data_->eligible_scenes(config_.horizon);
  for (std::size_t i = 0; i < scenes_.size();) {
    std::size_t j = i;
    while (j < scenes_.size() && scenes_[j].frame == scenes_[i].frame) ++j;
    scene_frames_.push_back(scenes_[i].frame);
    frame_ranges_.push_back({i, j});
    i = j;
  }
}

FeatureVector Env::reset(Rng& rng) {
  if (scenes_.empty()) throw Error(ErrorCode::kNoEligibleScene, "no eligible scene in dataset");
  std::uniform_int_distribution<std::size_t> pick_frame(0, scene_frames_.size() - 1);
  const auto [lo, hi] = frame_ranges_[pick_frame(rng)];
  std::uniform_int_distribution<std::size_t> pick_ego(lo, hi - 1);
  return reset(scenes_[pick_ego(rng)]);
}

FeatureVector Env::reset(const Scene& scene) {
  const Trajectory* ego = data_->find(scene.ego_id);
  if (!ego || !ego->has_frame(scene.frame) || !ego->has_frame(scene.frame + config_.horizon)) {
    throw Error(ErrorCode::kNoEligibleScene, "vehicle " + std::to_string(scene.ego_id) +
                                                 " is not eligible at frame " +
                                                 std::to_string(scene.frame));
  }
  scene_ = scene;
  steps_ = 0;
  started_ = true;
  termination_ = Termination::kNone;
  ego_traj_ = ego;
  ego_def_ = ego->vehicle;
  ego_ = ego->at_frame(scene.frame);
  ego_initial_speed_ = ego_.speed;
  others_.clear();
  for (const auto& occ : data_->index().occupants(scene.frame)) {
    if (occ.vehicle_id == scene.ego_id) continue;
    const Trajectory& t = data_->trajectories()[occ.trajectory];
    others_.push_back({occ.vehicle_id, t.vehicle, &t, t.at_frame(scene.frame), {}});
  }
  refresh_observation();
  return obs_;
}

void Env::refresh_observation() {
  const Roadway& road = data_->roadway();
  projected_.clear();
  participants_.clear();
  for (const auto& o : others_) {
    Participant p{o.state, o.def};
    participants_.push_back(p);
    projected_.push_back({p, project_to_frenet(road, {o.state.x, o.state.y}, o.state.heading)});
  }
  info_ = StepInfo{};
  info_.proj = project_to_frenet(road, {ego_.x, ego_.y}, ego_.heading);
  const LaneNeighbors n = lane_neighbors(info_.proj.s, ego_def_.length, info_.proj.lane_index, projected_);
  if (n.leader) info_.leader = LeadInfo{n.leader->gap, ego_.speed - n.leader->speed};
  const CoreFeatures core = core_features(ego_, ego_def_, road, info_.proj);
  const LidarScan scan = lidar_scan(ego_, participants_);
  const IndicatorFeatures ind = indicators(ego_, ego_def_, participants_, road, info_.proj);
  info_.colliding = ind.colliding;
  info_.outer_excess = outer_marker_excess(road, info_.proj);
  info_.offroad = info_.outer_excess > config_.offroad_threshold;
  IndicatorFeatures ind_cfg = ind;
  ind_cfg.offroad = info_.offroad;
  raw_ = assemble_features(core, scan, ind_cfg);
  obs_ = normalizer_.apply(raw_);
}

void Env::advance_others() {
  const int next_frame = scene_.frame + steps_ + 1;
  EmergencyConfig em_cfg;
  em_cfg.threshold = config_.emergency_threshold;
  em_cfg.idm = config_.emergency_idm;
  em_cfg.gains = config_.lane_gains;
  em_cfg.bounds = config_.bounds;
  em_cfg.dt = config_.dt;

  std::vector<Other> next;
  next.reserve(others_.size() + 4);
  for (std::size_t i = 0; i < others_.size(); ++i) {
    Other o = others_[i];
    const FrenetProjection& proj = projected_[i].proj;
    std::optional<VehicleState> recorded;
    if (o.traj->has_frame(next_frame)) recorded = o.traj->at_frame(next_frame);

    std::optional<EgoLeadInfo> ego_ahead;
    if (!o.em.triggered && proj.lane_index == info_.proj.lane_index) {
      const double ds = info_.proj.s - proj.s;
      if (ds > 0.0 && ds < kInteractionRadius) {
        ego_ahead = EgoLeadInfo{ds - 0.5 * (ego_def_.length + o.def.length), o.state.speed - ego_.speed};
      }
    }
    std::optional<LeaderInfo> leader;
    if (o.em.triggered) {
      double best = kInteractionRadius;
      auto consider = [&](const FrenetProjection& p, double length, double speed) {
        if (p.lane_index != proj.lane_index) return;
        const double ds = p.s - proj.s;
        if (ds > 0.0 && ds < best) {
          best = ds;
          leader = LeaderInfo{ds - 0.5 * (length + o.def.length), speed};
        }
      };
      consider(info_.proj, ego_def_.length, ego_.speed);
      for (std::size_t j = 0; j < projected_.size(); ++j) {
        if (j != i) consider(projected_[j].proj, projected_[j].p.def.length, projected_[j].p.state.speed);
      }
    }
    const auto moved = emergency_wrapper_step(o.em, em_cfg, o.state, recorded, ego_ahead, leader, proj);
    if (!moved) continue;
    o.state = *moved;
    next.push_back(o);
  }
  // Vehicles entering the recording at the next frame.
  for (const auto& occ : data_->index().occupants(next_frame)) {
    if (occ.vehicle_id == scene_.ego_id) continue;
    const bool known = std::any_of(others_.begin(), others_.end(),
                                   [&](const Other& o) { return o.id == occ.vehicle_id; });
    if (known) continue;
    const Trajectory& t = data_->trajectories()[occ.trajectory];
    next.push_back({occ.vehicle_id, t.vehicle, &t, t.at_frame(next_frame), {}});
  }
  others_ = std::move(next);
}

Env::StepResult Env::advance(const VehicleState& next_ego) {
  advance_others();
  ego_ = next_ego;
  ++steps_;
  refresh_observation();
  if (info_.colliding) {
    termination_ = Termination::kCollision;
  } else if (info_.offroad) {
    termination_ = Termination::kOffroad;
  } else if (ego_.speed < 0.0) {
    termination_ = Termination::kReverse;
  } else if (steps_ >= config_.horizon) {
    termination_ = Termination::kHorizon;
  }
  return {obs_, termination_};
}

Env::StepResult Env::step(const DriveAction& action) {
  if (!started_ || terminated()) {
    throw Error(ErrorCode::kSteppedAfterTermination, "step called on a finished episode");
  }
  const DriveAction applied = clamp_action(action, config_.bounds);
  return advance(propagate(ego_, applied, config_.dt));
}

Env::StepResult Env::step_replay() {
  if (!started_ || terminated()) {
    throw Error(ErrorCode::kSteppedAfterTermination, "step called on a finished episode");
  }
  const int next_frame = scene_.frame + steps_ + 1;
  if (!ego_traj_->has_frame(next_frame)) {
    throw Error(ErrorCode::kOutOfRange, "ego recording ends before frame " + std::to_string(next_frame));
  }
  return advance(ego_traj_->at_frame(next_frame));
}

int Env::emergency_triggered_count() const {
  return static_cast<int>(
      std::count_if(others_.begin(), others_.end(), [](const Other& o) { return o.em.triggered; }));
}

namespace {

EpisodeRollout run_episode(Policy& policy, Env& env, Rng& rng) {
  EpisodeRollout ro;
  ro.scene = env.scene();
  ro.ego = env.ego_def();
  ro.steps.reserve(static_cast<std::size_t>(env.config().horizon));
  policy.reset(env);
  const double dt = env.config().dt;
  while (!env.terminated()) {
    StepRecord rec;
    rec.state = env.ego_state();
    rec.info = env.info();
    rec.obs = env.observation();
    if (policy.replays_recorded_ego()) {
      const Trajectory& t = env.ego_recording();
      const int f = env.scene().frame + env.step_count();
      const VehicleState& a = t.at_frame(f);
      const VehicleState& b = t.at_frame(f + 1);
      rec.action = {(b.speed - a.speed) / dt, wrap_angle(b.heading - a.heading) / dt};
      rec.applied = rec.action;
      env.step_replay();
    } else {
      const PolicyOutput out = policy.act(env, rec.obs, rng);
      rec.action = out.action;
      rec.log_prob = out.log_prob;
      rec.applied = clamp_action(out.action, env.config().bounds);
      env.step(out.action);
    }
    ro.steps.push_back(rec);
  }
  ro.final_state = env.ego_state();
  ro.final_info = env.info();
  ro.termination = env.termination();
  return ro;
}

}  // namespace

EpisodeRollout rollout(Policy& policy, Env& env, Rng& rng) {
  env.reset(rng);
  return run_episode(policy, env, rng);
}

EpisodeRollout rollout(Policy& policy, Env& env, const Scene& scene, Rng& rng) {
  env.reset(scene);
  return run_episode(policy, env, rng);
}

void save_rollout_csv(const std::filesystem::path& path, const EpisodeRollout& ro) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(10);
  out << "step,x,y,heading,speed,accel,turn_rate,logp,termination\n";
  for (std::size_t k = 0; k < ro.steps.size(); ++k) {
    const auto& r = ro.steps[k];
    out << k << ',' << r.state.x << ',' << r.state.y << ',' << r.state.heading << ','
        << r.state.speed << ',' << r.applied.accel << ',' << r.applied.turn_rate << ','
        << r.log_prob << ",\n";
  }
  const auto& f = ro.final_state;
  out << ro.steps.size() << ',' << f.x << ',' << f.y << ',' << f.heading << ',' << f.speed
      << ",,,," << termination_name(ro.termination) << '\n';
}

}  // namespace driveimit
