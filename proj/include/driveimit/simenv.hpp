#pragma once

// Episode lifecycle: scene initialization from recorded data, ego stepping,
// replay of other traffic with emergency braking, termination and rollout
// capture.

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "driveimit/features.hpp"
#include "driveimit/ingest.hpp"
#include "driveimit/rng.hpp"
#include "driveimit/rulectl.hpp"

namespace driveimit {

struct SimConfig {
  double dt = 0.1;
  int horizon = 100;
  ActionBounds bounds;
  double offroad_threshold = kOffroadThreshold;
  double emergency_threshold = -2.0;
  IdmParams emergency_idm;  // desired speed is set per vehicle at transition
  LaneTrackGains lane_gains;
};

struct Scene {
  int frame = 0;
  int ego_id = 0;
  bool operator==(const Scene&) const = default;
};

// Immutable recorded data shared by every environment.
class Dataset {
 public:
  Dataset(Roadway roadway, std::vector<Trajectory> trajectories);

  const Roadway& roadway() const { return roadway_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const SceneIndex& index() const { return index_; }
  const Trajectory* find(int vehicle_id) const;

  // (frame, ego) pairs where the ego is a car recorded for `horizon` more
  // frames. Sorted by frame then vehicle id.
  std::vector<Scene> eligible_scenes(int horizon) const;

 private:
  Roadway roadway_;
  std::vector<Trajectory> trajectories_;
  SceneIndex index_;
  std::unordered_map<int, std::size_t> by_id_;
};

enum class Termination { kNone, kHorizon, kCollision, kOffroad, kReverse };
std::string_view termination_name(Termination t);

struct ProjectedParticipant {
  Participant p;
  FrenetProjection proj;
};

struct LeadInfo {
  double gap = 0.0;            // bumper to bumper
  double closing_speed = 0.0;  // ego speed minus leader speed
};

// Ego situation at one instant, kept for metrics.
struct StepInfo {
  FrenetProjection proj;
  std::optional<LeadInfo> leader;
  bool colliding = false;
  bool offroad = false;
  double outer_excess = 0.0;
};

struct StepRecord {
  VehicleState state;
  StepInfo info;
  FeatureVector obs{};     // normalized observation at this state
  DriveAction action;      // as sampled by the policy
  DriveAction applied;     // after clamping
  double log_prob = 0.0;
  double reward = 0.0;
};

struct EpisodeRollout {
  Scene scene;
  VehicleDef ego;
  std::vector<StepRecord> steps;
  VehicleState final_state;
  StepInfo final_info;
  Termination termination = Termination::kNone;

  std::size_t length() const { return steps.size(); }
  // State after k steps, k <= length(); later k hold the final state.
  const VehicleState& state_at(std::size_t k) const {
    return k < steps.size() ? steps[k].state : final_state;
  }
  const StepInfo& info_at(std::size_t k) const { return k < steps.size() ? steps[k].info : final_info; }
};

struct PolicyOutput {
  DriveAction action;
  double log_prob = 0.0;
};

class Env;

// A driving model that controls the ego. Instances carry per-episode state
// (recurrent memory, lane targets) and are cloned per episode.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::unique_ptr<Policy> clone() const = 0;
  virtual std::string name() const = 0;
  virtual void reset(const Env& env) { (void)env; }
  virtual PolicyOutput act(const Env& env, const FeatureVector& obs, Rng& rng) = 0;
  // The ego follows its recording instead of acting.
  virtual bool replays_recorded_ego() const { return false; }
};

// Leader and follower of a given lane around a longitudinal position.
struct LaneNeighbors {
  std::optional<Neighbor> leader;
  std::optional<Neighbor> follower;
};
LaneNeighbors lane_neighbors(double ego_s, double ego_length, int lane,
                             std::span<const ProjectedParticipant> others);

class Env {
 public:
  Env(std::shared_ptr<const Dataset> data, SimConfig config, FeatureNormalizer normalizer = {});

  const std::vector<Scene>& eligible_scenes() const { return scenes_; }
  const SimConfig& config() const { return config_; }
  const Dataset& dataset() const { return *data_; }
  const Roadway& roadway() const { return data_->roadway(); }
  const FeatureNormalizer& normalizer() const { return normalizer_; }

  // Uniform frame among eligible frames, then uniform car within it.
  FeatureVector reset(Rng& rng);
  FeatureVector reset(const Scene& scene);

  struct StepResult {
    FeatureVector obs{};
    Termination termination = Termination::kNone;
  };
  StepResult step(const DriveAction& action);
  // Advances with the ego placed on its recorded next state.
  StepResult step_replay();

  const Scene& scene() const { return scene_; }
  int step_count() const { return steps_; }
  bool terminated() const { return termination_ != Termination::kNone; }
  Termination termination() const { return termination_; }

  const VehicleState& ego_state() const { return ego_; }
  const VehicleDef& ego_def() const { return ego_def_; }
  const Trajectory& ego_recording() const { return *ego_traj_; }
  double ego_initial_speed() const { return ego_initial_speed_; }
  const FrenetProjection& ego_projection() const { return info_.proj; }
  const StepInfo& info() const { return info_; }
  const FeatureVector& raw_features() const { return raw_; }
  const FeatureVector& observation() const { return obs_; }
  std::span<const ProjectedParticipant> others() const { return projected_; }
  int emergency_triggered_count() const;

 private:
  struct Other {
    int id = 0;
    VehicleDef def;
    const Trajectory* traj = nullptr;
    VehicleState state;
    EmergencyState em;
  };

  StepResult advance(const VehicleState& next_ego);
  void advance_others();
  void refresh_observation();

  std::shared_ptr<const Dataset> data_;
  SimConfig config_;
  FeatureNormalizer normalizer_;
  std::vector<Scene> scenes_;
  std::vector<int> scene_frames_;                    // distinct eligible frames
  std::vector<std::pair<std::size_t, std::size_t>> frame_ranges_;  // into scenes_

  Scene scene_;
  int steps_ = 0;
  bool started_ = false;
  Termination termination_ = Termination::kNone;
  VehicleState ego_;
  VehicleDef ego_def_;
  const Trajectory* ego_traj_ = nullptr;
  double ego_initial_speed_ = 0.0;
  std::vector<Other> others_;
  std::vector<ProjectedParticipant> projected_;
  std::vector<Participant> participants_;
  StepInfo info_;
  FeatureVector raw_{};
  FeatureVector obs_{};
};

// Runs one episode from a random eligible scene (or the given one).
EpisodeRollout rollout(Policy& policy, Env& env, Rng& rng);
EpisodeRollout rollout(Policy& policy, Env& env, const Scene& scene, Rng& rng);

// CSV dump: `step,x,y,heading,speed,accel,turn_rate,logp,termination`.
void save_rollout_csv(const std::filesystem::path& path, const EpisodeRollout& ro);

}  // namespace driveimit
