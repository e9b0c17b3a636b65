#pragma once

// Rule-based driving: the Intelligent Driver Model for car following, MOBIL
// for lane selection, a proportional lane-centerline tracker, and the
// emergency-braking wrapper used for replayed traffic.

#include <optional>

#include "driveimit/dynamics.hpp"
#include "driveimit/rng.hpp"
#include "driveimit/roadway.hpp"

namespace driveimit {

struct IdmParams {
  double desired_speed = 30.0;  // m/s
  double min_spacing = 1.0;     // m
  double time_headway = 0.5;    // s
  double max_accel = 3.0;       // m/s^2
  double comfort_decel = 2.5;   // m/s^2
  double exponent = 4.0;
};

struct MobilParams {
  double politeness = 0.5;
  double accel_gain_threshold = 0.1;  // m/s^2
  double safe_decel_limit = 4.0;      // m/s^2
};

struct ControllerNoise {
  double sigma_accel = 0.1;      // m/s^2
  double sigma_turn_rate = 0.01;  // rad/s
};

struct LaneTrackGains {
  double offset = 0.1;   // 1/(m s)
  double heading = 1.0;  // 1/s
};

inline constexpr double kIdmMinAccel = -8.0;

// IDM acceleration. `gap` is the bumper-to-bumper distance to the leader
// (nullopt on a free road); `closing_speed` is own speed minus leader speed.
// Throws NonPositiveGap for a leader at gap <= 0.
double idm_accel(const IdmParams& p, double speed, double closing_speed, std::optional<double> gap);

struct Neighbor {
  double gap = 0.0;    // bumper to bumper, m
  double speed = 0.0;  // m/s
};

struct LaneContext {
  bool exists = false;
  std::optional<Neighbor> leader;
  std::optional<Neighbor> follower;
};

struct MobilContext {
  double speed = 0.0;
  double length = 4.5;
  std::optional<Neighbor> leader;
  std::optional<Neighbor> follower;
  LaneContext left;
  LaneContext right;
};

enum class LaneChange { kRight = -1, kStay = 0, kLeft = 1 };

struct MobilEvaluation {
  bool safe = false;
  double incentive = 0.0;  // ego gain + politeness * others' gains - threshold
  double new_follower_accel = 0.0;
};

MobilEvaluation mobil_evaluate(const MobilParams& p, const IdmParams& idm, const MobilContext& ctx,
                               LaneChange side);
LaneChange mobil_decide(const MobilParams& p, const IdmParams& idm, const MobilContext& ctx);

// Proportional tracking of a lane centerline, clamped to the turn-rate bounds.
double lane_track_turnrate(const LaneTrackGains& gains, const FrenetProjection& proj,
                           const ActionBounds& bounds = {});

// Per-vehicle emergency-braking state for replayed traffic. Once triggered it
// stays triggered for the rest of the episode.
struct EmergencyState {
  bool triggered = false;
  double desired_speed = 0.0;
  VehicleState state;  // live state once triggered
};

struct EmergencyConfig {
  double threshold = -2.0;  // m/s^2
  IdmParams idm;            // desired speed replaced by the speed at transition
  LaneTrackGains gains;
  ActionBounds bounds;
  double dt = 0.1;
};

// Ego context seen by a replayed vehicle: gap and closing speed when the ego
// is its same-lane leader.
struct EgoLeadInfo {
  double gap = 0.0;
  double closing_speed = 0.0;
};

// Leader seen by an already-triggered vehicle, if any.
struct LeaderInfo {
  double gap = 0.0;
  double speed = 0.0;
};

// Returns the vehicle state for the next frame. Before triggering, returns the
// recorded next state unless the IDM acceleration against the ego (as leader)
// falls below the threshold, in which case the vehicle switches permanently
// to IDM with lane tracking. `recorded_next` may be absent after the recording
// ends; untriggered vehicles then leave the scene (nullopt is returned).
std::optional<VehicleState> emergency_wrapper_step(EmergencyState& em, const EmergencyConfig& cfg,
                                                   const VehicleState& current,
                                                   const std::optional<VehicleState>& recorded_next,
                                                   const std::optional<EgoLeadInfo>& ego_ahead,
                                                   const std::optional<LeaderInfo>& leader_after_trigger,
                                                   const FrenetProjection& lane_proj);

struct IdmMobilParams {
  IdmParams idm;
  MobilParams mobil;
  LaneTrackGains gains;
  ActionBounds bounds;
};

// One IDM+MOBIL control decision: IDM against the current-lane leader,
// MOBIL target lane tracked by the proportional controller, then Gaussian
// noise on both outputs. `target_lane_proj` is the ego projection onto the
// centerline of the chosen lane.
DriveAction idm_mobil_action(const IdmMobilParams& params, const ControllerNoise& noise,
                             double speed, const std::optional<Neighbor>& leader,
                             const FrenetProjection& target_lane_proj, Rng& rng);

}  // namespace driveimit
