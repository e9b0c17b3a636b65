#include "driveimit/rulectl.hpp"

#include <algorithm>
#include <cmath>

#include "driveimit/error.hpp"

namespace driveimit {

double idm_accel(const IdmParams& p, double speed, double closing_speed, std::optional<double> gap) {
  const double v0 = std::max(p.desired_speed, 1e-3);
  const double free_term = std::pow(std::max(speed, 0.0) / v0, p.exponent);
  double interaction = 0.0;
  if (gap) {
    if (!(*gap > 0.0)) throw Error(ErrorCode::kNonPositiveGap, "leader gap must be positive");
    const double dyn = speed * p.time_headway +
                       speed * closing_speed / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
    const double s_star = p.min_spacing + std::max(0.0, dyn);
    interaction = (s_star / *gap) * (s_star / *gap);
  }
  return std::max(kIdmMinAccel, p.max_accel * (1.0 - free_term - interaction));
}

namespace {

double accel_behind(const IdmParams& idm, double speed, const std::optional<Neighbor>& leader) {
  if (!leader) return idm_accel(idm, speed, 0.0, std::nullopt);
  return idm_accel(idm, speed, speed - leader->speed, std::max(leader->gap, 1e-3));
}

}  // namespace

MobilEvaluation mobil_evaluate(const MobilParams& p, const IdmParams& idm, const MobilContext& ctx,
                               LaneChange side) {
  MobilEvaluation ev;
  const LaneContext& lane = side == LaneChange::kLeft ? ctx.left : ctx.right;
  if (side == LaneChange::kStay || !lane.exists) return ev;

  // Ego before/after.
  const double ego_now = accel_behind(idm, ctx.speed, ctx.leader);
  const double ego_new = accel_behind(idm, ctx.speed, lane.leader);

  // New follower: before it follows the new lane leader; after it follows ego.
  double nf_gain = 0.0;
  if (lane.follower) {
    const Neighbor& f = *lane.follower;
    std::optional<Neighbor> nf_leader_now;
    if (lane.leader) nf_leader_now = Neighbor{f.gap + ctx.length + lane.leader->gap, lane.leader->speed};
    const double before = accel_behind(idm, f.speed, nf_leader_now);
    if (f.gap <= 0.0) {
      ev.new_follower_accel = kIdmMinAccel;
      return ev;
    }
    const double after = accel_behind(idm, f.speed, Neighbor{f.gap, ctx.speed});
    ev.new_follower_accel = after;
    nf_gain = after - before;
  } else {
    ev.new_follower_accel = 0.0;
  }
  if (lane.leader && lane.leader->gap <= 0.0) return ev;
  ev.safe = ev.new_follower_accel >= -p.safe_decel_limit;

  // Old follower: before it follows ego; after it follows ego's old leader.
  double of_gain = 0.0;
  if (ctx.follower) {
    const Neighbor& f = *ctx.follower;
    const double before = accel_behind(idm, f.speed, Neighbor{std::max(f.gap, 1e-3), ctx.speed});
    std::optional<Neighbor> after_leader;
    if (ctx.leader) after_leader = Neighbor{f.gap + ctx.length + ctx.leader->gap, ctx.leader->speed};
    const double after = accel_behind(idm, f.speed, after_leader);
    of_gain = after - before;
  }
  ev.incentive = (ego_new - ego_now) + p.politeness * (nf_gain + of_gain) - p.accel_gain_threshold;
  return ev;
}

LaneChange mobil_decide(const MobilParams& p, const IdmParams& idm, const MobilContext& ctx) {
  LaneChange best = LaneChange::kStay;
  double best_incentive = 0.0;
  // Right is evaluated first so that it wins exact ties with left.
  for (LaneChange side : {LaneChange::kRight, LaneChange::kLeft}) {
    const MobilEvaluation ev = mobil_evaluate(p, idm, ctx, side);
    if (ev.safe && ev.incentive > best_incentive) {
      best = side;
      best_incentive = ev.incentive;
    }
  }
  return best;
}

double lane_track_turnrate(const LaneTrackGains& gains, const FrenetProjection& proj,
                           const ActionBounds& bounds) {
  const double w = -gains.offset * proj.t - gains.heading * proj.phi;
  return std::clamp(w, bounds.turn_rate_min, bounds.turn_rate_max);
}

std::optional<VehicleState> emergency_wrapper_step(EmergencyState& em, const EmergencyConfig& cfg,
                                                   const VehicleState& current,
                                                   const std::optional<VehicleState>& recorded_next,
                                                   const std::optional<EgoLeadInfo>& ego_ahead,
                                                   const std::optional<LeaderInfo>& leader_after_trigger,
                                                   const FrenetProjection& lane_proj) {
  if (!em.triggered && ego_ahead) {
    IdmParams idm = cfg.idm;
    idm.desired_speed = current.speed;
    const double a = idm_accel(idm, current.speed, ego_ahead->closing_speed,
                               std::max(ego_ahead->gap, 1e-3));
    if (a < cfg.threshold) {
      em.triggered = true;
      em.desired_speed = current.speed;
      em.state = current;
    }
  }
  if (!em.triggered) return recorded_next;

  IdmParams idm = cfg.idm;
  idm.desired_speed = em.desired_speed;
  const VehicleState& s = em.state;
  double accel = 0.0;
  if (leader_after_trigger) {
    accel = idm_accel(idm, s.speed, s.speed - leader_after_trigger->speed,
                      std::max(leader_after_trigger->gap, 1e-3));
  } else {
    accel = idm_accel(idm, s.speed, 0.0, std::nullopt);
  }
  // Braking to a stop, never reversing.
  accel = std::max(accel, -s.speed / cfg.dt);
  const DriveAction act =
      clamp_action({accel, lane_track_turnrate(cfg.gains, lane_proj, cfg.bounds)}, cfg.bounds);
  em.state = propagate(s, act, cfg.dt);
  em.state.speed = std::max(em.state.speed, 0.0);
  return em.state;
}

DriveAction idm_mobil_action(const IdmMobilParams& params, const ControllerNoise& noise,
                             double speed, const std::optional<Neighbor>& leader,
                             const FrenetProjection& target_lane_proj, Rng& rng) {
  double accel = accel_behind(params.idm, speed, leader);
  double turn = lane_track_turnrate(params.gains, target_lane_proj, params.bounds);
  if (noise.sigma_accel > 0.0) accel += noise.sigma_accel * standard_normal(rng);
  if (noise.sigma_turn_rate > 0.0) turn += noise.sigma_turn_rate * standard_normal(rng);
  return {accel, turn};
}

}  // namespace driveimit
