#include "driveimit/policies.hpp"

#include <cmath>
#include <numbers>

#include "driveimit/error.hpp"

namespace driveimit {

void NeuralPolicy::reset(const Env&) { hidden_.assign(net_->hidden_state_dim(), 0.0); }

PolicyOutput NeuralPolicy::act(const Env&, const FeatureVector& obs, Rng& rng) {
  const GaussianActionDist d = net_->step(obs, hidden_);
  const SampledAction s = sample_and_logprob(d, rng);
  return {s.action, s.log_prob};
}

SgPolicy::SgPolicy(StaticGaussian g, std::string name) : g_(std::move(g)), name_(std::move(name)) {
  Eigen::LLT<Eigen::Matrix2d> llt(g_.sigma);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kSingularBlock, "static Gaussian covariance");
  chol_ = llt.matrixL();
  log_norm_ = -std::log(2.0 * std::numbers::pi) - std::log(chol_(0, 0)) - std::log(chol_(1, 1));
}

PolicyOutput SgPolicy::act(const Env&, const FeatureVector&, Rng& rng) {
  const Eigen::Vector2d z(standard_normal(rng), standard_normal(rng));
  const Eigen::Vector2d a = g_.mu + chol_ * z;
  return {{a(0), a(1)}, log_norm_ - 0.5 * z.squaredNorm()};
}

PolicyOutput MrPolicy::act(const Env&, const FeatureVector& obs, Rng& rng) {
  const ConditionalMixture cm = mr_conditional(*mr_, obs);
  std::discrete_distribution<std::size_t> pick(cm.weights.begin(), cm.weights.end());
  const std::size_t k = pick(rng);
  Eigen::LLT<Eigen::Matrix2d> llt(cm.covs[k]);
  const Eigen::Matrix2d l = llt.matrixL();
  const Eigen::Vector2d z(standard_normal(rng), standard_normal(rng));
  const Eigen::Vector2d a = cm.means[k] + l * z;
  double p = 0.0;
  for (std::size_t j = 0; j < cm.weights.size(); ++j) {
    Eigen::LLT<Eigen::Matrix2d> lj(cm.covs[j]);
    const Eigen::Matrix2d L = lj.matrixL();
    const Eigen::Vector2d zj = L.triangularView<Eigen::Lower>().solve(a - cm.means[j]);
    p += cm.weights[j] * std::exp(-0.5 * zj.squaredNorm()) / (2.0 * std::numbers::pi * L(0, 0) * L(1, 1));
  }
  return {{a(0), a(1)}, std::log(std::max(p, 1e-300))};
}

MobilContext mobil_context(const Roadway& roadway, const FrenetProjection& proj, double speed,
                           double length, std::span<const ProjectedParticipant> others) {
  MobilContext ctx;
  ctx.speed = speed;
  ctx.length = length;
  const LaneNeighbors own = lane_neighbors(proj.s, length, proj.lane_index, others);
  ctx.leader = own.leader;
  ctx.follower = own.follower;
  auto fill = [&](LaneContext& lc, int lane) {
    if (lane < 0 || lane >= roadway.lane_count()) return;
    lc.exists = true;
    const LaneNeighbors n = lane_neighbors(proj.s, length, lane, others);
    lc.leader = n.leader;
    lc.follower = n.follower;
  };
  fill(ctx.left, proj.lane_index + 1);
  fill(ctx.right, proj.lane_index - 1);
  return ctx;
}

void IdmMobilPolicy::reset(const Env& env) {
  params_.idm.desired_speed = std::max(env.ego_initial_speed(), 1.0);
  target_lane_ = env.ego_projection().lane_index;
}

PolicyOutput IdmMobilPolicy::act(const Env& env, const FeatureVector&, Rng& rng) {
  const Roadway& road = env.roadway();
  const VehicleState& ego = env.ego_state();
  const FrenetProjection& proj = env.ego_projection();
  const double length = env.ego_def().length;
  if (proj.lane_index == target_lane_) {
    const MobilContext ctx = mobil_context(road, proj, ego.speed, length, env.others());
    target_lane_ = proj.lane_index + static_cast<int>(mobil_decide(params_.mobil, params_.idm, ctx));
  }
  const FrenetProjection target =
      project_onto_lane(road.lanes()[static_cast<std::size_t>(target_lane_)], {ego.x, ego.y}, ego.heading);
  // Car following keeps watching the lane the ego currently occupies.
  const LaneNeighbors n = lane_neighbors(proj.s, length, proj.lane_index, env.others());
  const DriveAction a = idm_mobil_action(params_, noise_, ego.speed, n.leader, target, rng);
  return {a, 0.0};
}

}  // namespace driveimit
