#include "driveimit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "driveimit/error.hpp"
#include "driveimit/policies.hpp"

namespace driveimit {

namespace {

struct Agent {
  VehicleDef def;
  VehicleState state;
  double desired_speed = 0.0;
  int target_lane = 0;
  std::size_t record = SIZE_MAX;  // index into the output, once recording
};

constexpr double kTruckLength = 12.0;
constexpr double kTruckWidth = 2.5;
constexpr double kSpawnHeadway = 1.2;  // s
constexpr double kCorridorMargin = 0.3;  // m
constexpr double kMergeClearance = 25.0;  // m
constexpr double kEntranceZone = 50.0;    // m without lane changes after the entrance

// Nearest vehicle ahead whose body overlaps the lateral corridor of vehicle
// i. Vehicles in the middle of a lane change are seen from both lanes.
std::optional<Neighbor> corridor_leader(std::span<const ProjectedParticipant> all, std::size_t i,
                                        double lane_width) {
  auto lateral = [&](const ProjectedParticipant& p) { return p.proj.lane_index * lane_width + p.proj.t; };
  const ProjectedParticipant& me = all[i];
  std::optional<Neighbor> best;
  double best_ds = 0.0;
  for (std::size_t j = 0; j < all.size(); ++j) {
    if (j == i) continue;
    const ProjectedParticipant& o = all[j];
    const double ds = o.proj.s - me.proj.s;
    if (ds < 0.0) continue;
    if (std::abs(lateral(o) - lateral(me)) > 0.5 * (me.p.def.width + o.p.def.width) + kCorridorMargin) continue;
    if (!best || ds < best_ds) {
      best_ds = ds;
      best = Neighbor{ds - 0.5 * (me.p.def.length + o.p.def.length), o.p.state.speed};
    }
  }
  return best;
}

}  // namespace

SynthResult synthesize_traffic(const SynthConfig& cfg) {
  if (cfg.lanes < 1 || !(cfg.length > 0.0) || !(cfg.dt > 0.0) || !(cfg.duration > 0.0) ||
      static_cast<int>(cfg.lane_speeds.size()) != cfg.lanes) {
    throw Error(ErrorCode::kConfigError, "synthetic traffic needs lanes >= 1, positive length and one speed per lane");
  }
  SynthResult out;
  out.roadway = make_straight_roadway(cfg.lanes, cfg.length, cfg.lane_width);
  const Roadway& road = out.roadway;

  Rng rng = make_rng(cfg.seed, {0x5717});
  Rng noise_rng = make_rng(cfg.seed, {0x5717, 1});
  std::exponential_distribution<double> arrival(std::max(cfg.inflow, 1e-9));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> pos_noise(0.0, cfg.position_noise);

  std::vector<double> next_arrival(static_cast<std::size_t>(cfg.lanes));
  for (double& t : next_arrival) t = arrival(rng);

  const auto warmup_steps = static_cast<long>(std::lround(cfg.warmup / cfg.dt));
  const long total_steps = warmup_steps + static_cast<long>(std::lround(cfg.duration / cfg.dt));

  std::vector<Agent> agents;
  std::vector<ProjectedParticipant> projected;
  std::vector<ProjectedParticipant> others;
  std::vector<std::pair<int, int>> collided;
  int next_id = 1;

  for (long step = 0; step < total_steps; ++step) {
    const double now = static_cast<double>(step) * cfg.dt;

    projected.clear();
    for (const Agent& a : agents) {
      projected.push_back({{a.state, a.def}, project_to_frenet(road, {a.state.x, a.state.y}, a.state.heading)});
    }

    // Arrivals wait at the entrance until the lane has room.
    for (int lane = 0; lane < cfg.lanes; ++lane) {
      auto& due = next_arrival[static_cast<std::size_t>(lane)];
      if (now < due) continue;
      Agent a;
      const bool truck = lane < 2 && unit(rng) < cfg.truck_fraction;
      a.def.vclass = truck ? VehicleClass::kTruck : VehicleClass::kCar;
      a.def.length = truck ? kTruckLength : 4.0 + unit(rng);
      a.def.width = truck ? kTruckWidth : 1.7 + 0.3 * unit(rng);
      const double mean = cfg.lane_speeds[static_cast<std::size_t>(lane)] - (truck ? 4.0 : 0.0);
      a.desired_speed = std::max(5.0, mean + cfg.speed_sigma * standard_normal(rng));
      const Pose p = frenet_to_cartesian(road.lanes()[static_cast<std::size_t>(lane)], 0.0, 0.0);
      a.state = {p.x, p.y, p.heading, a.desired_speed};
      a.target_lane = lane;
      projected.push_back({{a.state, a.def}, project_to_frenet(road, {a.state.x, a.state.y}, a.state.heading)});
      const std::optional<Neighbor> leader = corridor_leader(projected, projected.size() - 1, cfg.lane_width);
      projected.pop_back();
      if (leader) {
        a.state.speed = std::min(a.desired_speed, leader->speed);
        if (leader->gap < 5.0 + kSpawnHeadway * a.state.speed) continue;
      }
      a.def.id = next_id++;
      agents.push_back(a);
      projected.push_back({{a.state, a.def}, project_to_frenet(road, {a.state.x, a.state.y}, a.state.heading)});
      due = now + arrival(rng);
    }

    if (step >= warmup_steps) {
      const int frame = static_cast<int>(step - warmup_steps);
      for (Agent& a : agents) {
        if (a.record == SIZE_MAX) {
          a.record = out.trajectories.size();
          out.trajectories.push_back({a.def, {}});
        }
        out.trajectories[a.record].samples.push_back(
            {frame, a.state.x + pos_noise(noise_rng), a.state.y + pos_noise(noise_rng)});
      }
      for (std::size_t i = 0; i < agents.size(); ++i) {
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
          if (!obb_intersects(agents[i].state, agents[i].def, agents[j].state, agents[j].def)) continue;
          const std::pair<int, int> key{agents[i].def.id, agents[j].def.id};
          if (std::find(collided.begin(), collided.end(), key) == collided.end()) collided.push_back(key);
        }
      }
    }

    std::vector<VehicleState> next(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) {
      Agent& a = agents[i];
      const FrenetProjection& proj = projected[i].proj;
      others.clear();
      for (std::size_t j = 0; j < projected.size(); ++j) {
        if (j != i) others.push_back(projected[j]);
      }
      IdmMobilParams params = cfg.driver;
      params.gains = cfg.gains;
      params.idm.desired_speed = a.desired_speed;
      if (proj.lane_index == a.target_lane && proj.s > kEntranceZone) {
        const MobilContext ctx = mobil_context(road, proj, a.state.speed, a.def.length, others);
        int target = proj.lane_index + static_cast<int>(mobil_decide(params.mobil, params.idm, ctx));
        // Trucks keep to the two right lanes.
        if (a.def.vclass == VehicleClass::kTruck) target = std::min(target, 1);
        // No merge next to a vehicle already moving into the same lane.
        for (std::size_t j = 0; j < agents.size() && target != proj.lane_index; ++j) {
          const bool merging = agents[j].target_lane == target && projected[j].proj.lane_index != target;
          if (j != i && merging && std::abs(projected[j].proj.s - proj.s) < kMergeClearance) target = proj.lane_index;
        }
        a.target_lane = target;
      }
      const FrenetProjection target = project_onto_lane(road.lanes()[static_cast<std::size_t>(a.target_lane)],
                                                        {a.state.x, a.state.y}, a.state.heading);
      const std::optional<Neighbor> leader = corridor_leader(projected, i, cfg.lane_width);
      const DriveAction act =
          clamp_action(idm_mobil_action(params, cfg.noise, a.state.speed, leader, target, rng), params.bounds);
      next[i] = propagate(a.state, act, cfg.dt);
      next[i].speed = std::max(0.0, next[i].speed);
    }
    for (std::size_t i = 0; i < agents.size(); ++i) agents[i].state = next[i];
    std::erase_if(agents, [&](const Agent& a) { return a.state.x > cfg.length; });
  }
  out.collisions = static_cast<int>(collided.size());
  std::erase_if(out.trajectories, [](const RawTrajectory& t) { return t.samples.size() < 2; });
  return out;
}

}  // namespace driveimit
