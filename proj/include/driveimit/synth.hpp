#pragma once

// Synthetic highway traffic: every vehicle is driven by IDM+MOBIL with its own
// desired speed. The recorded output has the same shape as a real trajectory
// file so it can go through ingestion unchanged.

#include <array>
#include <cstdint>
#include <vector>

#include "driveimit/ingest.hpp"
#include "driveimit/rulectl.hpp"

namespace driveimit {

struct SynthConfig {
  int lanes = 3;
  double length = 500.0;                  // m
  double lane_width = Roadway::kDefaultLaneWidth;
  double warmup = 40.0;                   // s, simulated but not recorded
  double duration = 400.0;                // s, recorded
  double dt = kFrameDt;
  double inflow = 0.25;                   // vehicles per second per lane
  std::vector<double> lane_speeds{22.0, 26.0, 30.0};  // desired speed mean, lane 0 first
  double speed_sigma = 3.0;
  double truck_fraction = 0.1;
  double position_noise = 0.05;           // m, per axis on recorded positions
  IdmMobilParams driver;
  // Stiffer heading gain than the default tracker so lane changes settle
  // without overshooting into the next lane.
  LaneTrackGains gains{0.1, 2.0};
  ControllerNoise noise;
  std::uint64_t seed = 1;
};

struct SynthResult {
  Roadway roadway;
  std::vector<RawTrajectory> trajectories;
  int collisions = 0;  // vehicle pairs that overlapped at some frame
};

SynthResult synthesize_traffic(const SynthConfig& cfg);

}  // namespace driveimit
