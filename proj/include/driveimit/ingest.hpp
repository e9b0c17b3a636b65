#pragma once

// Trajectory dataset loading, class filtering, EKF smoothing and per-frame
// scene indexing. Recordings are sampled at 10 Hz.

#include <filesystem>
#include <span>
#include <vector>

#include "driveimit/dynamics.hpp"

namespace driveimit {

inline constexpr double kFrameDt = 0.1;

struct RawSample {
  int frame = 0;
  double x = 0.0;
  double y = 0.0;
};

struct RawTrajectory {
  VehicleDef vehicle;
  std::vector<RawSample> samples;  // contiguous, increasing frames
};

struct Trajectory {
  VehicleDef vehicle;
  int first_frame = 0;
  std::vector<VehicleState> states;
  bool degenerate = false;     // all raw samples coincided
  int heading_outliers = 0;    // frame-to-frame heading jumps above pi/2

  int last_frame() const { return first_frame + static_cast<int>(states.size()) - 1; }
  bool has_frame(int frame) const { return frame >= first_frame && frame <= last_frame(); }
  const VehicleState& at_frame(int frame) const { return states[frame - first_frame]; }
};

// Trajectory CSV: header `vehicle_id,frame,class,length,width,x,y`.
// Throws ParseError (with line number) or GapError (vehicle and frame).
std::vector<RawTrajectory> load_trajectories(const std::filesystem::path& path);
void save_trajectories(const std::filesystem::path& path, std::span<const RawTrajectory> trajs);

std::vector<RawTrajectory> filter_cars(std::span<const RawTrajectory> trajs);

struct EkfNoise {
  double measurement_sigma = 0.5;  // m, per axis
  double accel_sigma = 1.0;        // m/s^2, process
  double yaw_rate_sigma = 0.1;     // rad/s, process
};

// Forward EKF on (x, y, heading, speed) with the kinematic process model and
// position-only measurements, followed by a fixed-interval (RTS) backward pass.
Trajectory ekf_smooth(const RawTrajectory& raw, const EkfNoise& noise = {});

// Smooths every trajectory; trajectories are independent so `jobs` workers may
// process them concurrently. Output order matches input.
std::vector<Trajectory> ekf_smooth_all(std::span<const RawTrajectory> raws, const EkfNoise& noise,
                                       unsigned jobs = 1);

struct Occupant {
  int vehicle_id = 0;
  std::size_t trajectory = 0;  // index into the trajectory list
};

class SceneIndex {
 public:
  SceneIndex() = default;
  explicit SceneIndex(std::span<const Trajectory> trajs);

  int first_frame() const { return first_frame_; }
  int last_frame() const { return first_frame_ + static_cast<int>(buckets_.size()) - 1; }
  bool empty() const { return buckets_.empty(); }
  // Empty span for frames outside the indexed range.
  std::span<const Occupant> occupants(int frame) const;
  std::size_t total_states() const { return total_; }

 private:
  int first_frame_ = 0;
  std::vector<std::vector<Occupant>> buckets_;
  std::size_t total_ = 0;
};

SceneIndex build_scene_index(std::span<const Trajectory> trajs);

// Smoothed CSV: `vehicle_id,frame,x,y,heading,speed`; vehicle table:
// `vehicle_id,class,length,width`.
void save_smoothed(const std::filesystem::path& path, std::span<const Trajectory> trajs);
void save_vehicles(const std::filesystem::path& path, std::span<const Trajectory> trajs);
std::vector<Trajectory> load_smoothed(const std::filesystem::path& smoothed,
                                      const std::filesystem::path& vehicles);

}  // namespace driveimit
