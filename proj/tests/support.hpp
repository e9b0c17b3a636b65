#pragma once

// Small hand-built recordings shared by the tests.

#include <filesystem>
#include <memory>
#include <vector>

#include "driveimit/simenv.hpp"

namespace driveimit::test {

inline const std::filesystem::path kFixtures = DRIVEIMIT_FIXTURES;

// Constant-velocity track along +x.
inline Trajectory straight_track(int id, int first_frame, int frames, double x0, double y, double speed,
                                 VehicleClass vclass = VehicleClass::kCar, double length = 4.5) {
  Trajectory t;
  t.vehicle.id = id;
  t.vehicle.vclass = vclass;
  t.vehicle.length = length;
  t.vehicle.width = 1.8;
  t.first_frame = first_frame;
  for (int k = 0; k < frames; ++k) t.states.push_back({x0 + speed * k * 0.1, y, 0.0, speed});
  return t;
}

inline std::shared_ptr<const Dataset> dataset(int lanes, double length, std::vector<Trajectory> trajs) {
  return std::make_shared<const Dataset>(make_straight_roadway(lanes, length), std::move(trajs));
}

// Policy returning a fixed action with zero log-probability.
class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(DriveAction a) : a_(a) {}
  std::unique_ptr<Policy> clone() const override { return std::make_unique<ConstantPolicy>(*this); }
  std::string name() const override { return "constant"; }
  PolicyOutput act(const Env&, const FeatureVector&, Rng&) override { return {a_, 0.0}; }

 private:
  DriveAction a_;
};

// Temporary directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace driveimit::test
