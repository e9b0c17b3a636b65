#pragma once

#include <cmath>
#include <string_view>

#include "driveimit/roadway.hpp"

namespace driveimit {

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
};

enum class VehicleClass { kCar, kTruck, kBus, kMotorcycle };

std::string_view vehicle_class_name(VehicleClass c);
VehicleClass parse_vehicle_class(std::string_view name);  // throws ParseError

struct VehicleDef {
  int id = 0;
  double length = 4.5;
  double width = 1.8;
  VehicleClass vclass = VehicleClass::kCar;
};

struct DriveAction {
  double accel = 0.0;      // m/s^2
  double turn_rate = 0.0;  // rad/s
};

struct ActionBounds {
  double accel_min = -8.0;
  double accel_max = 5.0;
  double turn_rate_min = -0.5;
  double turn_rate_max = 0.5;
};

DriveAction clamp_action(const DriveAction& a, const ActionBounds& bounds);

// Constant turn-rate, constant acceleration motion integrated in closed form
// over dt. Speed may become negative; the caller decides what that means.
VehicleState propagate(const VehicleState& state, const DriveAction& action, double dt);

inline Vec2 velocity_of(const VehicleState& s) {
  return {s.speed * std::cos(s.heading), s.speed * std::sin(s.heading)};
}

// Separating-axis test between two oriented rectangles (length along heading).
// Touching boxes count as intersecting.
bool obb_intersects(const VehicleState& a, const VehicleDef& adef, const VehicleState& b,
                    const VehicleDef& bdef);

}  // namespace driveimit
