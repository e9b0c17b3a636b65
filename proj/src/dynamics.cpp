#include "driveimit/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "driveimit/error.hpp"

namespace driveimit {

std::string_view vehicle_class_name(VehicleClass c) {
  switch (c) {
    case VehicleClass::kCar: return "car";
    case VehicleClass::kTruck: return "truck";
    case VehicleClass::kBus: return "bus";
    case VehicleClass::kMotorcycle: return "motorcycle";
  }
  return "car";
}

VehicleClass parse_vehicle_class(std::string_view name) {
  if (name == "car") return VehicleClass::kCar;
  if (name == "truck") return VehicleClass::kTruck;
  if (name == "bus") return VehicleClass::kBus;
  if (name == "motorcycle") return VehicleClass::kMotorcycle;
  throw Error(ErrorCode::kParseError, "unknown vehicle class '" + std::string(name) + "'");
}

DriveAction clamp_action(const DriveAction& a, const ActionBounds& b) {
  return {std::clamp(a.accel, b.accel_min, b.accel_max),
          std::clamp(a.turn_rate, b.turn_rate_min, b.turn_rate_max)};
}

VehicleState propagate(const VehicleState& s, const DriveAction& action, double dt) {
  const double v0 = s.speed;
  const double a = action.accel;
  const double w = action.turn_rate;
  const double u = w * dt;
  // Displacement in the initial heading frame: integral of (v0 + a t) * (cos wt, sin wt).
  double along = 0.0;
  double across = 0.0;
  if (std::abs(u) < 1e-3) {
    const double u2 = u * u;
    const double t2 = dt * dt;
    along = v0 * dt * (1.0 - u2 / 6.0 + u2 * u2 / 120.0) + a * t2 * (0.5 - u2 / 8.0 + u2 * u2 / 144.0);
    across = v0 * dt * (u / 2.0 - u * u2 / 24.0 + u * u2 * u2 / 720.0) + a * t2 * (u / 3.0 - u * u2 / 30.0);
  } else {
    const double su = std::sin(u);
    const double cu = std::cos(u);
    along = v0 * su / w + a * (dt * su / w + (cu - 1.0) / (w * w));
    across = v0 * (1.0 - cu) / w + a * (-dt * cu / w + su / (w * w));
  }
  const double ch = std::cos(s.heading);
  const double sh = std::sin(s.heading);
  VehicleState out;
  out.x = s.x + ch * along - sh * across;
  out.y = s.y + sh * along + ch * across;
  out.heading = wrap_angle(s.heading + u);
  out.speed = v0 + a * dt;
  return out;
}

bool obb_intersects(const VehicleState& a, const VehicleDef& adef, const VehicleState& b,
                    const VehicleDef& bdef) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double reach = 0.5 * (std::hypot(adef.length, adef.width) + std::hypot(bdef.length, bdef.width));
  if (dx * dx + dy * dy > reach * reach) return false;

  const double ca = std::cos(a.heading), sa = std::sin(a.heading);
  const double cb = std::cos(b.heading), sb = std::sin(b.heading);
  const std::array<Vec2, 4> axes{Vec2{ca, sa}, Vec2{-sa, ca}, Vec2{cb, sb}, Vec2{-sb, cb}};
  const double ah = 0.5 * adef.length, aw = 0.5 * adef.width;
  const double bh = 0.5 * bdef.length, bw = 0.5 * bdef.width;
  for (const auto& ax : axes) {
    const double ra = ah * std::abs(ca * ax.x + sa * ax.y) + aw * std::abs(-sa * ax.x + ca * ax.y);
    const double rb = bh * std::abs(cb * ax.x + sb * ax.y) + bw * std::abs(-sb * ax.x + cb * ax.y);
    if (std::abs(dx * ax.x + dy * ax.y) > ra + rb) return false;
  }
  return true;
}

}  // namespace driveimit
