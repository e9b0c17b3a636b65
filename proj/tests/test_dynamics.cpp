#include <doctest.h>

#include <cmath>

#include "driveimit/dynamics.hpp"

using namespace driveimit;

TEST_CASE("straight motion") {
  const VehicleState s{0.0, 0.0, 0.0, 10.0};
  const VehicleState n = propagate(s, {0.0, 0.0}, 0.1);
  CHECK(n.x == doctest::Approx(1.0));
  CHECK(n.y == doctest::Approx(0.0));
  CHECK(n.speed == doctest::Approx(10.0));

  const VehicleState a = propagate(s, {1.0, 0.0}, 0.1);
  CHECK(a.speed == doctest::Approx(10.1));
  CHECK(a.x == doctest::Approx(1.005).epsilon(1e-12));
}

TEST_CASE("arc motion") {
  const VehicleState s{0.0, 0.0, 0.0, 10.0};
  const VehicleState n = propagate(s, {0.0, 0.1}, 1.0);
  CHECK(n.heading == doctest::Approx(0.1));
  // Circle of radius 100 around (0, 100).
  CHECK(std::hypot(n.x, n.y - 100.0) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(n.x == doctest::Approx(100.0 * std::sin(0.1)));
}

TEST_CASE("two half steps equal one step") {
  const VehicleState s{3.0, -1.0, 0.4, 12.0};
  for (const DriveAction a : {DriveAction{1.5, 0.2}, DriveAction{-3.0, -0.4}, DriveAction{0.0, 0.0}}) {
    const VehicleState one = propagate(s, a, 0.2);
    const VehicleState two = propagate(propagate(s, a, 0.1), a, 0.1);
    CHECK(std::abs(one.x - two.x) < 1e-9);
    CHECK(std::abs(one.y - two.y) < 1e-9);
    CHECK(std::abs(one.heading - two.heading) < 1e-9);
    CHECK(std::abs(one.speed - two.speed) < 1e-9);
  }
}

TEST_CASE("speed may go negative") {
  const VehicleState n = propagate({0.0, 0.0, 0.0, 1.0}, {-2.0, 0.0}, 1.0);
  CHECK(n.speed == doctest::Approx(-1.0));
}

TEST_CASE("action clamping") {
  const ActionBounds b;
  const DriveAction c = clamp_action({-20.0, 3.0}, b);
  CHECK(c.accel == b.accel_min);
  CHECK(c.turn_rate == b.turn_rate_max);
  const DriveAction in = clamp_action({1.0, -0.1}, b);
  CHECK(in.accel == 1.0);
  CHECK(in.turn_rate == -0.1);
}

TEST_CASE("oriented box intersection") {
  VehicleDef d;
  d.length = 5.0;
  d.width = 2.0;
  const VehicleState a{0.0, 0.0, 0.0, 0.0};
  CHECK(obb_intersects(a, d, a, d));
  CHECK_FALSE(obb_intersects(a, d, {200.0, 0.0, 0.0, 0.0}, d));
  CHECK(obb_intersects(a, d, {4.999, 0.0, 0.0, 0.0}, d));
  CHECK(obb_intersects(a, d, {5.0, 0.0, 0.0, 0.0}, d));
  CHECK_FALSE(obb_intersects(a, d, {5.001, 0.0, 0.0, 0.0}, d));
  CHECK(obb_intersects(a, d, {0.0, 1.999, 0.0, 0.0}, d));
  CHECK_FALSE(obb_intersects(a, d, {0.0, 2.001, 0.0, 0.0}, d));

  // Rotated: corner of a 45 degree box reaches sqrt(2.5^2 + 1^2) along its diagonal.
  const VehicleState r{4.0, 0.0, std::atan2(1.0, 1.0), 0.0};
  CHECK(obb_intersects(a, d, r, d) == obb_intersects(r, d, a, d));
  CHECK(obb_intersects(a, d, r, d));
  CHECK_FALSE(obb_intersects(a, d, {8.0, 3.0, 0.7, 0.0}, d));
}

TEST_CASE("vehicle class names") {
  CHECK(vehicle_class_name(VehicleClass::kTruck) == "truck");
  CHECK(parse_vehicle_class("car") == VehicleClass::kCar);
  CHECK_THROWS(parse_vehicle_class("boat"));
}
