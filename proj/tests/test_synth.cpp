#include <doctest.h>

#include <algorithm>

#include "driveimit/error.hpp"
#include "driveimit/synth.hpp"

using namespace driveimit;

namespace {

SynthConfig short_run(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.warmup = 20.0;
  cfg.duration = 60.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("short synthetic run is collision free") {
  const SynthResult r = synthesize_traffic(short_run(3));
  CHECK(r.collisions == 0);
  CHECK(r.trajectories.size() > 20);
  CHECK(r.roadway.lanes().size() == 3);
  for (const auto& t : r.trajectories) {
    REQUIRE(t.samples.size() >= 2);
    for (std::size_t k = 1; k < t.samples.size(); ++k) CHECK(t.samples[k].frame == t.samples[k - 1].frame + 1);
    CHECK(t.samples.back().frame < 600);
    if (t.vehicle.vclass == VehicleClass::kTruck) {
      // Trucks keep to the two right lanes.
      const double y = t.samples.front().y;
      CHECK(y < 1.5 * r.roadway.lane_width());
    }
  }
}

TEST_CASE("synthetic traffic is seeded") {
  const SynthResult a = synthesize_traffic(short_run(5));
  const SynthResult b = synthesize_traffic(short_run(5));
  const SynthResult c = synthesize_traffic(short_run(6));
  REQUIRE(a.trajectories.size() == b.trajectories.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    CHECK(a.trajectories[i].samples.back().x == b.trajectories[i].samples.back().x);
  }
  CHECK((a.trajectories.size() != c.trajectories.size() ||
         a.trajectories[0].samples[0].x != c.trajectories[0].samples[0].x));
}

TEST_CASE("invalid synthetic configuration") {
  SynthConfig cfg = short_run(1);
  cfg.lane_speeds = {25.0};
  CHECK_THROWS_AS(synthesize_traffic(cfg), Error);
  cfg = short_run(1);
  cfg.length = 0.0;
  CHECK_THROWS_AS(synthesize_traffic(cfg), Error);
}
