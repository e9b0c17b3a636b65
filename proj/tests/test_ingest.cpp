#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <random>

#include "driveimit/error.hpp"
#include "driveimit/ingest.hpp"
#include "ekf_support.hpp"

using namespace driveimit;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = DRIVEIMIT_FIXTURES;

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "driveimit_test_ingest";
  fs::create_directories(dir);
  std::ofstream(dir / name) << text;
  return dir / name;
}

RawTrajectory raw_of(const std::vector<Vec2>& pts) {
  RawTrajectory r;
  r.vehicle.id = 1;
  for (std::size_t i = 0; i < pts.size(); ++i) r.samples.push_back({static_cast<int>(i), pts[i].x, pts[i].y});
  return r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("two rows load as one trajectory") {
  const auto p = write_temp("two.csv",
                            "vehicle_id,frame,class,length,width,x,y\n"
                            "5,0,car,4.5,1.8,0.0,0.0\n"
                            "5,1,car,4.5,1.8,1.0,0.0\n");
  const auto t = load_trajectories(p);
  REQUIRE(t.size() == 1);
  CHECK(t[0].samples.size() == 2);
  CHECK(t[0].vehicle.id == 5);
  CHECK(t[0].vehicle.length == 4.5);
}

TEST_CASE("frame gaps and bad rows are rejected") {
  const auto gap = write_temp("gap.csv",
                              "vehicle_id,frame,class,length,width,x,y\n"
                              "5,0,car,4.5,1.8,0.0,0.0\n"
                              "5,2,car,4.5,1.8,1.0,0.0\n");
  CHECK(code_of([&] { load_trajectories(gap); }) == ErrorCode::kGapError);
  const auto bad = write_temp("bad.csv",
                              "vehicle_id,frame,class,length,width,x,y\n"
                              "5,0,car,4.5,1.8,zero,0.0\n");
  CHECK(code_of([&] { load_trajectories(bad); }) == ErrorCode::kParseError);
  const auto header = write_temp("header.csv", "id,frame\n");
  CHECK(code_of([&] { load_trajectories(header); }) == ErrorCode::kParseError);
}

TEST_CASE("bundled fixture matches its manifest") {
  const auto manifest = nlohmann::json::parse(std::ifstream(kFixtures / "three_vehicles_manifest.json"));
  const auto raws = load_trajectories(kFixtures / "three_vehicles.csv");
  REQUIRE(raws.size() == manifest["vehicles"].size());
  for (std::size_t i = 0; i < raws.size(); ++i) {
    const auto& m = manifest["vehicles"][i];
    CHECK(raws[i].vehicle.id == m["id"].get<int>());
    CHECK(raws[i].samples.size() == m["samples"].get<std::size_t>());
    CHECK(raws[i].samples.front().frame == m["first_frame"].get<int>());
    CHECK(vehicle_class_name(raws[i].vehicle.vclass) == m["class"].get<std::string>());
  }
  CHECK(filter_cars(raws).size() == manifest["cars"].get<std::size_t>());

  const auto smoothed = ekf_smooth_all(raws, EkfNoise{}, 2);
  const SceneIndex index = build_scene_index(smoothed);
  CHECK(index.first_frame() == manifest["first_frame"].get<int>());
  CHECK(index.last_frame() == manifest["last_frame"].get<int>());
  std::size_t total = 0;
  for (const auto& [frame, count] : manifest["occupancy"].items()) {
    CHECK(index.occupants(std::stoi(frame)).size() == count.get<std::size_t>());
    total += count.get<std::size_t>();
  }
  CHECK(index.total_states() == total);
  CHECK(index.occupants(-5).empty());
  CHECK(index.occupants(1000).empty());
}

TEST_CASE("car filter") {
  std::vector<RawTrajectory> t(3);
  t[1].vehicle.vclass = VehicleClass::kTruck;
  CHECK(filter_cars(t).size() == 2);
  CHECK(filter_cars(std::vector<RawTrajectory>{}).empty());
  for (auto& r : t) r.vehicle.vclass = VehicleClass::kTruck;
  CHECK(filter_cars(t).empty());
}

TEST_CASE("degenerate track") {
  const Trajectory t = ekf_smooth(raw_of(std::vector<Vec2>(5, Vec2{3.0, 4.0})));
  CHECK(t.degenerate);
  REQUIRE(t.states.size() == 5);
  for (const auto& s : t.states) CHECK(s.speed == doctest::Approx(0.0));
}

TEST_CASE("constant-velocity track is a fixed point") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 60; ++i) pts.push_back({10.0 + 2.5 * i * 0.8, -3.0 + 2.5 * i * 0.6});
  const Trajectory t = ekf_smooth(raw_of(pts));
  CHECK_FALSE(t.degenerate);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(std::abs(t.states[i].x - pts[i].x) < 1e-6);
    CHECK(std::abs(t.states[i].y - pts[i].y) < 1e-6);
    CHECK(t.states[i].speed == doctest::Approx(25.0).epsilon(1e-6));
    CHECK(t.states[i].heading == doctest::Approx(std::atan2(0.6, 0.8)).epsilon(1e-6));
  }
}

TEST_CASE("noisy arc is smoothed") {
  const test::ArcSmoothing r = test::smooth_noisy_arc(11);
  CHECK(r.smoothed_rmse < r.raw_rmse);
  CHECK(r.smoothed_rmse < 0.5);
}

TEST_CASE("scene index occupancy") {
  std::vector<Trajectory> one(1);
  one[0].vehicle.id = 1;
  one[0].states.resize(10);
  SceneIndex idx = build_scene_index(one);
  for (int f = 0; f <= 9; ++f) CHECK(idx.occupants(f).size() == 1);
  CHECK(idx.occupants(10).empty());

  std::vector<Trajectory> two(2);
  two[0].vehicle.id = 1;
  two[0].states.resize(10);
  two[1].vehicle.id = 2;
  two[1].first_frame = 5;
  two[1].states.resize(10);
  idx = build_scene_index(two);
  CHECK(idx.occupants(4).size() == 1);
  for (int f = 5; f <= 9; ++f) CHECK(idx.occupants(f).size() == 2);
  CHECK(idx.occupants(12).size() == 1);
  CHECK(idx.occupants(7)[1].vehicle_id == 2);
}

TEST_CASE("smoothed dataset round trip") {
  const auto raws = load_trajectories(kFixtures / "three_vehicles.csv");
  const auto sm = ekf_smooth_all(raws, EkfNoise{}, 1);
  const fs::path dir = fs::temp_directory_path() / "driveimit_test_ingest";
  fs::create_directories(dir);
  save_smoothed(dir / "s.csv", sm);
  save_vehicles(dir / "v.csv", sm);
  const auto back = load_smoothed(dir / "s.csv", dir / "v.csv");
  REQUIRE(back.size() == sm.size());
  for (std::size_t i = 0; i < sm.size(); ++i) {
    CHECK(back[i].vehicle.id == sm[i].vehicle.id);
    CHECK(back[i].vehicle.vclass == sm[i].vehicle.vclass);
    REQUIRE(back[i].states.size() == sm[i].states.size());
    CHECK(back[i].states[7].x == doctest::Approx(sm[i].states[7].x).epsilon(1e-12));
    CHECK(back[i].states[7].heading == doctest::Approx(sm[i].states[7].heading).epsilon(1e-12));
  }
  // Parallel smoothing gives the same result as serial.
  const auto par = ekf_smooth_all(raws, EkfNoise{}, 3);
  for (std::size_t i = 0; i < sm.size(); ++i) CHECK(par[i].states.back().x == sm[i].states.back().x);
  fs::remove_all(dir);
}
