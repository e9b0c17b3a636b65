#pragma once

// Lane-centerline geometry and lane-relative (Frenet) coordinates.
//
// Lateral offsets are positive to the left of the direction of travel.
// Lane 0 is the rightmost lane.

#include <filesystem>
#include <span>
#include <vector>

namespace driveimit {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double wrap_angle(double a);  // into (-pi, pi]

struct CenterlinePoint {
  double x = 0.0;
  double y = 0.0;
  double s = 0.0;
  double heading = 0.0;
  double curvature = 0.0;
};

class Centerline {
 public:
  // Computes arclength, per-point heading and curvature. Needs at least two
  // distinct consecutive points.
  explicit Centerline(std::span<const Vec2> points);

  const std::vector<CenterlinePoint>& points() const { return points_; }
  double length() const { return points_.back().s; }

 private:
  std::vector<CenterlinePoint> points_;
};

struct FrenetProjection {
  int lane_index = 0;
  double s = 0.0;
  double t = 0.0;    // lateral offset, left positive
  double phi = 0.0;  // heading relative to lane direction
};

struct MarkerDistances {
  double left = 0.0;
  double right = 0.0;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

class Roadway {
 public:
  static constexpr double kDefaultLaneWidth = 3.7;

  Roadway() = default;
  Roadway(std::vector<Centerline> lanes, double lane_width);

  const std::vector<Centerline>& lanes() const { return lanes_; }
  int lane_count() const { return static_cast<int>(lanes_.size()); }
  double lane_width() const { return lane_width_; }
  bool empty() const { return lanes_.empty(); }

  // Outer road boundaries, offset half a lane outside the outermost
  // centerlines.
  const std::vector<Vec2>& outer_left() const { return outer_left_; }
  const std::vector<Vec2>& outer_right() const { return outer_right_; }

 private:
  std::vector<Centerline> lanes_;
  double lane_width_ = kDefaultLaneWidth;
  std::vector<Vec2> outer_left_;
  std::vector<Vec2> outer_right_;
};

// Projection onto a single centerline. The first and last segments are
// extended so points before the start or past the end still project.
FrenetProjection project_onto_lane(const Centerline& lane, Vec2 position, double heading);

// Projection onto the closest centerline by perpendicular distance; ties go to
// the lower lane index. Throws EmptyRoadway.
FrenetProjection project_to_frenet(const Roadway& roadway, Vec2 position, double heading);

Pose frenet_to_cartesian(const Centerline& lane, double s, double t);

// Curvature of the stored point closest in arclength. Throws OutOfRange.
double curvature_at(const Centerline& lane, double s);

MarkerDistances marker_distances(const Roadway& roadway, const FrenetProjection& proj);

// Signed distance of the vehicle center beyond the nearer outer road marker
// (negative while inside the road).
double outer_marker_excess(const Roadway& roadway, const FrenetProjection& proj);

// Centerline CSV: header `lane,x,y`, points of each lane in travel order.
Roadway load_centerlines(const std::filesystem::path& path, double lane_width);
void save_centerlines(const std::filesystem::path& path, const Roadway& roadway);

// Parallel straight lanes along +x starting at the origin, lane 0 on y = 0.
Roadway make_straight_roadway(int lanes, double length, double lane_width = Roadway::kDefaultLaneWidth,
                              double spacing = 10.0);

}  // namespace driveimit
