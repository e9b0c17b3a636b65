#include "driveimit/roadway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "driveimit/error.hpp"

namespace driveimit {

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

Centerline::Centerline(std::span<const Vec2> points) {
  if (points.size() < 2) {
    throw Error(ErrorCode::kOutOfRange, "centerline needs at least 2 points");
  }
  points_.reserve(points.size());
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0) {
      const double ds = std::hypot(points[i].x - points[i - 1].x, points[i].y - points[i - 1].y);
      if (!(ds > 0.0)) {
        throw Error(ErrorCode::kOutOfRange, "centerline points must be distinct");
      }
      s += ds;
    }
    points_.push_back({points[i].x, points[i].y, s, 0.0, 0.0});
  }
  const std::size_t n = points_.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    points_[i].heading =
        std::atan2(points_[i + 1].y - points_[i].y, points_[i + 1].x - points_[i].x);
  }
  points_[n - 1].heading = points_[n - 2].heading;
  // Turning angle at each interior vertex over the mean adjacent segment length.
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double dh = wrap_angle(points_[i].heading - points_[i - 1].heading);
    points_[i].curvature = dh / (0.5 * (points_[i + 1].s - points_[i - 1].s));
  }
  if (n > 2) {
    points_[0].curvature = points_[1].curvature;
    points_[n - 1].curvature = points_[n - 2].curvature;
  }
}

namespace {

std::vector<Vec2> offset_polyline(const Centerline& lane, double t) {
  std::vector<Vec2> out;
  out.reserve(lane.points().size());
  for (const auto& p : lane.points()) {
    const Pose pose = frenet_to_cartesian(lane, p.s, t);
    out.push_back({pose.x, pose.y});
  }
  return out;
}

}  // namespace

Roadway::Roadway(std::vector<Centerline> lanes, double lane_width)
    : lanes_(std::move(lanes)), lane_width_(lane_width) {
  if (!(lane_width_ > 0.0)) throw Error(ErrorCode::kConfigError, "lane_width must be positive");
  if (!lanes_.empty()) {
    outer_right_ = offset_polyline(lanes_.front(), -0.5 * lane_width_);
    outer_left_ = offset_polyline(lanes_.back(), 0.5 * lane_width_);
  }
}

FrenetProjection project_onto_lane(const Centerline& lane, Vec2 position, double heading) {
  const auto& pts = lane.points();
  const std::size_t segments = pts.size() - 1;
  double best_d2 = std::numeric_limits<double>::infinity();
  FrenetProjection best;
  for (std::size_t i = 0; i < segments; ++i) {
    const auto& a = pts[i];
    const auto& b = pts[i + 1];
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double len = b.s - a.s;
    const double px = position.x - a.x;
    const double py = position.y - a.y;
    double u = (px * ex + py * ey) / (len * len);
    if (i > 0) u = std::max(u, 0.0);
    if (i + 1 < segments) u = std::min(u, 1.0);
    const double fx = a.x + u * ex;
    const double fy = a.y + u * ey;
    const double dx = position.x - fx;
    const double dy = position.y - fy;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best.s = a.s + u * len;
      best.t = (ex * dy - ey * dx) / len;
      best.phi = wrap_angle(heading - a.heading);
    }
  }
  return best;
}

FrenetProjection project_to_frenet(const Roadway& roadway, Vec2 position, double heading) {
  if (roadway.empty()) throw Error(ErrorCode::kEmptyRoadway, "roadway has no lanes");
  FrenetProjection best;
  double best_abs = std::numeric_limits<double>::infinity();
  for (int k = 0; k < roadway.lane_count(); ++k) {
    FrenetProjection p = project_onto_lane(roadway.lanes()[k], position, heading);
    if (std::abs(p.t) < best_abs) {
      best_abs = std::abs(p.t);
      best = p;
      best.lane_index = k;
    }
  }
  return best;
}

Pose frenet_to_cartesian(const Centerline& lane, double s, double t) {
  const auto& pts = lane.points();
  auto it = std::upper_bound(pts.begin(), pts.end(), s,
                             [](double v, const CenterlinePoint& p) { return v < p.s; });
  std::size_t i = it == pts.begin() ? 0 : static_cast<std::size_t>(it - pts.begin()) - 1;
  i = std::min(i, pts.size() - 2);
  const auto& a = pts[i];
  const auto& b = pts[i + 1];
  const double len = b.s - a.s;
  const double u = (s - a.s) / len;
  const double ux = (b.x - a.x) / len;
  const double uy = (b.y - a.y) / len;
  return {a.x + u * (b.x - a.x) - t * uy, a.y + u * (b.y - a.y) + t * ux, a.heading};
}

double curvature_at(const Centerline& lane, double s) {
  const auto& pts = lane.points();
  if (!(s >= 0.0 && s <= lane.length())) {
    throw Error(ErrorCode::kOutOfRange, "arclength " + std::to_string(s) + " outside lane");
  }
  auto it = std::lower_bound(pts.begin(), pts.end(), s,
                             [](const CenterlinePoint& p, double v) { return p.s < v; });
  if (it == pts.end()) return pts.back().curvature;
  if (it != pts.begin() && (s - std::prev(it)->s) <= (it->s - s)) --it;
  return it->curvature;
}

MarkerDistances marker_distances(const Roadway& roadway, const FrenetProjection& proj) {
  const double half = 0.5 * roadway.lane_width();
  return {half - proj.t, half + proj.t};
}

double outer_marker_excess(const Roadway& roadway, const FrenetProjection& proj) {
  const double w = roadway.lane_width();
  const double lateral = proj.lane_index * w + proj.t;
  const double right = -lateral - 0.5 * w;
  const double left = lateral - ((roadway.lane_count() - 1) * w + 0.5 * w);
  return std::max(left, right);
}

Roadway load_centerlines(const std::filesystem::path& path, double lane_width) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, path.string() + ":1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "lane,x,y") {
    throw Error(ErrorCode::kParseError, path.string() + ":1: expected header lane,x,y");
  }
  std::map<int, std::vector<Vec2>> by_lane;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(lineno) +
                                              ": expected 3 fields");
    }
    try {
      by_lane[std::stoi(a)].push_back({std::stod(b), std::stod(c)});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  std::vector<Centerline> lanes;
  int expected = 0;
  for (auto& [idx, pts] : by_lane) {
    if (idx != expected++) {
      throw Error(ErrorCode::kParseError, "lane indices must be contiguous from 0");
    }
    lanes.emplace_back(pts);
  }
  return Roadway(std::move(lanes), lane_width);
}

void save_centerlines(const std::filesystem::path& path, const Roadway& roadway) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(17);
  out << "lane,x,y\n";
  for (int k = 0; k < roadway.lane_count(); ++k) {
    for (const auto& p : roadway.lanes()[k].points()) out << k << ',' << p.x << ',' << p.y << '\n';
  }
}

Roadway make_straight_roadway(int lanes, double length, double lane_width, double spacing) {
  std::vector<Centerline> cls;
  const int n = std::max(1, static_cast<int>(std::ceil(length / spacing)));
  for (int k = 0; k < lanes; ++k) {
    std::vector<Vec2> pts;
    for (int i = 0; i <= n; ++i) pts.push_back({length * i / n, k * lane_width});
    cls.emplace_back(pts);
  }
  return Roadway(std::move(cls), lane_width);
}

}  // namespace driveimit
