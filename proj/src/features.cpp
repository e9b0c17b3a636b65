#include "driveimit/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "driveimit/error.hpp"

namespace driveimit {

double beam_angle(std::size_t k) {
  return 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(kBeamCount);
}

CoreFeatures core_features(const VehicleState& ego, const VehicleDef& def, const Roadway& roadway) {
  return core_features(ego, def, roadway, project_to_frenet(roadway, {ego.x, ego.y}, ego.heading));
}

CoreFeatures core_features(const VehicleState& ego, const VehicleDef& def, const Roadway& roadway,
                           const FrenetProjection& proj) {
  const Centerline& lane = roadway.lanes()[proj.lane_index];
  const MarkerDistances m = marker_distances(roadway, proj);
  CoreFeatures c;
  c.speed = ego.speed;
  c.length = def.length;
  c.width = def.width;
  c.lane_offset = proj.t;
  c.lane_rel_heading = proj.phi;
  c.curvature = curvature_at(lane, std::clamp(proj.s, 0.0, lane.length()));
  c.marker_left = m.left;
  c.marker_right = m.right;
  return c;
}

std::optional<double> ray_obb_distance(Vec2 origin, Vec2 dir, const VehicleState& box,
                                       const VehicleDef& def) {
  const double c = std::cos(box.heading), s = std::sin(box.heading);
  const double ox = origin.x - box.x, oy = origin.y - box.y;
  // Into the box frame.
  const double lo[2] = {c * ox + s * oy, -s * ox + c * oy};
  const double ld[2] = {c * dir.x + s * dir.y, -s * dir.x + c * dir.y};
  const double half[2] = {0.5 * def.length, 0.5 * def.width};
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a) {
    if (std::abs(ld[a]) < 1e-15) {
      if (std::abs(lo[a]) > half[a]) return std::nullopt;
      continue;
    }
    double t1 = (-half[a] - lo[a]) / ld[a];
    double t2 = (half[a] - lo[a]) / ld[a];
    if (t1 > t2) std::swap(t1, t2);
    t_enter = std::max(t_enter, t1);
    t_exit = std::min(t_exit, t2);
  }
  if (t_enter > t_exit || t_exit < 0.0) return std::nullopt;
  return std::max(t_enter, 0.0);
}

LidarScan lidar_scan(const VehicleState& ego, std::span<const Participant> others) {
  LidarScan scan;
  scan.ranges.fill(kBeamMaxRange);
  scan.range_rates.fill(0.0);
  const Vec2 ego_vel = velocity_of(ego);
  // Only vehicles that can intersect a beam within max range.
  for (const auto& o : others) {
    const double reach = kBeamMaxRange + 0.5 * std::hypot(o.def.length, o.def.width);
    const double dx = o.state.x - ego.x, dy = o.state.y - ego.y;
    if (dx * dx + dy * dy > reach * reach) continue;
    const Vec2 v = velocity_of(o.state);
    for (std::size_t k = 0; k < kBeamCount; ++k) {
      const double ang = ego.heading + beam_angle(k);
      const Vec2 dir{std::cos(ang), std::sin(ang)};
      const auto hit = ray_obb_distance({ego.x, ego.y}, dir, o.state, o.def);
      if (!hit || *hit > kBeamMaxRange || *hit >= scan.ranges[k]) continue;
      scan.ranges[k] = std::max(*hit, 1e-3);
      scan.range_rates[k] = (v.x - ego_vel.x) * dir.x + (v.y - ego_vel.y) * dir.y;
    }
  }
  return scan;
}

IndicatorFeatures indicators(const VehicleState& ego, const VehicleDef& def,
                             std::span<const Participant> others, const Roadway& roadway,
                             const FrenetProjection& proj) {
  IndicatorFeatures ind;
  for (const auto& o : others) {
    if (obb_intersects(ego, def, o.state, o.def)) {
      ind.colliding = true;
      break;
    }
  }
  ind.offroad = outer_marker_excess(roadway, proj) > kOffroadThreshold;
  ind.reversing = ego.speed < 0.0;
  return ind;
}

FeatureNormalizer::FeatureNormalizer() {
  mean_.fill(0.0);
  std_.fill(1.0);
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeatureVector> samples) {
  FeatureNormalizer n;
  if (samples.empty()) return n;
  const double count = static_cast<double>(samples.size());
  for (std::size_t d = 0; d < kIndicatorOffset; ++d) {
    double sum = 0.0;
    for (const auto& s : samples) sum += s[d];
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& s : samples) ss += (s[d] - mean) * (s[d] - mean);
    n.mean_[d] = mean;
    n.std_[d] = std::max(std::sqrt(ss / count), kStdFloor);
  }
  return n;
}

FeatureVector FeatureNormalizer::apply(const FeatureVector& raw) const {
  FeatureVector out;
  for (std::size_t d = 0; d < kFeatureCount; ++d) {
    out[d] = d >= kIndicatorOffset ? raw[d] : (raw[d] - mean_[d]) / std_[d];
  }
  return out;
}

void FeatureNormalizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(17);
  out << "index,mean,std\n";
  for (std::size_t d = 0; d < kFeatureCount; ++d) out << d << ',' << mean_[d] << ',' << std_[d] << '\n';
}

FeatureNormalizer FeatureNormalizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,mean,std") throw Error(ErrorCode::kParseError, path.string() + ":1: bad header");
  FeatureNormalizer n;
  std::size_t seen = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c);
    try {
      const std::size_t d = std::stoul(a);
      if (d >= kFeatureCount) throw std::out_of_range("index");
      n.mean_[d] = std::stod(b);
      n.std_[d] = std::max(std::stod(c), kStdFloor);
      ++seen;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(lineno) + ": bad row");
    }
  }
  if (seen != kFeatureCount) {
    throw Error(ErrorCode::kLengthMismatch, "normalization stats need " +
                                                std::to_string(kFeatureCount) + " rows");
  }
  for (std::size_t d = kIndicatorOffset; d < kFeatureCount; ++d) {
    n.mean_[d] = 0.0;
    n.std_[d] = 1.0;
  }
  return n;
}

FeatureVector assemble_features(const CoreFeatures& core, const LidarScan& scan,
                                const IndicatorFeatures& ind) {
  FeatureVector v{};
  v[0] = core.speed;
  v[1] = core.length;
  v[2] = core.width;
  v[3] = core.lane_offset;
  v[4] = core.lane_rel_heading;
  v[5] = core.curvature;
  v[6] = core.marker_left;
  v[7] = core.marker_right;
  std::copy(scan.ranges.begin(), scan.ranges.end(), v.begin() + kRangeOffset);
  std::copy(scan.range_rates.begin(), scan.range_rates.end(), v.begin() + kRangeRateOffset);
  v[kIndicatorOffset] = ind.colliding ? 1.0 : 0.0;
  v[kIndicatorOffset + 1] = ind.offroad ? 1.0 : 0.0;
  v[kIndicatorOffset + 2] = ind.reversing ? 1.0 : 0.0;
  return v;
}

FeatureVector assemble_and_normalize(const CoreFeatures& core, const LidarScan& scan,
                                     const IndicatorFeatures& ind, const FeatureNormalizer& stats) {
  return stats.apply(assemble_features(core, scan, ind));
}

FeatureVector to_feature_vector(std::span<const double> values) {
  if (values.size() != kFeatureCount) {
    throw Error(ErrorCode::kLengthMismatch, "feature vector must have 51 values, got " +
                                                std::to_string(values.size()));
  }
  FeatureVector v;
  std::copy(values.begin(), values.end(), v.begin());
  return v;
}

}  // namespace driveimit
