#include "driveimit/ingest.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "driveimit/error.hpp"
#include "driveimit/parallel.hpp"

namespace driveimit {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line, const std::string& msg) {
  throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line) + ": " + msg);
}

double to_double(const std::string& s, const std::filesystem::path& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) parse_fail(path, line, "bad number '" + s + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    parse_fail(path, line, "bad number '" + s + "'");
  }
}

int to_int(const std::string& s, const std::filesystem::path& path, int line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) parse_fail(path, line, "bad integer '" + s + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    parse_fail(path, line, "bad integer '" + s + "'");
  }
}

std::ifstream open_with_header(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  if (strip_cr(line) != header) parse_fail(path, 1, "expected header " + header);
  return in;
}

}  // namespace

std::vector<RawTrajectory> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in = open_with_header(path, "vehicle_id,frame,class,length,width,x,y");
  std::map<int, RawTrajectory> by_id;
  std::vector<int> order;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) parse_fail(path, lineno, "expected 7 fields, got " + std::to_string(f.size()));
    const int id = to_int(f[0], path, lineno);
    RawSample s{to_int(f[1], path, lineno), to_double(f[5], path, lineno), to_double(f[6], path, lineno)};
    auto [it, inserted] = by_id.try_emplace(id);
    if (inserted) {
      VehicleDef def;
      def.id = id;
      try {
        def.vclass = parse_vehicle_class(f[2]);
      } catch (const Error&) {
        parse_fail(path, lineno, "unknown class '" + f[2] + "'");
      }
      def.length = to_double(f[3], path, lineno);
      def.width = to_double(f[4], path, lineno);
      if (!(def.length > 0.0 && def.width > 0.0)) parse_fail(path, lineno, "non-positive dimensions");
      it->second.vehicle = def;
      order.push_back(id);
    }
    it->second.samples.push_back(s);
  }
  std::vector<RawTrajectory> out;
  out.reserve(order.size());
  for (int id : order) {
    RawTrajectory& t = by_id[id];
    std::stable_sort(t.samples.begin(), t.samples.end(),
                     [](const RawSample& a, const RawSample& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < t.samples.size(); ++i) {
      if (t.samples[i].frame != t.samples[i - 1].frame + 1) {
        throw Error(ErrorCode::kGapError, "vehicle " + std::to_string(id) + " missing frame " +
                                              std::to_string(t.samples[i - 1].frame + 1));
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

void save_trajectories(const std::filesystem::path& path, std::span<const RawTrajectory> trajs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(10);
  out << "vehicle_id,frame,class,length,width,x,y\n";
  for (const auto& t : trajs) {
    for (const auto& s : t.samples) {
      out << t.vehicle.id << ',' << s.frame << ',' << vehicle_class_name(t.vehicle.vclass) << ','
          << t.vehicle.length << ',' << t.vehicle.width << ',' << s.x << ',' << s.y << '\n';
    }
  }
}

std::vector<RawTrajectory> filter_cars(std::span<const RawTrajectory> trajs) {
  std::vector<RawTrajectory> out;
  for (const auto& t : trajs) {
    if (t.vehicle.vclass == VehicleClass::kCar) out.push_back(t);
  }
  return out;
}

Trajectory ekf_smooth(const RawTrajectory& raw, const EkfNoise& noise) {
  using Mat4 = Eigen::Matrix4d;
  using Vec4 = Eigen::Vector4d;
  const std::size_t n = raw.samples.size();
  if (n < 2) throw Error(ErrorCode::kDegenerateInput, "ekf_smooth needs at least 2 samples");

  Trajectory out;
  out.vehicle = raw.vehicle;
  out.first_frame = raw.samples.front().frame;

  // Initial heading from the first non-zero displacement.
  double heading0 = 0.0;
  bool moving = false;
  for (std::size_t i = 1; i < n; ++i) {
    const double dx = raw.samples[i].x - raw.samples[0].x;
    const double dy = raw.samples[i].y - raw.samples[0].y;
    if (std::hypot(dx, dy) > 1e-9) {
      heading0 = std::atan2(dy, dx);
      moving = true;
      break;
    }
  }
  if (!moving) {
    out.degenerate = true;
    out.states.assign(n, VehicleState{raw.samples[0].x, raw.samples[0].y, 0.0, 0.0});
    return out;
  }
  const double dt = kFrameDt;
  const double speed0 =
      std::hypot(raw.samples[1].x - raw.samples[0].x, raw.samples[1].y - raw.samples[0].y) / dt;

  const double r2 = noise.measurement_sigma * noise.measurement_sigma;
  Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
  H(0, 0) = 1.0;
  H(1, 1) = 1.0;
  const Eigen::Matrix2d R = Eigen::Matrix2d::Identity() * r2;

  std::vector<Vec4> xf(n), xp(n);
  std::vector<Mat4> pf(n), pp(n), F(n);

  Vec4 x(raw.samples[0].x, raw.samples[0].y, heading0, speed0);
  Mat4 P = Vec4(r2, r2, 0.25, 4.0).asDiagonal();
  xp[0] = x;
  pp[0] = P;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      const double h = xf[k - 1](2);
      const double v = xf[k - 1](3);
      const double ch = std::cos(h), sh = std::sin(h);
      Mat4 Fk = Mat4::Identity();
      Fk(0, 2) = -v * sh * dt;
      Fk(0, 3) = ch * dt;
      Fk(1, 2) = v * ch * dt;
      Fk(1, 3) = sh * dt;
      // Acceleration and yaw-rate white noise mapped through the motion.
      Eigen::Matrix<double, 4, 2> G;
      G << 0.5 * ch * dt * dt, 0.0, 0.5 * sh * dt * dt, 0.0, 0.0, dt, dt, 0.0;
      const Eigen::Matrix2d Qc =
          Eigen::Vector2d(noise.accel_sigma * noise.accel_sigma,
                          noise.yaw_rate_sigma * noise.yaw_rate_sigma)
              .asDiagonal();
      const VehicleState pred =
          propagate({xf[k - 1](0), xf[k - 1](1), h, v}, DriveAction{}, dt);
      x = Vec4(pred.x, pred.y, h, v);
      P = Fk * pf[k - 1] * Fk.transpose() + G * Qc * G.transpose();
      F[k - 1] = Fk;
      xp[k] = x;
      pp[k] = P;
    }
    const Eigen::Vector2d z(raw.samples[k].x, raw.samples[k].y);
    const Eigen::Vector2d innov = z - H * x;
    const Eigen::Matrix2d S = H * P * H.transpose() + R;
    const Eigen::Matrix<double, 4, 2> K = P * H.transpose() * S.inverse();
    x += K * innov;
    x(2) = wrap_angle(x(2));
    const Mat4 IKH = Mat4::Identity() - K * H;
    P = IKH * P * IKH.transpose() + K * R * K.transpose();
    xf[k] = x;
    pf[k] = P;
  }

  std::vector<Vec4> xs(n);
  xs[n - 1] = xf[n - 1];
  Mat4 Ps = pf[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    const Mat4 C = pf[k] * F[k].transpose() * pp[k + 1].inverse();
    Vec4 d = xs[k + 1] - xp[k + 1];
    d(2) = wrap_angle(d(2));
    xs[k] = xf[k] + C * d;
    xs[k](2) = wrap_angle(xs[k](2));
    Ps = pf[k] + C * (Ps - pp[k + 1]) * C.transpose();
  }

  out.states.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.states.push_back({xs[k](0), xs[k](1), xs[k](2), xs[k](3)});
    if (k > 0 && std::abs(wrap_angle(xs[k](2) - xs[k - 1](2))) > 0.5 * std::numbers::pi) {
      ++out.heading_outliers;
    }
  }
  return out;
}

std::vector<Trajectory> ekf_smooth_all(std::span<const RawTrajectory> raws, const EkfNoise& noise,
                                       unsigned jobs) {
  std::vector<Trajectory> out(raws.size());
  parallel_for(raws.size(), jobs, [&](std::size_t i) { out[i] = ekf_smooth(raws[i], noise); });
  return out;
}

SceneIndex::SceneIndex(std::span<const Trajectory> trajs) {
  if (trajs.empty()) return;
  int lo = trajs.front().first_frame;
  int hi = trajs.front().last_frame();
  for (const auto& t : trajs) {
    if (t.states.empty()) continue;
    lo = std::min(lo, t.first_frame);
    hi = std::max(hi, t.last_frame());
  }
  first_frame_ = lo;
  buckets_.resize(static_cast<std::size_t>(hi - lo + 1));
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    for (int f = trajs[i].first_frame; f <= trajs[i].last_frame(); ++f) {
      buckets_[static_cast<std::size_t>(f - lo)].push_back({trajs[i].vehicle.id, i});
      ++total_;
    }
  }
}

std::span<const Occupant> SceneIndex::occupants(int frame) const {
  if (buckets_.empty() || frame < first_frame_ || frame > last_frame()) return {};
  return buckets_[static_cast<std::size_t>(frame - first_frame_)];
}

SceneIndex build_scene_index(std::span<const Trajectory> trajs) { return SceneIndex(trajs); }

void save_smoothed(const std::filesystem::path& path, std::span<const Trajectory> trajs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(17);
  out << "vehicle_id,frame,x,y,heading,speed\n";
  for (const auto& t : trajs) {
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      const auto& s = t.states[k];
      out << t.vehicle.id << ',' << t.first_frame + static_cast<int>(k) << ',' << s.x << ',' << s.y
          << ',' << s.heading << ',' << s.speed << '\n';
    }
  }
}

void save_vehicles(const std::filesystem::path& path, std::span<const Trajectory> trajs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(17);
  out << "vehicle_id,class,length,width\n";
  for (const auto& t : trajs) {
    out << t.vehicle.id << ',' << vehicle_class_name(t.vehicle.vclass) << ',' << t.vehicle.length
        << ',' << t.vehicle.width << '\n';
  }
}

std::vector<Trajectory> load_smoothed(const std::filesystem::path& smoothed,
                                      const std::filesystem::path& vehicles) {
  std::map<int, VehicleDef> defs;
  {
    std::ifstream in = open_with_header(vehicles, "vehicle_id,class,length,width");
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(line);
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != 4) parse_fail(vehicles, lineno, "expected 4 fields");
      VehicleDef d;
      d.id = to_int(f[0], vehicles, lineno);
      try {
        d.vclass = parse_vehicle_class(f[1]);
      } catch (const Error&) {
        parse_fail(vehicles, lineno, "unknown class '" + f[1] + "'");
      }
      d.length = to_double(f[2], vehicles, lineno);
      d.width = to_double(f[3], vehicles, lineno);
      defs[d.id] = d;
    }
  }
  std::ifstream in = open_with_header(smoothed, "vehicle_id,frame,x,y,heading,speed");
  std::map<int, std::size_t> slot;
  std::vector<Trajectory> out;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 6) parse_fail(smoothed, lineno, "expected 6 fields");
    const int id = to_int(f[0], smoothed, lineno);
    const int frame = to_int(f[1], smoothed, lineno);
    auto [it, inserted] = slot.try_emplace(id, out.size());
    if (inserted) {
      auto d = defs.find(id);
      if (d == defs.end()) parse_fail(smoothed, lineno, "vehicle " + f[0] + " missing from table");
      Trajectory t;
      t.vehicle = d->second;
      t.first_frame = frame;
      out.push_back(std::move(t));
    }
    Trajectory& t = out[it->second];
    if (frame != t.first_frame + static_cast<int>(t.states.size())) {
      throw Error(ErrorCode::kGapError, "vehicle " + f[0] + " missing frame " +
                                            std::to_string(t.first_frame + t.states.size()));
    }
    t.states.push_back({to_double(f[2], smoothed, lineno), to_double(f[3], smoothed, lineno),
                        to_double(f[4], smoothed, lineno), to_double(f[5], smoothed, lineno)});
  }
  return out;
}

}  // namespace driveimit
