#pragma once

// The 51-element observation: 8 core features, 20 beam ranges, 20 beam range
// rates and 3 indicator bits, in that order.

#include <array>
#include <filesystem>
#include <optional>
#include <span>

#include "driveimit/dynamics.hpp"
#include "driveimit/roadway.hpp"

namespace driveimit {

inline constexpr std::size_t kCoreCount = 8;
inline constexpr std::size_t kBeamCount = 20;
inline constexpr std::size_t kIndicatorCount = 3;
inline constexpr std::size_t kFeatureCount = kCoreCount + 2 * kBeamCount + kIndicatorCount;
static_assert(kFeatureCount == 51);

inline constexpr std::size_t kRangeOffset = kCoreCount;
inline constexpr std::size_t kRangeRateOffset = kCoreCount + kBeamCount;
inline constexpr std::size_t kIndicatorOffset = kCoreCount + 2 * kBeamCount;

inline constexpr double kBeamMaxRange = 100.0;
inline constexpr double kOffroadThreshold = 1.0;

using FeatureVector = std::array<double, kFeatureCount>;

struct CoreFeatures {
  double speed = 0.0;
  double length = 0.0;
  double width = 0.0;
  double lane_offset = 0.0;
  double lane_rel_heading = 0.0;
  double curvature = 0.0;
  double marker_left = 0.0;
  double marker_right = 0.0;
};

struct LidarScan {
  std::array<double, kBeamCount> ranges{};
  std::array<double, kBeamCount> range_rates{};  // positive = opening
};

struct IndicatorFeatures {
  bool colliding = false;
  bool offroad = false;
  bool reversing = false;
};

// A participant as seen by the ego's sensors.
struct Participant {
  VehicleState state;
  VehicleDef def;
};

double beam_angle(std::size_t k);  // relative to ego heading

CoreFeatures core_features(const VehicleState& ego, const VehicleDef& def, const Roadway& roadway);
CoreFeatures core_features(const VehicleState& ego, const VehicleDef& def, const Roadway& roadway,
                           const FrenetProjection& proj);

// Distance along the ray to the first hit of an oriented box, if any.
std::optional<double> ray_obb_distance(Vec2 origin, Vec2 dir, const VehicleState& box,
                                       const VehicleDef& def);

LidarScan lidar_scan(const VehicleState& ego, std::span<const Participant> others);

IndicatorFeatures indicators(const VehicleState& ego, const VehicleDef& def,
                             std::span<const Participant> others, const Roadway& roadway,
                             const FrenetProjection& proj);

// Z-score normalization with frozen statistics. Indicator dimensions always
// pass through unchanged.
class FeatureNormalizer {
 public:
  static constexpr double kStdFloor = 1e-6;

  FeatureNormalizer();  // identity
  static FeatureNormalizer fit(std::span<const FeatureVector> samples);

  FeatureVector apply(const FeatureVector& raw) const;
  const FeatureVector& mean() const { return mean_; }
  const FeatureVector& stddev() const { return std_; }

  void save(const std::filesystem::path& path) const;  // CSV `index,mean,std`
  static FeatureNormalizer load(const std::filesystem::path& path);

 private:
  FeatureVector mean_{};
  FeatureVector std_{};
};

FeatureVector assemble_features(const CoreFeatures& core, const LidarScan& scan,
                                const IndicatorFeatures& ind);
FeatureVector assemble_and_normalize(const CoreFeatures& core, const LidarScan& scan,
                                     const IndicatorFeatures& ind, const FeatureNormalizer& stats);
// Checked variant for externally assembled vectors; throws LengthMismatch.
FeatureVector to_feature_vector(std::span<const double> values);

}  // namespace driveimit
