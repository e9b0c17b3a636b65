#pragma once

// Smoothing a noisy constant-speed arc.

#include <cmath>
#include <random>
#include <vector>

#include "driveimit/ingest.hpp"

namespace driveimit::test {

struct ArcSmoothing {
  double raw_rmse = 0.0;
  double smoothed_rmse = 0.0;
};

// 100 frames on a circle with per-axis position noise `sigma`. Speed and
// radius vary with the seed.
inline ArcSmoothing smooth_noisy_arc(std::uint64_t seed, double sigma = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::uniform_real_distribution<double> speed_dist(15.0, 30.0), radius_dist(200.0, 1000.0), side(0.0, 1.0);
  const double speed = speed_dist(rng);
  const double radius = radius_dist(rng) * (side(rng) < 0.5 ? -1.0 : 1.0);
  RawTrajectory raw;
  raw.vehicle.id = 1;
  std::vector<Vec2> truth;
  for (int i = 0; i < 100; ++i) {
    const double th = speed * 0.1 * i / radius;
    truth.push_back({radius * std::sin(th), radius - radius * std::cos(th)});
    raw.samples.push_back({i, truth.back().x + noise(rng), truth.back().y + noise(rng)});
  }
  const Trajectory t = ekf_smooth(raw);
  double raw_se = 0.0, sm_se = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    raw_se += std::pow(raw.samples[i].x - truth[i].x, 2) + std::pow(raw.samples[i].y - truth[i].y, 2);
    sm_se += std::pow(t.states[i].x - truth[i].x, 2) + std::pow(t.states[i].y - truth[i].y, 2);
  }
  const double n = static_cast<double>(truth.size());
  return {std::sqrt(raw_se / n), std::sqrt(sm_se / n)};
}

}  // namespace driveimit::test
