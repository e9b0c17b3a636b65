#pragma once

// Validation metrics: RWSE, histogram KL divergence, emergent behavior rates,
// iTTC samples and the campaign driver that runs every model on a shared
// scene sample.

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "driveimit/simenv.hpp"

namespace driveimit {

// The number of samples per trajectory is the campaign's repeat count.
struct RwseConfig {
  std::vector<double> horizons{0.5, 1.0, 2.0, 3.0, 4.0, 5.0};  // s
};

// RWSE at one horizon. errors[i][j] is the deviation of sample j of
// trajectory i from the truth; every trajectory must carry the same number of
// samples (MisalignedSamples otherwise).
double rwse(std::span<const std::vector<double>> errors);

enum class RwseVariable { kPosition, kLaneOffset, kSpeed };
std::string_view rwse_variable_name(RwseVariable v);

// Per-variable curves, indexed like RwseConfig::horizons.
using RwseTable = std::map<RwseVariable, std::vector<double>>;

// `sims[i]` are the rollouts started from scene i; truth is the recorded ego.
// Positions compare Euclidean global positions; rollouts that ended early
// hold their final state.
RwseTable rwse_table(const Dataset& data, const SimConfig& sim, std::span<const Scene> scenes,
                     std::span<const std::vector<EpisodeRollout>> sims, const RwseConfig& cfg);

class Histogram {
 public:
  static constexpr std::size_t kDefaultBins = 100;
  Histogram(double lo, double hi, std::size_t bins = kDefaultBins);

  // Values outside [lo, hi] land in the edge bins.
  void add(double x);
  void add(std::span<const double> xs) {
    for (double x : xs) add(x);
  }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t bins() const { return counts_.size(); }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }

 private:
  double lo_, hi_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline constexpr double kKlSmoothing = 1e-6;

// KL(p || q) of two count vectors after adding kKlSmoothing to each bin
// probability and renormalizing.
double kl_from_counts(std::span<const double> p, std::span<const double> q);
// Throws RangeMismatch when ranges or bin counts differ.
double kl_divergence(const Histogram& real, const Histogram& sim);

// Linear-interpolated percentile, q in [0, 100].
double percentile(std::vector<double> xs, double q);

struct EmergentReport {
  double lane_change_rate = 0.0;  // mean changes per trajectory
  double offroad_duration = 0.0;  // mean offroad steps per trajectory
  double collision_rate = 0.0;    // fraction of trajectories
  double hard_brake_rate = 0.0;   // fraction of trajectories
};

inline constexpr int kLaneChangeDebounce = 5;
inline constexpr double kHardBrakeAccel = -3.0;

// Lane changes in a lane-index sequence: a new lane must persist for
// `debounce` consecutive samples.
int count_lane_changes(std::span<const int> lanes, int debounce = kLaneChangeDebounce);

EmergentReport emergent_metrics(std::span<const EpisodeRollout> rollouts);

// max(0, closing) / gap for every step with a same-lane leader.
std::vector<double> ittc_samples(std::span<const EpisodeRollout> rollouts);

enum class Quantity { kIttc, kSpeed, kAccel, kTurnRate, kJerk };
inline constexpr std::array<Quantity, 5> kQuantities{Quantity::kIttc, Quantity::kSpeed, Quantity::kAccel,
                                                     Quantity::kTurnRate, Quantity::kJerk};
std::string_view quantity_name(Quantity q);

// Samples of a quantity over a set of rollouts. Speed, acceleration, turn rate
// and jerk are realized values from consecutive simulated states.
std::vector<double> quantity_samples(std::span<const EpisodeRollout> rollouts, Quantity q, double dt);

struct CampaignConfig {
  std::size_t scenes = 100;
  int repeats = 5;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  RwseConfig rwse;
};

struct ModelReport {
  std::string name;
  std::size_t rollouts = 0;
  double mean_length = 0.0;
  std::map<std::string, int> terminations;
  RwseTable rwse;
  std::map<Quantity, double> kl;
  EmergentReport emergent;
};

struct CampaignReport {
  std::vector<Scene> scenes;
  std::vector<double> horizons;
  std::map<Quantity, std::pair<double, double>> ranges;
  EmergentReport real;
  std::vector<ModelReport> models;
};

// Scenes are a seeded sample shared by all models; the real-data reference
// replays the recorded ego once per scene. Throws NoEligibleScene.
CampaignReport run_campaign(std::span<const Policy* const> models, std::shared_ptr<const Dataset> data,
                            const SimConfig& sim, const FeatureNormalizer& normalizer, const CampaignConfig& cfg);

// Seeded uniform sample of eligible scenes without replacement, sorted.
std::vector<Scene> sample_scenes(const Env& env, std::size_t count, std::uint64_t seed);

// evaluation.json, rwse_{position,lane_offset,speed}.csv, kl_divergences.csv and
// emergent_values.csv under `dir`.
void write_report(const std::filesystem::path& dir, const CampaignReport& report);
std::string report_json(const CampaignReport& report);
CampaignReport parse_report_json(const std::string& text);  // throws ParseError

}  // namespace driveimit
