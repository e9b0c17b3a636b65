#pragma once

// Run configuration: one sectioned INI file, then `section.key=value`
// overrides. Every key has a default; unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "driveimit/baselines.hpp"
#include "driveimit/learn.hpp"
#include "driveimit/metrics.hpp"
#include "driveimit/synth.hpp"

namespace driveimit {

inline constexpr const char* kOutputDirEnv = "DRIVEIMIT_OUTPUT_DIR";

struct RunConfig {
  std::uint64_t seed = 1;
  unsigned jobs = 0;  // 0: available parallelism
  std::filesystem::path output = "out";
  std::filesystem::path data;               // ingested dataset; empty: <output>/data
  std::filesystem::path trajectories;       // raw inputs for ingest
  std::filesystem::path centerlines;
  double lane_width = Roadway::kDefaultLaneWidth;

  SimConfig sim;
  IdmMobilParams driver;  // bounds come from [sim]
  ControllerNoise noise;
  EkfNoise ekf;

  std::size_t expert_episodes = 200;
  double heldout_fraction = 0.1;
  std::size_t normalizer_episodes = 500;  // replayed windows used for feature stats

  BcConfig bc;
  TrpoConfig trpo;
  GailConfig gail;
  BicConfig mr;
  CampaignConfig metrics;
  SynthConfig synth;  // lane width, driver and noise are taken from the sections above

  std::filesystem::path data_dir() const;
  unsigned effective_jobs() const;
  // Copies the shared sections into the nested configs that need them.
  SimConfig sim_config() const;
  SynthConfig synth_config() const;
  IdmMobilParams driver_params() const;
};

// Applies one `section.key` assignment; throws ConfigError.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

// Reads `file` (if given), then the output-directory environment variable,
// then each `section.key=value` override in order. Throws ConfigError.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

// The full configuration as INI text; reading it back reproduces `cfg`.
std::string dump_config(const RunConfig& cfg);

}  // namespace driveimit
