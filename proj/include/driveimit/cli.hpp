#pragma once

// Command-line front end. Diagnostics go to `err`; results go to files under
// the configured output directory.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "driveimit/config.hpp"
#include "driveimit/learn.hpp"

namespace driveimit {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

// An ingested dataset directory: smoothed.csv, vehicles.csv, centerlines.csv
// and feature_stats.csv.
struct PreparedData {
  std::shared_ptr<const Dataset> data;
  FeatureNormalizer normalizer;
};

PreparedData load_prepared(const std::filesystem::path& dir, double lane_width);

// Smooths raw trajectories, fits feature statistics and writes the dataset
// directory. Returns the loaded result.
PreparedData prepare_dataset(const Roadway& roadway, std::span<const RawTrajectory> raw, const RunConfig& cfg,
                             const std::filesystem::path& dir, std::ostream& log);

struct ExpertSplit {
  std::vector<ExpertEpisode> train;
  std::vector<ExpertEpisode> heldout;
};

// Seeded expert windows split into training and held-out episodes.
ExpertSplit load_expert(const PreparedData& prepared, const RunConfig& cfg);

}  // namespace driveimit
