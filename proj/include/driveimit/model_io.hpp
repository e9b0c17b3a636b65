#pragma once

// Versioned JSON model files. Every file carries a format tag, a version and
// a model kind; networks also carry their architecture descriptor and named
// parameter slices, and loading rejects a descriptor that does not match.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "driveimit/baselines.hpp"
#include "driveimit/net.hpp"
#include "driveimit/simenv.hpp"

namespace driveimit {

inline constexpr int kModelFormatVersion = 1;

enum class ModelKind { kPolicy, kDiscriminator, kStaticGaussian, kMixtureRegression };
std::string_view model_kind_name(ModelKind k);

struct PolicyFile {
  std::string name;               // e.g. "gail-mlp"
  std::string normalization;      // feature stats file, relative to the model
  GaussianPolicyNet net;
};

void save_policy(const std::filesystem::path& path, const GaussianPolicyNet& net, const std::string& name,
                 const std::string& normalization);
// Throws ArchitectureMismatch when `expected` is given and differs, or when
// the stored slices do not fit the stored architecture.
PolicyFile load_policy(const std::filesystem::path& path,
                       const std::optional<PolicyArchitecture>& expected = std::nullopt);

void save_discriminator(const std::filesystem::path& path, const DiscriminatorNet& disc);
DiscriminatorNet load_discriminator(const std::filesystem::path& path);

void save_static_gaussian(const std::filesystem::path& path, const StaticGaussian& g);
StaticGaussian load_static_gaussian(const std::filesystem::path& path);

void save_mixture(const std::filesystem::path& path, const MixtureRegression& mr);
MixtureRegression load_mixture(const std::filesystem::path& path);

ModelKind peek_model_kind(const std::filesystem::path& path);

// A simulator policy from a policy, static Gaussian or mixture file. The
// feature normalization referenced by a policy file is returned through
// `normalization` (empty for baselines).
std::unique_ptr<Policy> load_model_policy(const std::filesystem::path& path, std::string* normalization = nullptr);

}  // namespace driveimit
