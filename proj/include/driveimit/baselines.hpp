#pragma once

// Static Gaussian and Gaussian-mixture-regression driving models.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "driveimit/dynamics.hpp"
#include "driveimit/features.hpp"
#include "driveimit/rng.hpp"

namespace driveimit {

struct StaticGaussian {
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
};

// Sample mean and MLE covariance (divisor N) plus a 1e-9 ridge. Throws
// TooFewSamples for fewer than two actions.
StaticGaussian fit_static_gaussian(std::span<const DriveAction> actions);

struct GaussianComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Joint mixture over (action, selected features). The first two dimensions are
// the action.
struct MixtureRegression {
  std::vector<GaussianComponent> components;
  std::vector<std::size_t> features;  // indices into the feature vector

  std::size_t dim() const { return components.empty() ? 0 : static_cast<std::size_t>(components[0].mean.size()); }
};

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-7;
  double ridge = 1e-6;
};

struct EmResult {
  MixtureRegression model;
  std::vector<double> log_likelihood;  // total, per iteration
};

// Rows of `data` are samples. k-means++ seeding; a component whose weight
// drops below 1e-8 is re-seeded once, then DegenerateComponent is thrown.
EmResult em_fit(const Eigen::MatrixXd& data, int k, std::uint64_t seed, const EmConfig& cfg = {});

double gmm_log_likelihood(const MixtureRegression& m, const Eigen::MatrixXd& data);
// Means, free covariance entries and K - 1 weights.
std::size_t gmm_parameter_count(int k, std::size_t dim);

struct ConditionalMixture {
  std::vector<double> weights;
  std::vector<Eigen::Vector2d> means;
  std::vector<Eigen::Matrix2d> covs;
};

// Action mixture conditioned on the selected entries of `features`.
ConditionalMixture mr_conditional(const MixtureRegression& mr, std::span<const double> features);

struct BicConfig {
  int k = 4;
  std::size_t max_features = 10;
  std::size_t max_samples = 3000;  // subsample used during selection
  EmConfig em{50};  // iterations per candidate fit
};

// Greedy forward selection of feature indices by joint-model BIC.
std::vector<std::size_t> greedy_bic_select(std::span<const FeatureVector> features,
                                           std::span<const DriveAction> actions,
                                           std::span<const std::size_t> candidates, const BicConfig& cfg,
                                           std::uint64_t seed);

// Joint data matrix rows [accel, turn_rate, f[idx]...].
Eigen::MatrixXd joint_matrix(std::span<const FeatureVector> features, std::span<const DriveAction> actions,
                             std::span<const std::size_t> idx);

MixtureRegression fit_mixture_regression(std::span<const FeatureVector> features,
                                         std::span<const DriveAction> actions, const BicConfig& cfg,
                                         std::uint64_t seed);

}  // namespace driveimit
