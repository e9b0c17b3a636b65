#pragma once

// TRPO scenarios shared by the unit and acceptance tests.

#include <cmath>
#include <memory>
#include <vector>

#include "driveimit/learn.hpp"
#include "driveimit/policies.hpp"
#include "support.hpp"

namespace driveimit::test {

// Standard normal observations shifted by `shift` along the first feature.
inline std::vector<StateAction> gaussian_pairs(std::size_t n, double shift, Rng& rng) {
  std::vector<StateAction> out(n);
  for (auto& p : out) {
    for (std::size_t d = 0; d < kFeatureCount; ++d) p.obs[d] = standard_normal(rng);
    p.obs[0] += shift;
    p.action = {standard_normal(rng), 0.1 * standard_normal(rng)};
  }
  return out;
}

// Accuracy after training on separable (shifted) or identically distributed
// pairs; the identical case is measured on fresh samples.
inline double disc_accuracy_after_training(std::uint64_t seed, bool separable) {
  Rng rng(seed);
  DiscriminatorNet d(seed);
  if (separable) {
    const auto expert = gaussian_pairs(1000, 4.0, rng);
    const auto policy = gaussian_pairs(1000, -4.0, rng);
    DiscTrainer(d, DiscConfig{1e-3, 5, 128}).update(expert, policy, rng);
    return disc_accuracy(d, expert, policy);
  }
  const auto expert = gaussian_pairs(2000, 0.0, rng);
  const auto policy = gaussian_pairs(2000, 0.0, rng);
  DiscTrainer(d, DiscConfig{1e-3, 2, 256}).update(expert, policy, rng);
  return disc_accuracy(d, gaussian_pairs(4000, 0.0, rng), gaussian_pairs(4000, 0.0, rng));
}

// Gaussian bandit with reward -(a - 3)^2: each iteration samples `batch`
// one-step episodes, centres the rewards and takes one TRPO step. Returns the
// iteration at which |mu - 3| < 0.1 first held, or -1.
inline int bandit_iterations_to_converge(std::uint64_t seed, int max_iters = 200, int batch = 200,
                                         double* final_mu = nullptr) {
  BanditPolicy policy(0.0, 0.0);
  TrpoConfig cfg;
  Rng rng(seed);
  int reached = -1;
  for (int it = 0; it < max_iters; ++it) {
    const GaussianActionDist d = policy.dist();
    std::vector<TrpoEpisode> eps(static_cast<std::size_t>(batch));
    double mean = 0.0;
    for (auto& e : eps) {
      const SampledAction s = sample_and_logprob(d, rng);
      e.actions.push_back(s.action);
      e.advantages.push_back(-(s.action.accel - 3.0) * (s.action.accel - 3.0));
      mean += e.advantages.back() / batch;
    }
    for (auto& e : eps) e.advantages[0] -= mean;
    trpo_update(policy, eps, cfg);
    if (reached < 0 && std::abs(policy.dist().mu[0] - 3.0) < 0.1) reached = it + 1;
  }
  if (final_mu != nullptr) *final_mu = policy.dist().mu[0];
  return reached;
}

inline std::shared_ptr<const Dataset> fixture_dataset() {
  const auto raws = load_trajectories(kFixtures / "three_vehicles.csv");
  return std::make_shared<const Dataset>(load_centerlines(kFixtures / "three_vehicles_centerlines.csv", 3.7),
                                         ekf_smooth_all(raws, EkfNoise{}, 1));
}

struct TrpoStepCheck {
  bool accepted = false;
  double reported_kl = 0.0;
  double measured_kl = 0.0;          // mean over steps, recomputed from the network
  double measured_improvement = 0.0;  // importance-weighted surrogate after minus before
};

// One TRPO step of a fresh policy on rollouts from the fixture scenes with
// random advantages; the KL and surrogate change are measured independently
// of the update's own bookkeeping.
inline TrpoStepCheck trpo_random_batch(PolicyArch arch, std::uint64_t seed, int episodes = 2) {
  auto data = fixture_dataset();
  auto net = std::make_shared<GaussianPolicyNet>(GaussianPolicyNet::make(arch, seed));
  ActionScaling sc;
  sc.scale = {1.0, 0.05};
  net->set_scaling(sc);
  Env env(data, SimConfig{});
  NeuralPolicy policy(net, "p");
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<TrpoEpisode> batch;
  for (int e = 0; e < episodes; ++e) {
    const EpisodeRollout ro = rollout(policy, env, rng);
    TrpoEpisode ep;
    for (const auto& s : ro.steps) {
      ep.obs.insert(ep.obs.end(), s.obs.begin(), s.obs.end());
      ep.actions.push_back(s.action);
      ep.advantages.push_back(n(rng));
    }
    batch.push_back(std::move(ep));
  }
  std::vector<std::vector<GaussianActionDist>> before;
  for (const auto& ep : batch) before.push_back(net->forward_sequence(std::span<const double>(ep.obs)).dists());

  NetTrpoPolicy tp(*net);
  const TrpoDiagnostics diag = trpo_update(tp, batch, TrpoConfig{});

  TrpoStepCheck out;
  out.accepted = diag.accepted;
  out.reported_kl = diag.mean_kl;
  double kl = 0.0, surr_before = 0.0, surr_after = 0.0;
  std::size_t total = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto after = net->forward_sequence(std::span<const double>(batch[e].obs)).dists();
    for (std::size_t t = 0; t < after.size(); ++t) {
      kl += gaussian_kl(before[e][t], after[t]);
      const double ratio = std::exp(gaussian_log_prob(after[t], batch[e].actions[t]) -
                                    gaussian_log_prob(before[e][t], batch[e].actions[t]));
      surr_after += ratio * batch[e].advantages[t];
      surr_before += batch[e].advantages[t];
      ++total;
    }
  }
  out.measured_kl = kl / static_cast<double>(total);
  out.measured_improvement = (surr_after - surr_before) / static_cast<double>(total);
  return out;
}

// Conjugate gradient against a dense solve on a random SPD system.
inline double cg_relative_error(std::uint64_t seed, int dim = 20) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  const Eigen::MatrixXd a = m * m.transpose() + dim * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd b(dim);
  for (Eigen::Index i = 0; i < dim; ++i) b[i] = n(rng);
  const Eigen::VectorXd direct = a.ldlt().solve(b);
  const Eigen::VectorXd cg =
      conjugate_gradient([&](const Eigen::VectorXd& v) { return Eigen::VectorXd(a * v); }, b, 2 * dim, 1e-30);
  return (cg - direct).norm() / direct.norm();
}

}  // namespace driveimit::test
