#pragma once

// Policy optimization: advantage estimation, TRPO, the GAIL discriminator and
// surrogate reward, behavioral cloning and the outer GAIL loop.

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "driveimit/net.hpp"
#include "driveimit/simenv.hpp"

namespace driveimit {

// ---------------------------------------------------------------------------
// Returns and advantages

struct AdvantageResult {
  std::vector<std::vector<double>> returns;
  std::vector<std::vector<double>> advantages;  // raw GAE
  std::vector<std::vector<double>> normalized;  // zero mean, unit variance over the batch
};

// `values` holds the baseline prediction per step (empty = zero baseline).
// The value after the last step of every episode is taken as zero.
AdvantageResult compute_advantages(std::span<const std::vector<double>> rewards,
                                   std::span<const std::vector<double>> values, double gamma,
                                   double lambda);

// Linear value function on per-step features [o, o^2, tau, tau^2, tau^3, 1]
// with tau = step / 100, refit by ridge regression each iteration.
class LinearBaseline {
 public:
  explicit LinearBaseline(double ridge = 1e-5) : ridge_(ridge) {}
  bool fitted() const { return w_.size() > 0; }
  std::vector<double> predict(std::span<const double> obs, std::size_t obs_dim) const;
  void fit(std::span<const std::vector<double>> obs, std::size_t obs_dim,
           std::span<const std::vector<double>> returns);

 private:
  static Eigen::VectorXd features(const double* o, std::size_t obs_dim, std::size_t step);
  double ridge_;
  Eigen::VectorXd w_;
};

// ---------------------------------------------------------------------------
// TRPO

struct TrpoConfig {
  double gamma = 0.95;
  double lambda = 0.95;
  double kl_step = 0.01;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double backtrack_ratio = 0.5;
  int backtrack_steps = 10;
  int batch_steps = 5000;  // rollouts are collected until this many steps
  double fisher_subsample = 1.0;  // fraction of episodes used for Fisher products
};

// Opaque forward record of one episode.
class SequenceTrace {
 public:
  virtual ~SequenceTrace() = default;
  virtual const std::vector<GaussianActionDist>& dists() const = 0;
};

// A Gaussian policy differentiable w.r.t. a flat parameter vector.
class DifferentiablePolicy {
 public:
  virtual ~DifferentiablePolicy() = default;
  virtual std::span<double> parameters() = 0;
  virtual std::size_t obs_dim() const = 0;
  // `obs` is steps x obs_dim; recurrent policies unroll from a zero state.
  virtual std::unique_ptr<SequenceTrace> forward(std::span<const double> obs, std::size_t steps) const = 0;
  // Accumulates the pullback of `d_out` into `grad`; the trace stays reusable.
  virtual void vjp(const SequenceTrace& trace, std::span<const DistGrad> d_out, std::span<double> grad) const = 0;
  virtual std::vector<DistGrad> jvp(const SequenceTrace& trace, std::span<const double> tangent) const = 0;
};

class NetTrpoPolicy final : public DifferentiablePolicy {
 public:
  explicit NetTrpoPolicy(GaussianPolicyNet& net) : net_(net) {}
  std::span<double> parameters() override { return net_.params().values(); }
  std::size_t obs_dim() const override { return net_.input_dim(); }
  std::unique_ptr<SequenceTrace> forward(std::span<const double> obs, std::size_t steps) const override;
  void vjp(const SequenceTrace& trace, std::span<const DistGrad> d_out, std::span<double> grad) const override;
  std::vector<DistGrad> jvp(const SequenceTrace& trace, std::span<const double> tangent) const override;

 private:
  GaussianPolicyNet& net_;
};

// State-free Gaussian over the first action dimension with parameters
// (mu, log nu); the second dimension is fixed at N(0, 1).
class BanditPolicy final : public DifferentiablePolicy {
 public:
  BanditPolicy(double mu, double log_nu) : theta_{mu, log_nu} {}
  std::span<double> parameters() override { return theta_; }
  std::size_t obs_dim() const override { return 0; }
  GaussianActionDist dist() const;
  std::unique_ptr<SequenceTrace> forward(std::span<const double> obs, std::size_t steps) const override;
  void vjp(const SequenceTrace& trace, std::span<const DistGrad> d_out, std::span<double> grad) const override;
  std::vector<DistGrad> jvp(const SequenceTrace& trace, std::span<const double> tangent) const override;

 private:
  std::array<double, 2> theta_;
};

struct TrpoEpisode {
  std::vector<double> obs;  // steps x obs_dim
  std::vector<DriveAction> actions;
  std::vector<double> advantages;
  std::size_t steps() const { return actions.size(); }
};

struct TrpoDiagnostics {
  bool accepted = false;
  double surrogate_before = 0.0;
  double surrogate_improvement = 0.0;
  double mean_kl = 0.0;
  double step_fraction = 0.0;  // accepted fraction of the full natural step
  int backtracks = 0;
  double grad_norm = 0.0;
};

// Solves A x = b by conjugate gradient starting from zero.
Eigen::VectorXd conjugate_gradient(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_a,
                                   const Eigen::VectorXd& b, int iters, double residual_tol = 1e-10);

double gaussian_kl(const GaussianActionDist& p, const GaussianActionDist& q);

// Natural-gradient step constrained to mean KL(old || new) <= kl_step. The
// parameters are left unchanged when the gradient is zero or no backtracked
// step is accepted. Throws NonFiniteGradient (parameters untouched).
TrpoDiagnostics trpo_update(DifferentiablePolicy& policy, std::span<const TrpoEpisode> batch,
                            const TrpoConfig& cfg, Rng* fisher_rng = nullptr);

// ---------------------------------------------------------------------------
// Discriminator

struct StateAction {
  FeatureVector obs{};
  DriveAction action;
};

struct DiscConfig {
  double step_size = 1e-3;
  int epochs = 2;
  int minibatch = 256;
};

struct DiscUpdateResult {
  double v_before = 0.0;
  double v_after = 0.0;
  int reverted_epochs = 0;
};

// V = E_expert[log D] + E_policy[log(1 - D)].
double gail_objective(const DiscriminatorNet& disc, std::span<const StateAction> expert,
                      std::span<const StateAction> policy);
// Fraction of pairs on the correct side of D = 0.5.
double disc_accuracy(const DiscriminatorNet& disc, std::span<const StateAction> expert,
                     std::span<const StateAction> policy);

class DiscTrainer {
 public:
  DiscTrainer(DiscriminatorNet& disc, DiscConfig cfg);
  // Minibatch Adam ascent on V. An epoch that lowers V on the full batch is
  // undone and the step size halved.
  DiscUpdateResult update(std::span<const StateAction> expert, std::span<const StateAction> policy, Rng& rng);
  double step_size() const { return adam_.step_size(); }

 private:
  DiscriminatorNet& disc_;
  DiscConfig cfg_;
  Adam adam_;
};

// -log(1 - D) with D clamped to [1e-6, 1 - 1e-6].
double surrogate_reward_from_d(double d);
double surrogate_reward(const DiscriminatorNet& disc, const FeatureVector& obs, const DriveAction& a);

// ---------------------------------------------------------------------------
// Expert data and behavioral cloning

struct ExpertEpisode {
  Scene scene;
  std::vector<FeatureVector> raw_obs;
  std::vector<FeatureVector> obs;  // normalized
  std::vector<DriveAction> actions;
};

// Non-overlapping horizon-length windows of recorded cars, subsampled to at
// most `max_episodes` (all when 0).
std::vector<Scene> expert_scenes(const Dataset& data, int horizon, std::size_t max_episodes, Rng& rng);
// Replays each scene; actions are finite differences of the smoothed states.
// `obs` is filled with the environment's normalizer.
std::vector<ExpertEpisode> extract_expert(Env& env, std::span<const Scene> scenes);
void renormalize(std::span<ExpertEpisode> episodes, const FeatureNormalizer& normalizer);
std::vector<StateAction> flatten_pairs(std::span<const ExpertEpisode> episodes);

// Scaling of network outputs from expert action statistics.
ActionScaling action_scaling_from(std::span<const StateAction> pairs);

// Mean negative log-likelihood of the expert actions (sequences unrolled in
// full for recurrent policies).
double mean_nll(const GaussianPolicyNet& net, std::span<const ExpertEpisode> episodes);

struct BcConfig {
  int epochs = 30;
  double step_size = 1e-3;
  int minibatch = 256;       // pairs (MLP)
  int sequence_batch = 8;    // sequences per update (GRU)
  int bptt_length = 20;      // truncated unroll length (GRU)
};

struct BcEpoch {
  double train_nll = 0.0;
  double heldout_nll = 0.0;
  double step_size = 0.0;
  bool reverted = false;
};

std::vector<BcEpoch> bc_train(GaussianPolicyNet& net, std::span<const ExpertEpisode> train,
                              std::span<const ExpertEpisode> heldout, const BcConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// GAIL

struct GailConfig {
  int iterations = 50;
  DiscConfig disc;
  std::size_t expert_batch = 5000;  // expert pairs sampled per discriminator update
  double reward_min = 0.0;
  double reward_max = 20.0;
  int checkpoint_every = 0;
  unsigned jobs = 1;
};

struct GailHistoryRow {
  int iter = 0;
  double v = 0.0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double mean_len = 0.0;
  double nll = 0.0;
};

void save_history_csv(const std::filesystem::path& path, std::span<const GailHistoryRow> rows);

// Rolls out `policy` until at least `min_steps` steps are collected. Episodes
// are generated in fixed-size chunks with per-episode seeds, so the result does
// not depend on `jobs`.
std::vector<EpisodeRollout> collect_rollouts(const Policy& policy, std::shared_ptr<const Dataset> data,
                                             const SimConfig& sim, const FeatureNormalizer& normalizer,
                                             int min_steps, std::uint64_t seed, unsigned jobs);

using CheckpointFn = std::function<void(int iter, const GaussianPolicyNet&)>;

std::vector<GailHistoryRow> gail_train(GaussianPolicyNet& net, DiscriminatorNet& disc,
                                       std::shared_ptr<const Dataset> data, const SimConfig& sim,
                                       const FeatureNormalizer& normalizer, std::span<const ExpertEpisode> expert,
                                       const GailConfig& gail, const TrpoConfig& trpo, std::uint64_t seed,
                                       const CheckpointFn& checkpoint = {});

}  // namespace driveimit
