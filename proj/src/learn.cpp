#include "driveimit/learn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "driveimit/error.hpp"
#include "driveimit/parallel.hpp"
#include "driveimit/policies.hpp"

namespace driveimit {

// ---------------------------------------------------------------------------
// Advantages and baseline

AdvantageResult compute_advantages(std::span<const std::vector<double>> rewards,
                                   std::span<const std::vector<double>> values, double gamma,
                                   double lambda) {
  AdvantageResult out;
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (std::size_t e = 0; e < rewards.size(); ++e) {
    const auto& r = rewards[e];
    const std::size_t n = r.size();
    auto value = [&](std::size_t t) { return values.empty() || t >= n ? 0.0 : values[e][t]; };
    std::vector<double> ret(n), adv(n);
    double g = 0.0, gae = 0.0;
    for (std::size_t t = n; t-- > 0;) {
      g = r[t] + gamma * g;
      ret[t] = g;
      const double delta = r[t] + gamma * value(t + 1) - value(t);
      gae = delta + gamma * lambda * gae;
      adv[t] = gae;
      sum += gae;
      sum2 += gae * gae;
    }
    count += n;
    out.returns.push_back(std::move(ret));
    out.advantages.push_back(std::move(adv));
  }
  const double mean = count ? sum / static_cast<double>(count) : 0.0;
  const double var = count ? std::max(0.0, sum2 / static_cast<double>(count) - mean * mean) : 0.0;
  const double sd = std::sqrt(var);
  for (const auto& adv : out.advantages) {
    std::vector<double> z(adv.size());
    for (std::size_t t = 0; t < adv.size(); ++t) z[t] = sd > 1e-12 ? (adv[t] - mean) / sd : adv[t] - mean;
    out.normalized.push_back(std::move(z));
  }
  return out;
}

Eigen::VectorXd LinearBaseline::features(const double* o, std::size_t obs_dim, std::size_t step) {
  const auto d = static_cast<Eigen::Index>(obs_dim);
  Eigen::VectorXd f(2 * d + 4);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double v = std::clamp(o[i], -10.0, 10.0);
    f(i) = v;
    f(d + i) = v * v;
  }
  const double tau = static_cast<double>(step) / 100.0;
  f(2 * d) = tau;
  f(2 * d + 1) = tau * tau;
  f(2 * d + 2) = tau * tau * tau;
  f(2 * d + 3) = 1.0;
  return f;
}

std::vector<double> LinearBaseline::predict(std::span<const double> obs, std::size_t obs_dim) const {
  const std::size_t n = obs_dim ? obs.size() / obs_dim : 0;
  std::vector<double> out(n, 0.0);
  if (!fitted()) return out;
  for (std::size_t t = 0; t < n; ++t) out[t] = features(obs.data() + t * obs_dim, obs_dim, t).dot(w_);
  return out;
}

void LinearBaseline::fit(std::span<const std::vector<double>> obs, std::size_t obs_dim,
                         std::span<const std::vector<double>> returns) {
  const auto p = static_cast<Eigen::Index>(2 * obs_dim + 4);
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
  for (std::size_t e = 0; e < obs.size(); ++e) {
    for (std::size_t t = 0; t < returns[e].size(); ++t) {
      const Eigen::VectorXd f = features(obs[e].data() + t * obs_dim, obs_dim, t);
      xtx.selfadjointView<Eigen::Lower>().rankUpdate(f);
      xty += returns[e][t] * f;
    }
  }
  xtx = xtx.selfadjointView<Eigen::Lower>();
  double reg = ridge_;
  for (int attempt = 0; attempt < 5; ++attempt, reg *= 10.0) {
    Eigen::VectorXd w = (xtx + reg * Eigen::MatrixXd::Identity(p, p)).ldlt().solve(xty);
    if (w.allFinite()) {
      w_ = std::move(w);
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Differentiable policies

namespace {

class NetTrace final : public SequenceTrace {
 public:
  explicit NetTrace(PolicyTrace t) : trace(std::move(t)) {}
  const std::vector<GaussianActionDist>& dists() const override { return trace.dists(); }
  PolicyTrace trace;
};

class BanditTrace final : public SequenceTrace {
 public:
  const std::vector<GaussianActionDist>& dists() const override { return d; }
  std::vector<GaussianActionDist> d;
};

}  // namespace

std::unique_ptr<SequenceTrace> NetTrpoPolicy::forward(std::span<const double> obs, std::size_t steps) const {
  return std::make_unique<NetTrace>(net_.forward_sequence(obs.first(steps * net_.input_dim())));
}

void NetTrpoPolicy::vjp(const SequenceTrace& trace, std::span<const DistGrad> d_out, std::span<double> grad) const {
  net_.vjp(static_cast<const NetTrace&>(trace).trace, d_out, grad);
}

std::vector<DistGrad> NetTrpoPolicy::jvp(const SequenceTrace& trace, std::span<const double> tangent) const {
  return net_.jvp(static_cast<const NetTrace&>(trace).trace, tangent);
}

GaussianActionDist BanditPolicy::dist() const {
  GaussianActionDist d;
  d.mu = {theta_[0], 0.0};
  d.log_nu = {std::clamp(theta_[1], kLogNuMin, kLogNuMax), 0.0};
  return d;
}

std::unique_ptr<SequenceTrace> BanditPolicy::forward(std::span<const double>, std::size_t steps) const {
  auto t = std::make_unique<BanditTrace>();
  t->d.assign(steps, dist());
  return t;
}

void BanditPolicy::vjp(const SequenceTrace& trace, std::span<const DistGrad> d_out, std::span<double> grad) const {
  const bool clamped = theta_[1] < kLogNuMin || theta_[1] > kLogNuMax;
  for (std::size_t k = 0; k < trace.dists().size(); ++k) {
    grad[0] += d_out[k][0];
    if (!clamped) grad[1] += d_out[k][2];
  }
}

std::vector<DistGrad> BanditPolicy::jvp(const SequenceTrace& trace, std::span<const double> v) const {
  const bool clamped = theta_[1] < kLogNuMin || theta_[1] > kLogNuMax;
  return std::vector<DistGrad>(trace.dists().size(), DistGrad{v[0], 0.0, clamped ? 0.0 : v[1], 0.0});
}

// ---------------------------------------------------------------------------
// TRPO

Eigen::VectorXd conjugate_gradient(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_a,
                                   const Eigen::VectorXd& b, int iters, double residual_tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = b;
  double rr = r.squaredNorm();
  for (int i = 0; i < iters && rr > residual_tol; ++i) {
    const Eigen::VectorXd ap = apply_a(p);
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return x;
}

double gaussian_kl(const GaussianActionDist& p, const GaussianActionDist& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    const double nu_p = std::exp(p.log_nu[i]);
    const double nu_q = std::exp(q.log_nu[i]);
    const double dm = p.mu[i] - q.mu[i];
    kl += 0.5 * ((nu_p + dm * dm) / nu_q - 1.0 + q.log_nu[i] - p.log_nu[i]);
  }
  return kl;
}

namespace {

struct BatchEval {
  double surrogate = 0.0;
  double mean_kl = 0.0;
};

BatchEval evaluate_batch(const DifferentiablePolicy& policy, std::span<const TrpoEpisode> batch,
                         const std::vector<std::vector<GaussianActionDist>>& old_dists,
                         const std::vector<std::vector<double>>& old_logp, std::size_t total) {
  BatchEval ev;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto trace = policy.forward(batch[e].obs, batch[e].steps());
    const auto& d = trace->dists();
    for (std::size_t t = 0; t < batch[e].steps(); ++t) {
      const double ratio = std::exp(gaussian_log_prob(d[t], batch[e].actions[t]) - old_logp[e][t]);
      ev.surrogate += ratio * batch[e].advantages[t];
      ev.mean_kl += gaussian_kl(old_dists[e][t], d[t]);
    }
  }
  ev.surrogate /= static_cast<double>(total);
  ev.mean_kl /= static_cast<double>(total);
  return ev;
}

}  // namespace

TrpoDiagnostics trpo_update(DifferentiablePolicy& policy, std::span<const TrpoEpisode> batch,
                            const TrpoConfig& cfg, Rng* fisher_rng) {
  TrpoDiagnostics diag;
  std::size_t total = 0;
  for (const auto& ep : batch) {
    if (ep.advantages.size() != ep.steps() || ep.obs.size() != ep.steps() * policy.obs_dim()) {
      throw Error(ErrorCode::kShapeMismatch, "episode arrays differ in length");
    }
    total += ep.steps();
  }
  if (total == 0) return diag;

  const std::span<double> theta = policy.parameters();
  const auto n = static_cast<Eigen::Index>(theta.size());
  const Eigen::VectorXd theta0 = Eigen::Map<const Eigen::VectorXd>(theta.data(), n);

  std::vector<std::unique_ptr<SequenceTrace>> traces;
  std::vector<std::vector<GaussianActionDist>> old_dists;
  std::vector<std::vector<double>> old_logp;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  const double inv_total = 1.0 / static_cast<double>(total);
  for (const auto& ep : batch) {
    traces.push_back(policy.forward(ep.obs, ep.steps()));
    const auto& d = traces.back()->dists();
    old_dists.push_back(d);
    std::vector<double> lp(ep.steps());
    std::vector<DistGrad> dout(ep.steps());
    for (std::size_t t = 0; t < ep.steps(); ++t) {
      lp[t] = gaussian_log_prob(d[t], ep.actions[t]);
      const double a[2] = {ep.actions[t].accel, ep.actions[t].turn_rate};
      const double w = ep.advantages[t] * inv_total;
      for (std::size_t i = 0; i < kActionDim; ++i) {
        const double nu = std::exp(d[t].log_nu[i]);
        const double diff = a[i] - d[t].mu[i];
        dout[t][i] = w * diff / nu;
        dout[t][kActionDim + i] = w * 0.5 * (diff * diff / nu - 1.0);
      }
    }
    old_logp.push_back(std::move(lp));
    policy.vjp(*traces.back(), dout, std::span<double>(g.data(), theta.size()));
  }
  if (!g.allFinite()) throw Error(ErrorCode::kNonFiniteGradient, "policy gradient is not finite");
  diag.grad_norm = g.norm();
  diag.surrogate_before = 0.0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    for (double a : batch[e].advantages) diag.surrogate_before += a;
  }
  diag.surrogate_before *= inv_total;
  if (diag.grad_norm == 0.0) return diag;

  // Episodes entering the Fisher products.
  std::vector<std::size_t> fisher_eps(batch.size());
  std::iota(fisher_eps.begin(), fisher_eps.end(), 0);
  if (cfg.fisher_subsample < 1.0 && fisher_rng != nullptr && batch.size() > 1) {
    std::shuffle(fisher_eps.begin(), fisher_eps.end(), *fisher_rng);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cfg.fisher_subsample * static_cast<double>(batch.size()))));
    fisher_eps.resize(keep);
    std::sort(fisher_eps.begin(), fisher_eps.end());
  }
  std::size_t fisher_steps = 0;
  for (std::size_t e : fisher_eps) fisher_steps += batch[e].steps();
  const double inv_fisher = 1.0 / static_cast<double>(fisher_steps);

  auto fvp = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    const std::span<const double> vs(v.data(), static_cast<std::size_t>(n));
    for (std::size_t e : fisher_eps) {
      std::vector<DistGrad> jv = policy.jvp(*traces[e], vs);
      const auto& d = old_dists[e];
      for (std::size_t t = 0; t < jv.size(); ++t) {
        for (std::size_t i = 0; i < kActionDim; ++i) {
          jv[t][i] *= std::exp(-d[t].log_nu[i]) * inv_fisher;
          jv[t][kActionDim + i] *= 0.5 * inv_fisher;
        }
      }
      policy.vjp(*traces[e], jv, std::span<double>(out.data(), static_cast<std::size_t>(n)));
    }
    return Eigen::VectorXd(out + cfg.cg_damping * v);
  };

  const Eigen::VectorXd x = conjugate_gradient(fvp, g, cfg.cg_iters);
  const double xfx = x.dot(fvp(x));
  if (!(xfx > 0.0) || !x.allFinite()) return diag;
  const Eigen::VectorXd full_step = std::sqrt(2.0 * cfg.kl_step / xfx) * x;

  double frac = 1.0;
  for (int k = 0; k < cfg.backtrack_steps; ++k, frac *= cfg.backtrack_ratio) {
    const Eigen::VectorXd trial = theta0 + frac * full_step;
    std::copy(trial.data(), trial.data() + n, theta.begin());
    const BatchEval ev = evaluate_batch(policy, batch, old_dists, old_logp, total);
    const double improvement = ev.surrogate - diag.surrogate_before;
    if (std::isfinite(ev.surrogate) && std::isfinite(ev.mean_kl) && improvement > 0.0 &&
        ev.mean_kl <= cfg.kl_step) {
      diag.accepted = true;
      diag.surrogate_improvement = improvement;
      diag.mean_kl = ev.mean_kl;
      diag.step_fraction = frac;
      diag.backtracks = k;
      return diag;
    }
  }
  std::copy(theta0.data(), theta0.data() + n, theta.begin());
  diag.backtracks = cfg.backtrack_steps;
  return diag;
}

// ---------------------------------------------------------------------------
// Discriminator

double surrogate_reward_from_d(double d) {
  d = std::clamp(d, DiscriminatorNet::kClamp, 1.0 - DiscriminatorNet::kClamp);
  return -std::log(1.0 - d);
}

double surrogate_reward(const DiscriminatorNet& disc, const FeatureVector& obs, const DriveAction& a) {
  return surrogate_reward_from_d(disc.forward(obs, a));
}

double gail_objective(const DiscriminatorNet& disc, std::span<const StateAction> expert,
                      std::span<const StateAction> policy) {
  double e = 0.0, p = 0.0;
  for (const auto& s : expert) e += std::log(disc.forward(s.obs, s.action));
  for (const auto& s : policy) p += std::log(1.0 - disc.forward(s.obs, s.action));
  return (expert.empty() ? 0.0 : e / static_cast<double>(expert.size())) +
         (policy.empty() ? 0.0 : p / static_cast<double>(policy.size()));
}

double disc_accuracy(const DiscriminatorNet& disc, std::span<const StateAction> expert,
                     std::span<const StateAction> policy) {
  std::size_t right = 0;
  for (const auto& s : expert) right += disc.forward(s.obs, s.action) > 0.5 ? 1 : 0;
  for (const auto& s : policy) right += disc.forward(s.obs, s.action) < 0.5 ? 1 : 0;
  return static_cast<double>(right) / static_cast<double>(expert.size() + policy.size());
}

DiscTrainer::DiscTrainer(DiscriminatorNet& disc, DiscConfig cfg)
    : disc_(disc), cfg_(cfg), adam_(disc.params().size(), cfg.step_size) {}

DiscUpdateResult DiscTrainer::update(std::span<const StateAction> expert, std::span<const StateAction> policy,
                                     Rng& rng) {
  if (expert.empty() || policy.empty()) throw Error(ErrorCode::kTooFewSamples, "discriminator needs both batches");
  DiscUpdateResult res;
  ParamVector& pv = disc_.params();
  double v = gail_objective(disc_, expert, policy);
  res.v_before = v;
  const auto mb = static_cast<std::size_t>(std::max(1, cfg_.minibatch));
  std::vector<std::size_t> pe(expert.size()), pp(policy.size());
  DenseStack::Cache cache;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const std::vector<double> saved(pv.values().begin(), pv.values().end());
    const Adam saved_adam = adam_;
    std::iota(pe.begin(), pe.end(), 0);
    std::iota(pp.begin(), pp.end(), 0);
    std::shuffle(pe.begin(), pe.end(), rng);
    std::shuffle(pp.begin(), pp.end(), rng);
    std::size_t ei = 0;
    for (std::size_t start = 0; start < pp.size(); start += mb) {
      const std::size_t end = std::min(pp.size(), start + mb);
      const std::size_t ne = std::min(expert.size(), end - start);
      pv.zero_grad();
      for (std::size_t j = 0; j < ne; ++j, ++ei) {
        const StateAction& s = expert[pe[ei % pe.size()]];
        const double l = disc_.logit(s.obs, s.action, cache);
        disc_.backward_logit(cache, -(1.0 - sigmoid(l)) / static_cast<double>(ne), pv.grads());
      }
      for (std::size_t j = start; j < end; ++j) {
        const StateAction& s = policy[pp[j]];
        const double l = disc_.logit(s.obs, s.action, cache);
        disc_.backward_logit(cache, sigmoid(l) / static_cast<double>(end - start), pv.grads());
      }
      adam_.step(pv.values(), pv.grads());
    }
    const double v_new = gail_objective(disc_, expert, policy);
    if (!(v_new >= v) || !pv.all_finite()) {
      std::copy(saved.begin(), saved.end(), pv.values().begin());
      adam_ = saved_adam;
      adam_.set_step_size(0.5 * adam_.step_size());
      ++res.reverted_epochs;
    } else {
      v = v_new;
    }
  }
  res.v_after = v;
  return res;
}

// ---------------------------------------------------------------------------
// Expert data

std::vector<Scene> expert_scenes(const Dataset& data, int horizon, std::size_t max_episodes, Rng& rng) {
  std::vector<Scene> out;
  for (const auto& t : data.trajectories()) {
    if (t.vehicle.vclass != VehicleClass::kCar || t.degenerate) continue;
    for (int f = t.first_frame; f + horizon <= t.last_frame(); f += horizon) out.push_back({f, t.vehicle.id});
  }
  if (max_episodes > 0 && out.size() > max_episodes) {
    std::shuffle(out.begin(), out.end(), rng);
    out.resize(max_episodes);
  }
  std::sort(out.begin(), out.end(), [](const Scene& a, const Scene& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ego_id < b.ego_id;
  });
  return out;
}

std::vector<ExpertEpisode> extract_expert(Env& env, std::span<const Scene> scenes) {
  std::vector<ExpertEpisode> out;
  const double dt = env.config().dt;
  for (const Scene& sc : scenes) {
    ExpertEpisode ep;
    ep.scene = sc;
    env.reset(sc);
    while (!env.terminated()) {
      const Trajectory& t = env.ego_recording();
      const int f = sc.frame + env.step_count();
      const VehicleState& a = t.at_frame(f);
      const VehicleState& b = t.at_frame(f + 1);
      ep.raw_obs.push_back(env.raw_features());
      ep.obs.push_back(env.observation());
      ep.actions.push_back({(b.speed - a.speed) / dt, wrap_angle(b.heading - a.heading) / dt});
      env.step_replay();
    }
    if (!ep.actions.empty()) out.push_back(std::move(ep));
  }
  return out;
}

void renormalize(std::span<ExpertEpisode> episodes, const FeatureNormalizer& normalizer) {
  for (auto& ep : episodes) {
    for (std::size_t t = 0; t < ep.raw_obs.size(); ++t) ep.obs[t] = normalizer.apply(ep.raw_obs[t]);
  }
}

std::vector<StateAction> flatten_pairs(std::span<const ExpertEpisode> episodes) {
  std::vector<StateAction> out;
  for (const auto& ep : episodes) {
    for (std::size_t t = 0; t < ep.actions.size(); ++t) out.push_back({ep.obs[t], ep.actions[t]});
  }
  return out;
}

ActionScaling action_scaling_from(std::span<const StateAction> pairs) {
  ActionScaling s;
  if (pairs.empty()) return s;
  const double n = static_cast<double>(pairs.size());
  std::array<double, 2> sum{}, sum2{};
  for (const auto& p : pairs) {
    const double a[2] = {p.action.accel, p.action.turn_rate};
    for (int i = 0; i < 2; ++i) {
      sum[i] += a[i];
      sum2[i] += a[i] * a[i];
    }
  }
  for (int i = 0; i < 2; ++i) {
    s.mean[i] = sum[i] / n;
    s.scale[i] = std::max(1e-3, std::sqrt(std::max(0.0, sum2[i] / n - s.mean[i] * s.mean[i])));
  }
  return s;
}

namespace {

std::vector<double> flatten_obs(std::span<const FeatureVector> obs) {
  std::vector<double> out;
  out.reserve(obs.size() * kFeatureCount);
  for (const auto& o : obs) out.insert(out.end(), o.begin(), o.end());
  return out;
}

// d(-log p)/d(mu, log nu), scaled by w.
DistGrad nll_grad(const GaussianActionDist& d, const DriveAction& a, double w) {
  const double x[2] = {a.accel, a.turn_rate};
  DistGrad g{};
  for (std::size_t i = 0; i < kActionDim; ++i) {
    const double nu = std::exp(d.log_nu[i]);
    const double diff = x[i] - d.mu[i];
    g[i] = -w * diff / nu;
    g[kActionDim + i] = -w * 0.5 * (diff * diff / nu - 1.0);
  }
  return g;
}

}  // namespace

double mean_nll(const GaussianPolicyNet& net, std::span<const ExpertEpisode> episodes) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& ep : episodes) {
    const PolicyTrace tr = net.forward_sequence(std::span<const FeatureVector>(ep.obs));
    for (std::size_t t = 0; t < ep.actions.size(); ++t) total -= gaussian_log_prob(tr.dists()[t], ep.actions[t]);
    count += ep.actions.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

std::vector<BcEpoch> bc_train(GaussianPolicyNet& net, std::span<const ExpertEpisode> train,
                              std::span<const ExpertEpisode> heldout, const BcConfig& cfg, Rng& rng) {
  std::vector<BcEpoch> history;
  if (cfg.epochs <= 0 || train.empty()) return history;
  ParamVector& pv = net.params();
  Adam adam(pv.size(), cfg.step_size);
  double nll = mean_nll(net, train);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t e = 0; e < train.size(); ++e) {
    for (std::size_t t = 0; t < train[e].actions.size(); ++t) pairs.push_back({e, t});
  }
  std::vector<std::size_t> order(train.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<double> saved(pv.values().begin(), pv.values().end());
    const Adam saved_adam = adam;
    if (net.arch() == PolicyArch::kMlp) {
      std::shuffle(pairs.begin(), pairs.end(), rng);
      const auto mb = static_cast<std::size_t>(std::max(1, cfg.minibatch));
      std::vector<double> flat;
      for (std::size_t start = 0; start < pairs.size(); start += mb) {
        const std::size_t end = std::min(pairs.size(), start + mb);
        flat.clear();
        for (std::size_t j = start; j < end; ++j) {
          const auto& o = train[pairs[j].first].obs[pairs[j].second];
          flat.insert(flat.end(), o.begin(), o.end());
        }
        PolicyTrace tr = net.forward_sequence(flat);
        std::vector<DistGrad> dout(end - start);
        const double w = 1.0 / static_cast<double>(end - start);
        for (std::size_t j = start; j < end; ++j) {
          dout[j - start] = nll_grad(tr.dists()[j - start], train[pairs[j].first].actions[pairs[j].second], w);
        }
        pv.zero_grad();
        net.backward(tr, dout);
        adam.step(pv.values(), pv.grads());
      }
    } else {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      const auto group = static_cast<std::size_t>(std::max(1, cfg.sequence_batch));
      const auto chunk = static_cast<std::size_t>(std::max(1, cfg.bptt_length));
      for (std::size_t start = 0; start < order.size(); start += group) {
        const std::size_t end = std::min(order.size(), start + group);
        std::size_t steps = 0;
        for (std::size_t j = start; j < end; ++j) steps += train[order[j]].actions.size();
        const double w = 1.0 / static_cast<double>(steps);
        pv.zero_grad();
        for (std::size_t j = start; j < end; ++j) {
          const ExpertEpisode& ep = train[order[j]];
          const std::vector<double> flat = flatten_obs(ep.obs);
          std::vector<double> hidden(net.hidden_state_dim(), 0.0);
          for (std::size_t c0 = 0; c0 < ep.actions.size(); c0 += chunk) {
            const std::size_t c1 = std::min(ep.actions.size(), c0 + chunk);
            PolicyTrace tr = net.forward_sequence(
                std::span<const double>(flat).subspan(c0 * kFeatureCount, (c1 - c0) * kFeatureCount), hidden);
            std::vector<DistGrad> dout(c1 - c0);
            for (std::size_t t = c0; t < c1; ++t) dout[t - c0] = nll_grad(tr.dists()[t - c0], ep.actions[t], w);
            net.backward(tr, dout);
          }
        }
        adam.step(pv.values(), pv.grads());
      }
    }
    BcEpoch rec;
    const double after = pv.all_finite() ? mean_nll(net, train) : std::numeric_limits<double>::infinity();
    if (!(after <= nll)) {
      std::copy(saved.begin(), saved.end(), pv.values().begin());
      adam = saved_adam;
      adam.set_step_size(0.5 * adam.step_size());
      rec.reverted = true;
    } else {
      nll = after;
    }
    rec.train_nll = nll;
    rec.heldout_nll = heldout.empty() ? 0.0 : mean_nll(net, heldout);
    rec.step_size = adam.step_size();
    history.push_back(rec);
  }
  return history;
}

// ---------------------------------------------------------------------------
// GAIL

void save_history_csv(const std::filesystem::path& path, std::span<const GailHistoryRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(10);
  out << "iter,V,mean_reward,mean_kl,mean_len,nll\n";
  for (const auto& r : rows) {
    out << r.iter << ',' << r.v << ',' << r.mean_reward << ',' << r.mean_kl << ',' << r.mean_len << ','
        << r.nll << '\n';
  }
}

std::vector<EpisodeRollout> collect_rollouts(const Policy& policy, std::shared_ptr<const Dataset> data,
                                             const SimConfig& sim, const FeatureNormalizer& normalizer,
                                             int min_steps, std::uint64_t seed, unsigned jobs) {
  constexpr std::size_t kChunk = 8;
  const Env proto(std::move(data), sim, normalizer);
  std::vector<Env> envs(kChunk, proto);
  std::vector<EpisodeRollout> out;
  long steps = 0;
  while (steps < min_steps) {
    const std::size_t base = out.size();
    out.resize(base + kChunk);
    parallel_for(kChunk, jobs, [&](std::size_t i) {
      auto pol = policy.clone();
      Rng rng = make_rng(seed, {base + i});
      out[base + i] = rollout(*pol, envs[i], rng);
    });
    for (std::size_t i = base; i < out.size(); ++i) steps += static_cast<long>(out[i].length());
  }
  return out;
}

std::vector<GailHistoryRow> gail_train(GaussianPolicyNet& net, DiscriminatorNet& disc,
                                       std::shared_ptr<const Dataset> data, const SimConfig& sim,
                                       const FeatureNormalizer& normalizer, std::span<const ExpertEpisode> expert,
                                       const GailConfig& gail, const TrpoConfig& trpo, std::uint64_t seed,
                                       const CheckpointFn& checkpoint) {
  std::vector<GailHistoryRow> history;
  NetTrpoPolicy trpo_policy(net);
  LinearBaseline baseline;
  DiscTrainer trainer(disc, gail.disc);
  const std::vector<StateAction> expert_pairs = flatten_pairs(expert);
  if (expert_pairs.empty()) throw Error(ErrorCode::kTooFewSamples, "no expert pairs");
  Rng disc_rng = make_rng(seed, {2});
  Rng fisher_rng = make_rng(seed, {3});

  // Fixed expert subset for the NLL diagnostic.
  std::vector<ExpertEpisode> nll_eps(expert.begin(), expert.begin() + std::min<std::size_t>(expert.size(), 20));

  std::vector<std::size_t> expert_order(expert_pairs.size());
  for (int it = 0; it < gail.iterations; ++it) {
    auto snapshot = std::make_shared<const GaussianPolicyNet>(net);
    const NeuralPolicy pol(snapshot, "gail");
    const std::vector<EpisodeRollout> ros =
        collect_rollouts(pol, data, sim, normalizer, trpo.batch_steps, derive_seed(seed, {1, static_cast<std::uint64_t>(it)}),
                         gail.jobs);

    std::vector<std::vector<double>> rewards, obs, values;
    std::vector<StateAction> policy_pairs;
    double reward_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& ro : ros) {
      std::vector<double> r(ro.length());
      std::vector<double> o;
      o.reserve(ro.length() * kFeatureCount);
      for (std::size_t t = 0; t < ro.length(); ++t) {
        const StepRecord& rec = ro.steps[t];
        r[t] = std::clamp(surrogate_reward(disc, rec.obs, rec.applied), gail.reward_min, gail.reward_max);
        reward_sum += r[t];
        o.insert(o.end(), rec.obs.begin(), rec.obs.end());
        policy_pairs.push_back({rec.obs, rec.applied});
      }
      steps += ro.length();
      values.push_back(baseline.predict(o, kFeatureCount));
      rewards.push_back(std::move(r));
      obs.push_back(std::move(o));
    }
    const AdvantageResult adv = compute_advantages(rewards, values, trpo.gamma, trpo.lambda);
    baseline.fit(obs, kFeatureCount, adv.returns);

    std::vector<TrpoEpisode> batch(ros.size());
    for (std::size_t e = 0; e < ros.size(); ++e) {
      batch[e].obs = std::move(obs[e]);
      batch[e].advantages = adv.normalized[e];
      for (const auto& rec : ros[e].steps) batch[e].actions.push_back(rec.action);
    }
    const TrpoDiagnostics diag = trpo_update(trpo_policy, batch, trpo, &fisher_rng);

    std::iota(expert_order.begin(), expert_order.end(), 0);
    std::shuffle(expert_order.begin(), expert_order.end(), disc_rng);
    std::vector<StateAction> expert_batch;
    for (std::size_t i = 0; i < std::min(gail.expert_batch, expert_order.size()); ++i) {
      expert_batch.push_back(expert_pairs[expert_order[i]]);
    }
    const DiscUpdateResult dres = trainer.update(expert_batch, policy_pairs, disc_rng);

    GailHistoryRow row;
    row.iter = it;
    row.v = dres.v_after;
    row.mean_reward = reward_sum / static_cast<double>(std::max<std::size_t>(1, steps));
    row.mean_kl = diag.mean_kl;
    row.mean_len = static_cast<double>(steps) / static_cast<double>(ros.size());
    row.nll = mean_nll(net, nll_eps);
    history.push_back(row);
    if (checkpoint && gail.checkpoint_every > 0 && (it + 1) % gail.checkpoint_every == 0) checkpoint(it, net);
  }
  return history;
}

}  // namespace driveimit
