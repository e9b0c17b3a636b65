#include "driveimit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "driveimit/error.hpp"

namespace driveimit {

StaticGaussian fit_static_gaussian(std::span<const DriveAction> actions) {
  if (actions.size() < 2) throw Error(ErrorCode::kTooFewSamples, "static Gaussian needs at least 2 actions");
  StaticGaussian g;
  g.mu.setZero();
  for (const auto& a : actions) g.mu += Eigen::Vector2d(a.accel, a.turn_rate);
  const double n = static_cast<double>(actions.size());
  g.mu /= n;
  g.sigma.setZero();
  for (const auto& a : actions) {
    const Eigen::Vector2d d = Eigen::Vector2d(a.accel, a.turn_rate) - g.mu;
    g.sigma += d * d.transpose();
  }
  g.sigma /= n;
  g.sigma += 1e-9 * Eigen::Matrix2d::Identity();
  return g;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct Factored {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_norm = 0.0;  // -0.5 (d log 2pi + log|S|)
};

Factored factor(const Eigen::MatrixXd& cov) {
  Factored f;
  f.llt.compute(cov);
  if (f.llt.info() != Eigen::Success) throw Error(ErrorCode::kSingularBlock, "covariance is not positive definite");
  const Eigen::MatrixXd& l = f.llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
  f.log_norm = -0.5 * (static_cast<double>(cov.rows()) * kLog2Pi + logdet);
  return f;
}

double log_density(const Factored& f, const Eigen::VectorXd& mean, const Eigen::VectorXd& x) {
  const Eigen::VectorXd z = f.llt.matrixL().solve(x - mean);
  return f.log_norm - 0.5 * z.squaredNorm();
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& data) {
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd c = data.rowwise() - mean;
  return (c.transpose() * c) / static_cast<double>(data.rows());
}

// Per-sample component log terms log w_k + log N(x | k).
Eigen::MatrixXd component_log_terms(const MixtureRegression& m, const Eigen::MatrixXd& data) {
  const Eigen::Index n = data.rows();
  const auto k = static_cast<Eigen::Index>(m.components.size());
  Eigen::MatrixXd lt(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& c = m.components[static_cast<std::size_t>(j)];
    const Factored f = factor(c.cov);
    const Eigen::MatrixXd centered = (data.rowwise() - c.mean.transpose()).transpose();
    const Eigen::MatrixXd z = f.llt.matrixL().solve(centered);
    const double lw = std::log(c.weight);
    for (Eigen::Index i = 0; i < n; ++i) lt(i, j) = lw + f.log_norm - 0.5 * z.col(i).squaredNorm();
  }
  return lt;
}

std::vector<Eigen::VectorXd> kmeanspp(const Eigen::MatrixXd& data, int k, Rng& rng) {
  const Eigen::Index n = data.rows();
  std::vector<Eigen::VectorXd> centers;
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.push_back(data.row(first(rng)).transpose());
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (data.row(i).transpose() - centers.back()).squaredNorm());
    }
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index pick = first(rng);
    if (total > 0.0) {
      std::discrete_distribution<Eigen::Index> dist(d2.begin(), d2.end());
      pick = dist(rng);
    }
    centers.push_back(data.row(pick).transpose());
  }
  return centers;
}

}  // namespace

double gmm_log_likelihood(const MixtureRegression& m, const Eigen::MatrixXd& data) {
  const Eigen::MatrixXd lt = component_log_terms(m, data);
  double ll = 0.0;
  std::vector<double> row(static_cast<std::size_t>(lt.cols()));
  for (Eigen::Index i = 0; i < lt.rows(); ++i) {
    for (Eigen::Index j = 0; j < lt.cols(); ++j) row[static_cast<std::size_t>(j)] = lt(i, j);
    ll += log_sum_exp(row);
  }
  return ll;
}

std::size_t gmm_parameter_count(int k, std::size_t dim) {
  const auto kk = static_cast<std::size_t>(k);
  return kk * dim + kk * dim * (dim + 1) / 2 + (kk - 1);
}

EmResult em_fit(const Eigen::MatrixXd& data, int k, std::uint64_t seed, const EmConfig& cfg) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (k < 1 || n <= static_cast<Eigen::Index>(k) * d) {
    throw Error(ErrorCode::kTooFewSamples, "EM needs more than K * dim samples");
  }
  Rng rng(seed);
  const Eigen::MatrixXd ridge = cfg.ridge * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd global = sample_cov(data) + ridge;

  EmResult out;
  MixtureRegression& m = out.model;
  // Components start from the points nearest each seed centre.
  const std::vector<Eigen::VectorXd> centers = kmeanspp(data, k, rng);
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < centers.size(); ++j) {
      if ((data.row(i).transpose() - centers[j]).squaredNorm() <
          (data.row(i).transpose() - centers[best]).squaredNorm()) {
        best = j;
      }
    }
    members[best].push_back(i);
  }
  for (std::size_t j = 0; j < centers.size(); ++j) {
    if (members[j].size() <= static_cast<std::size_t>(d)) {
      m.components.push_back({1.0 / k, centers[j], global});
      continue;
    }
    const Eigen::MatrixXd sub = data(members[j], Eigen::all);
    m.components.push_back({static_cast<double>(members[j].size()) / static_cast<double>(n),
                            sub.colwise().mean().transpose(), sample_cov(sub) + ridge});
  }

  std::vector<bool> reseeded(static_cast<std::size_t>(k), false);
  Eigen::MatrixXd resp(n, k);
  std::vector<double> row(static_cast<std::size_t>(k));
  std::vector<double> sample_ll(static_cast<std::size_t>(n));
  for (int it = 0; it < cfg.max_iters; ++it) {
    // E-step.
    const Eigen::MatrixXd lt = component_log_terms(m, data);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = lt(i, j);
      const double lse = log_sum_exp(row);
      sample_ll[static_cast<std::size_t>(i)] = lse;
      ll += lse;
      for (Eigen::Index j = 0; j < k; ++j) resp(i, j) = std::exp(lt(i, j) - lse);
    }
    out.log_likelihood.push_back(ll);
    if (it > 0) {
      const double prev = out.log_likelihood[out.log_likelihood.size() - 2];
      if (std::abs(ll - prev) < cfg.tol * static_cast<double>(n)) break;
    }
    // M-step.
    for (Eigen::Index j = 0; j < k; ++j) {
      auto& c = m.components[static_cast<std::size_t>(j)];
      const double nk = resp.col(j).sum();
      if (nk / static_cast<double>(n) < 1e-8) {
        if (reseeded[static_cast<std::size_t>(j)]) {
          throw Error(ErrorCode::kDegenerateComponent, "mixture component collapsed twice");
        }
        reseeded[static_cast<std::size_t>(j)] = true;
        const auto worst = static_cast<Eigen::Index>(
            std::min_element(sample_ll.begin(), sample_ll.end()) - sample_ll.begin());
        c.mean = data.row(worst).transpose();
        c.cov = global;
        c.weight = 1.0 / k;
        continue;
      }
      c.weight = nk / static_cast<double>(n);
      c.mean = (data.transpose() * resp.col(j)) / nk;
      const Eigen::MatrixXd centered = data.rowwise() - c.mean.transpose();
      c.cov = (centered.transpose() * resp.col(j).asDiagonal() * centered) / nk + ridge;
    }
    double wsum = 0.0;
    for (const auto& c : m.components) wsum += c.weight;
    for (auto& c : m.components) c.weight /= wsum;
  }
  return out;
}

ConditionalMixture mr_conditional(const MixtureRegression& mr, std::span<const double> features) {
  ConditionalMixture out;
  const std::size_t nf = mr.features.size();
  Eigen::VectorXd f(static_cast<Eigen::Index>(nf));
  for (std::size_t i = 0; i < nf; ++i) {
    if (mr.features[i] >= features.size()) throw Error(ErrorCode::kLengthMismatch, "feature vector too short");
    f(static_cast<Eigen::Index>(i)) = features[mr.features[i]];
  }
  std::vector<double> logw;
  for (const auto& c : mr.components) {
    const Eigen::Vector2d mu_a = c.mean.head<2>();
    const Eigen::Matrix2d s_aa = c.cov.topLeftCorner<2, 2>();
    if (nf == 0) {
      logw.push_back(std::log(c.weight));
      out.means.push_back(mu_a);
      out.covs.push_back(s_aa);
      continue;
    }
    const auto d = static_cast<Eigen::Index>(nf);
    const Eigen::VectorXd mu_f = c.mean.tail(d);
    const Eigen::MatrixXd s_af = c.cov.topRightCorner(2, d);
    const Eigen::MatrixXd s_ff = c.cov.bottomRightCorner(d, d);
    const Factored fac = factor(s_ff);
    const Eigen::VectorXd sol = fac.llt.solve(f - mu_f);
    out.means.push_back(mu_a + s_af * sol);
    Eigen::Matrix2d cov = s_aa - s_af * fac.llt.solve(s_af.transpose());
    cov = 0.5 * (cov + cov.transpose());
    out.covs.push_back(cov);
    logw.push_back(std::log(c.weight) + log_density(fac, mu_f, f));
  }
  const double lse = log_sum_exp(logw);
  for (double lw : logw) out.weights.push_back(std::exp(lw - lse));
  return out;
}

Eigen::MatrixXd joint_matrix(std::span<const FeatureVector> features, std::span<const DriveAction> actions,
                             std::span<const std::size_t> idx) {
  if (features.size() != actions.size()) throw Error(ErrorCode::kLengthMismatch, "features and actions differ in length");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(actions.size()), static_cast<Eigen::Index>(2 + idx.size()));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = actions[i].accel;
    m(r, 1) = actions[i].turn_rate;
    for (std::size_t j = 0; j < idx.size(); ++j) m(r, static_cast<Eigen::Index>(2 + j)) = features[i][idx[j]];
  }
  return m;
}

namespace {

double bic_of(const Eigen::MatrixXd& data, const BicConfig& cfg, std::uint64_t seed) {
  const EmResult fit = em_fit(data, cfg.k, seed, cfg.em);
  const double ll = gmm_log_likelihood(fit.model, data);
  const double n = static_cast<double>(data.rows());
  return static_cast<double>(gmm_parameter_count(cfg.k, static_cast<std::size_t>(data.cols()))) * std::log(n) -
         2.0 * ll;
}

}  // namespace

std::vector<std::size_t> greedy_bic_select(std::span<const FeatureVector> features,
                                           std::span<const DriveAction> actions,
                                           std::span<const std::size_t> candidates, const BicConfig& cfg,
                                           std::uint64_t seed) {
  std::vector<std::size_t> selected;
  if (cfg.max_features == 0 || candidates.empty()) return selected;

  std::vector<FeatureVector> fs(features.begin(), features.end());
  std::vector<DriveAction> as(actions.begin(), actions.end());
  if (fs.size() > cfg.max_samples) {
    Rng rng(derive_seed(seed, {0}));
    std::vector<std::size_t> order(fs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(cfg.max_samples);
    std::sort(order.begin(), order.end());
    std::vector<FeatureVector> f2;
    std::vector<DriveAction> a2;
    for (std::size_t i : order) {
      f2.push_back(fs[i]);
      a2.push_back(as[i]);
    }
    fs.swap(f2);
    as.swap(a2);
  }

  double current = bic_of(joint_matrix(fs, as, selected), cfg, derive_seed(seed, {1}));
  std::vector<std::size_t> remaining(candidates.begin(), candidates.end());
  while (selected.size() < cfg.max_features && !remaining.empty()) {
    double best = current;
    std::size_t best_pos = remaining.size();
    for (std::size_t p = 0; p < remaining.size(); ++p) {
      std::vector<std::size_t> trial = selected;
      trial.push_back(remaining[p]);
      double bic = 0.0;
      try {
        bic = bic_of(joint_matrix(fs, as, trial), cfg, derive_seed(seed, {2, selected.size(), remaining[p]}));
      } catch (const Error&) {
        continue;  // candidate makes the joint model degenerate
      }
      if (bic < best) {
        best = bic;
        best_pos = p;
      }
    }
    if (best_pos == remaining.size()) break;
    selected.push_back(remaining[best_pos]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_pos));
    current = best;
  }
  return selected;
}

MixtureRegression fit_mixture_regression(std::span<const FeatureVector> features,
                                         std::span<const DriveAction> actions, const BicConfig& cfg,
                                         std::uint64_t seed) {
  // Indicators are binary and excluded, as are features that never vary.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < kIndicatorOffset; ++i) {
    double lo = features.empty() ? 0.0 : features[0][i], hi = lo;
    for (const auto& f : features) {
      lo = std::min(lo, f[i]);
      hi = std::max(hi, f[i]);
    }
    if (hi - lo > 1e-6) candidates.push_back(i);
  }
  const auto selected = greedy_bic_select(features, actions, candidates, cfg, derive_seed(seed, {10}));
  EmConfig em = cfg.em;
  em.max_iters = std::max(em.max_iters, 200);
  EmResult fit = em_fit(joint_matrix(features, actions, selected), cfg.k, derive_seed(seed, {11}), em);
  fit.model.features = selected;
  return fit.model;
}

}  // namespace driveimit
