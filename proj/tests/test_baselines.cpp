#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "baselines_support.hpp"
#include "driveimit/baselines.hpp"
#include "driveimit/error.hpp"
#include "support.hpp"

using namespace driveimit;
using namespace driveimit::test;

TEST_CASE("static gaussian") {
  const std::vector<DriveAction> two{{0.0, 0.0}, {2.0, 0.0}};
  StaticGaussian g = fit_static_gaussian(two);
  CHECK(g.mu[0] == doctest::Approx(1.0));
  CHECK(g.mu[1] == doctest::Approx(0.0));
  CHECK(g.sigma(0, 0) == doctest::Approx(1.0 + 1e-9).epsilon(1e-15));
  CHECK(g.sigma(1, 1) == doctest::Approx(1e-9).epsilon(1e-6));
  CHECK(g.sigma(0, 1) == 0.0);

  const std::vector<DriveAction> same(5, DriveAction{0.7, -0.01});
  g = fit_static_gaussian(same);
  CHECK(g.mu[0] == doctest::Approx(0.7));
  CHECK(g.sigma(0, 0) == doctest::Approx(1e-9).epsilon(1e-6));
  CHECK(g.sigma(1, 1) == doctest::Approx(1e-9).epsilon(1e-6));

  try {
    fit_static_gaussian(std::vector<DriveAction>(1));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooFewSamples);
  }
}

TEST_CASE("static gaussian on the fixture action set") {
  // tests/oracles/dataset_oracle.py
  std::ifstream in(kFixtures / "actions.csv");
  std::string line;
  std::getline(in, line);
  std::vector<DriveAction> acts;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    DriveAction a;
    char comma;
    ss >> a.accel >> comma >> a.turn_rate;
    acts.push_back(a);
  }
  const auto want = nlohmann::json::parse(std::ifstream(kFixtures / "actions_stats.json"));
  const StaticGaussian g = fit_static_gaussian(acts);
  for (int i = 0; i < 2; ++i) {
    CHECK(g.mu[i] == doctest::Approx(want["mu"][i].get<double>()).epsilon(1e-12));
    for (int j = 0; j < 2; ++j) CHECK(g.sigma(i, j) == doctest::Approx(want["sigma"][i][j].get<double>()).epsilon(1e-10));
  }

  // Shifting every action shifts only the mean.
  std::vector<DriveAction> shifted = acts;
  for (auto& a : shifted) {
    a.accel += 1.5;
    a.turn_rate -= 0.1;
  }
  const StaticGaussian s = fit_static_gaussian(shifted);
  CHECK(s.mu[0] == doctest::Approx(g.mu[0] + 1.5));
  CHECK(s.mu[1] == doctest::Approx(g.mu[1] - 0.1));
  CHECK(s.sigma(0, 0) == doctest::Approx(g.sigma(0, 0)).epsilon(1e-9));
}

TEST_CASE("em with one component is the joint MLE") {
  const Eigen::MatrixXd x = two_clusters(1, 50);
  EmConfig cfg;
  cfg.ridge = 0.0;
  const EmResult r = em_fit(x, 1, 3, cfg);
  REQUIRE(r.model.components.size() == 1);
  const Eigen::VectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows());
  CHECK((r.model.components[0].mean - mean).norm() < 1e-9);
  CHECK((r.model.components[0].cov - cov).norm() < 1e-9);
  CHECK(r.model.components[0].weight == doctest::Approx(1.0));
}

TEST_CASE("em recovers two clusters and never lowers the likelihood") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const EmResult r = em_fit(two_clusters(seed), 2, seed);
    CHECK(cluster_mean_error(r) < 0.2);
    CHECK(worst_ll_drop(r) <= 1e-9);
    CHECK(r.model.components[0].weight + r.model.components[1].weight == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(em_fit(Eigen::MatrixXd::Zero(3, 2), 2, 1), Error);
  CHECK(gmm_parameter_count(2, 3) == 2 * 3 + 2 * 6 + 1);
}

TEST_CASE("mixture regression conditional") {
  SUBCASE("one component is linear regression") {
    Rng rng(4);
    const int n = 400;
    std::vector<FeatureVector> f(n);
    std::vector<DriveAction> a(n);
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      f[i] = FeatureVector{};
      f[i][4] = standard_normal(rng);
      f[i][9] = 2.0 + standard_normal(rng);
      a[i] = {0.5 * f[i][4] - 0.3 * f[i][9] + 0.2 * standard_normal(rng), 0.01 * standard_normal(rng)};
      X(i, 0) = 1.0;
      X(i, 1) = f[i][4];
      X(i, 2) = f[i][9];
      y[i] = a[i].accel;
    }
    const std::vector<std::size_t> idx{4, 9};
    EmConfig cfg;
    cfg.ridge = 0.0;
    EmResult r = em_fit(joint_matrix(f, a, idx), 1, 1, cfg);
    r.model.features = idx;
    // Least-squares oracle.
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    FeatureVector q{};
    q[4] = 0.7;
    q[9] = 1.1;
    const ConditionalMixture c = mr_conditional(r.model, q);
    REQUIRE(c.weights.size() == 1);
    CHECK(c.weights[0] == doctest::Approx(1.0));
    CHECK(c.means[0][0] == doctest::Approx(beta[0] + beta[1] * 0.7 + beta[2] * 1.1).epsilon(1e-9));
  }

  SUBCASE("independent action block") {
    MixtureRegression m;
    GaussianComponent c;
    c.weight = 1.0;
    c.mean = Eigen::Vector3d(0.4, 0.01, 5.0);
    c.cov = Eigen::Matrix3d::Identity();
    c.cov(1, 1) = 0.01;
    m.components.push_back(c);
    m.features = {2};
    FeatureVector q{};
    q[2] = -3.0;
    const ConditionalMixture out = mr_conditional(m, q);
    CHECK(out.means[0][0] == doctest::Approx(0.4));
    CHECK(out.covs[0](1, 1) == doctest::Approx(0.01));
  }

  SUBCASE("symmetric components") {
    MixtureRegression m;
    for (double s : {-1.0, 1.0}) {
      GaussianComponent c;
      c.weight = 0.5;
      c.mean = Eigen::Vector3d(s, 0.0, 2.0 * s);
      c.cov = Eigen::Matrix3d::Identity();
      m.components.push_back(c);
    }
    m.features = {0};
    FeatureVector q{};
    const ConditionalMixture out = mr_conditional(m, q);
    CHECK(out.weights[0] == doctest::Approx(0.5));
    CHECK(out.weights[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("greedy feature selection") {
  Rng rng(8);
  const int n = 600;
  std::vector<FeatureVector> f(n);
  std::vector<DriveAction> a(n);
  for (int i = 0; i < n; ++i) {
    f[i] = FeatureVector{};
    for (std::size_t d = 0; d < 6; ++d) f[i][d] = standard_normal(rng);
    a[i] = {2.0 * f[i][3], 0.01 * standard_normal(rng)};
  }
  const std::vector<std::size_t> cands{0, 1, 2, 3, 4, 5};
  BicConfig cfg;
  cfg.k = 2;
  cfg.max_features = 0;
  CHECK(greedy_bic_select(f, a, cands, cfg, 1).empty());
  cfg.max_features = 3;
  const auto sel = greedy_bic_select(f, a, cands, cfg, 1);
  REQUIRE_FALSE(sel.empty());
  CHECK(sel.front() == 3);
  CHECK(sel.size() <= 3);
  cfg.max_features = 1;
  CHECK(greedy_bic_select(f, a, cands, cfg, 1).size() <= 1);
}
