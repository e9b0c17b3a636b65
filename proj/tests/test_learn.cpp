#include <doctest.h>

#include <cmath>
#include <numeric>

#include "driveimit/error.hpp"
#include "driveimit/learn.hpp"
#include "driveimit/policies.hpp"
#include "learn_support.hpp"

using namespace driveimit;
using namespace driveimit::test;

TEST_CASE("returns and advantages") {
  const std::vector<std::vector<double>> zero{{0.0, 0.0, 0.0}};
  AdvantageResult r = compute_advantages(zero, {}, 0.95, 0.95);
  for (double v : r.returns[0]) CHECK(v == 0.0);
  for (double v : r.advantages[0]) CHECK(v == 0.0);

  const std::vector<std::vector<double>> ones{{1.0, 1.0, 1.0}};
  r = compute_advantages(ones, {}, 0.5, 0.95);
  CHECK(r.returns[0][0] == doctest::Approx(1.75));
  CHECK(r.returns[0][1] == doctest::Approx(1.5));
  CHECK(r.returns[0][2] == doctest::Approx(1.0));

  const std::vector<std::vector<double>> mixed{{0.3, -1.0, 2.0, 0.5}, {1.0, 4.0}};
  r = compute_advantages(mixed, {}, 0.9, 1.0);
  for (std::size_t e = 0; e < mixed.size(); ++e) {
    for (std::size_t t = 0; t < mixed[e].size(); ++t) CHECK(r.advantages[e][t] == r.returns[e][t]);
  }
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (const auto& ep : r.normalized) {
    for (double v : ep) {
      sum += v;
      sq += v * v;
      ++n;
    }
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-9));

  // One-step TD against a baseline.
  const std::vector<std::vector<double>> values{{0.5, 0.25, 0.0}};
  r = compute_advantages(ones, values, 0.5, 0.0);
  CHECK(r.advantages[0][0] == doctest::Approx(1.0 + 0.5 * 0.25 - 0.5));
  CHECK(r.advantages[0][2] == doctest::Approx(1.0));
}

TEST_CASE("linear baseline fits returns") {
  std::vector<std::vector<double>> obs(3), rets(3);
  for (std::size_t e = 0; e < 3; ++e) {
    for (std::size_t t = 0; t < 40; ++t) {
      const double o = 0.1 * static_cast<double>(e) + 0.01 * t;
      obs[e].push_back(o);
      rets[e].push_back(2.0 * o + 0.5);
    }
  }
  LinearBaseline b;
  CHECK_FALSE(b.fitted());
  b.fit(obs, 1, rets);
  CHECK(b.fitted());
  const auto pred = b.predict(obs[1], 1);
  for (std::size_t t = 0; t < pred.size(); ++t) CHECK(pred[t] == doctest::Approx(rets[1][t]).epsilon(1e-3));
}

TEST_CASE("conjugate gradient matches a direct solve") {
  for (std::uint64_t s = 1; s <= 5; ++s) CHECK(cg_relative_error(s) < 1e-8);
}

TEST_CASE("gaussian kl") {
  GaussianActionDist p;
  p.mu = {0.5, -0.1};
  p.log_nu = {0.2, -3.0};
  CHECK(gaussian_kl(p, p) == 0.0);
  GaussianActionDist q = p;
  q.mu[0] = 1.5;
  CHECK(gaussian_kl(p, q) == doctest::Approx(0.5 / std::exp(0.2)));
}

TEST_CASE("zero advantages leave the policy unchanged") {
  BanditPolicy policy(1.0, -0.5);
  std::vector<TrpoEpisode> eps(4);
  Rng rng(1);
  for (auto& e : eps) {
    e.actions.push_back(sample_and_logprob(policy.dist(), rng).action);
    e.advantages.push_back(0.0);
  }
  const TrpoDiagnostics d = trpo_update(policy, eps, TrpoConfig{});
  CHECK_FALSE(d.accepted);
  CHECK(d.grad_norm == 0.0);
  CHECK(policy.parameters()[0] == 1.0);
  CHECK(policy.parameters()[1] == -0.5);
}

TEST_CASE("non-finite gradients abort") {
  BanditPolicy policy(1.0, 0.0);
  std::vector<TrpoEpisode> eps(1);
  eps[0].actions.push_back({1.0, 0.0});
  eps[0].advantages.push_back(std::nan(""));
  CHECK_THROWS_AS(trpo_update(policy, eps, TrpoConfig{}), Error);
  CHECK(policy.parameters()[0] == 1.0);
}

TEST_CASE("bandit converges") {
  double mu = 0.0;
  const int it = bandit_iterations_to_converge(3, 200, 200, &mu);
  CHECK(it > 0);
  CHECK(std::abs(mu - 3.0) < 0.1);
}

TEST_CASE("trust region holds on rollout batches") {
  for (std::uint64_t s = 1; s <= 2; ++s) {
    for (PolicyArch arch : {PolicyArch::kMlp, PolicyArch::kGru}) {
      const TrpoStepCheck c = trpo_random_batch(arch, s);
      CHECK(c.accepted);
      CHECK(c.measured_kl <= 1.05 * TrpoConfig{}.kl_step);
      CHECK(c.measured_kl == doctest::Approx(c.reported_kl).epsilon(1e-9));
      CHECK(c.measured_improvement >= 0.0);
    }
  }
}

TEST_CASE("discriminator objective and accuracy") {
  DiscriminatorNet disc(1);
  std::fill(disc.params().values().begin(), disc.params().values().end(), 0.0);
  Rng rng(2);
  const auto e = gaussian_pairs(50, 0.0, rng);
  const auto p = gaussian_pairs(50, 0.0, rng);
  CHECK(gail_objective(disc, e, p) == doctest::Approx(2.0 * std::log(0.5)));
  CHECK(gail_objective(disc, e, p) == doctest::Approx(-1.38629).epsilon(1e-5));

  CHECK(disc_accuracy_after_training(3, true) > 0.95);
  CHECK(std::abs(disc_accuracy_after_training(4, false) - 0.5) < 0.05);
}

TEST_CASE("surrogate reward") {
  CHECK(surrogate_reward_from_d(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(surrogate_reward_from_d(0.9) == doctest::Approx(2.302585092994046).epsilon(1e-12));
  CHECK(surrogate_reward_from_d(0.0) == doctest::Approx(1e-6).epsilon(1e-3));
  CHECK(surrogate_reward_from_d(1.0) == doctest::Approx(-std::log(1e-6)));
}

TEST_CASE("behavioral cloning") {
  Rng rng(5);
  std::vector<ExpertEpisode> eps(4);
  for (auto& e : eps) {
    for (int t = 0; t < 50; ++t) {
      FeatureVector o{};
      for (std::size_t d = 0; d < kFeatureCount; ++d) o[d] = 0.3 * standard_normal(rng);
      e.obs.push_back(o);
      e.raw_obs.push_back(o);
      e.actions.push_back({0.8, -0.02});
    }
  }

  SUBCASE("zero epochs") {
    GaussianPolicyNet net = GaussianPolicyNet::make(PolicyArch::kMlp, 1);
    const std::vector<double> before(net.params().values().begin(), net.params().values().end());
    BcConfig cfg;
    cfg.epochs = 0;
    CHECK(bc_train(net, eps, {}, cfg, rng).empty());
    CHECK(std::equal(before.begin(), before.end(), net.params().values().begin()));
  }

  SUBCASE("constant action") {
    for (PolicyArch arch : {PolicyArch::kMlp, PolicyArch::kGru}) {
      GaussianPolicyNet net = GaussianPolicyNet::make(arch, 1);
      ActionScaling sc;
      sc.scale = {1.0, 0.05};
      net.set_scaling(sc);
      BcConfig cfg;
      cfg.epochs = 40;
      cfg.minibatch = 50;
      cfg.bptt_length = 10;
      cfg.sequence_batch = 2;
      cfg.step_size = 3e-3;
      const GaussianActionDist d0 = net.forward_sequence(std::span<const FeatureVector>(eps[0].obs)).dists()[10];
      const auto hist = bc_train(net, eps, eps, cfg, rng);
      REQUIRE(hist.size() == 40);
      for (std::size_t k = 1; k < hist.size(); ++k) {
        if (!hist[k].reverted) CHECK(hist[k].train_nll <= hist[k - 1].train_nll + 1e-12);
      }
      const GaussianActionDist d = net.forward_sequence(std::span<const FeatureVector>(eps[0].obs)).dists()[10];
      CHECK(std::abs(d.mu[0] - 0.8) < 0.05);
      CHECK(std::abs(d.mu[1] + 0.02) < 0.005);
      CHECK(d.log_nu[0] < d0.log_nu[0] - 1.0);
      CHECK(hist.back().train_nll < hist.front().train_nll);
    }
  }
}

TEST_CASE("expert extraction on the fixture") {
  auto data = fixture_dataset();
  Env env(data, SimConfig{});
  Rng rng(1);
  const auto scenes = expert_scenes(*data, 100, 0, rng);
  REQUIRE_FALSE(scenes.empty());
  const auto eps = extract_expert(env, scenes);
  REQUIRE(eps.size() == scenes.size());
  for (const auto& e : eps) {
    CHECK(e.actions.size() == 100);
    CHECK(e.obs.size() == 100);
    // Constant-velocity recordings: near-zero actions.
    for (const auto& a : e.actions) {
      CHECK(std::abs(a.accel) < 1e-3);
      CHECK(std::abs(a.turn_rate) < 1e-3);
    }
  }
  const auto pairs = flatten_pairs(eps);
  CHECK(pairs.size() == 100 * eps.size());
  const ActionScaling sc = action_scaling_from(pairs);
  CHECK(sc.scale[0] > 0.0);
  CHECK(sc.scale[1] > 0.0);
}

TEST_CASE("seeded gail training repeats") {
  auto data = fixture_dataset();
  Env env(data, SimConfig{});
  Rng rng(1);
  const auto eps = extract_expert(env, expert_scenes(*data, 100, 0, rng));
  GailConfig gail;
  gail.iterations = 2;
  gail.expert_batch = 200;
  TrpoConfig trpo;
  trpo.batch_steps = 300;
  auto run = [&] {
    GaussianPolicyNet net = GaussianPolicyNet::make(PolicyArch::kMlp, 5);
    net.set_scaling(action_scaling_from(flatten_pairs(eps)));
    DiscriminatorNet disc(6);
    return gail_train(net, disc, data, SimConfig{}, FeatureNormalizer{}, eps, gail, trpo, 11);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == 2);
  REQUIRE(b.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].v == b[i].v);
    CHECK(a[i].mean_reward == b[i].mean_reward);
    CHECK(a[i].mean_kl == b[i].mean_kl);
    CHECK(a[i].mean_len == b[i].mean_len);
  }
}

TEST_CASE("rollout collection does not depend on worker count") {
  auto data = fixture_dataset();
  auto net = std::make_shared<GaussianPolicyNet>(GaussianPolicyNet::make(PolicyArch::kMlp, 2));
  NeuralPolicy p(net, "p");
  const auto one = collect_rollouts(p, data, SimConfig{}, FeatureNormalizer{}, 500, 3, 1);
  const auto three = collect_rollouts(p, data, SimConfig{}, FeatureNormalizer{}, 500, 3, 3);
  REQUIRE(one.size() == three.size());
  std::size_t steps = 0;
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].scene == three[i].scene);
    CHECK(one[i].final_state.x == three[i].final_state.x);
    steps += one[i].length();
  }
  CHECK(steps >= 500);
}
