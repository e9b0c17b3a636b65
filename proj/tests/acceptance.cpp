// Acceptance checks. Usage: acceptance <criterion 1-10> <work dir>
// Prints one PASS/FAIL line and exits 0 on PASS.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <string>

#include "baselines_support.hpp"
#include "cli_support.hpp"
#include "driveimit/error.hpp"
#include "driveimit/features.hpp"
#include "driveimit/metrics.hpp"
#include "ekf_support.hpp"
#include "gradcheck.hpp"
#include "learn_support.hpp"
#include "metrics_support.hpp"

using namespace driveimit;
using namespace driveimit::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome gradients() {
  double mlp = 0.0, gru = 0.0, disc = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    mlp = std::max(mlp, policy_gradient_error(PolicyArch::kMlp, seed, 3));
    gru = std::max(gru, gru_gradient_error(seed, 10));
    disc = std::max(disc, disc_gradient_error(seed));
  }
  return {std::max({mlp, gru, disc}) < 1e-4,
          fmt("max relative error mlp %.2e gru %.2e disc %.2e over 20 instances", mlp, gru, disc)};
}

Outcome trust_region() {
  const double limit = 1.05 * TrpoConfig{}.kl_step;
  int accepted = 0, violations = 0;
  double worst_kl = 0.0, worst_impr = 1e300;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const TrpoStepCheck c = trpo_random_batch(seed % 2 == 0 ? PolicyArch::kGru : PolicyArch::kMlp, seed);
    if (!c.accepted) continue;
    ++accepted;
    worst_kl = std::max(worst_kl, c.measured_kl);
    worst_impr = std::min(worst_impr, c.measured_improvement);
    if (c.measured_kl > limit || c.measured_improvement < 0.0) ++violations;
  }
  double cg = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) cg = std::max(cg, cg_relative_error(seed));
  return {violations == 0 && accepted > 0 && cg < 1e-8,
          fmt("%d/50 steps accepted, %d violations, max KL %.4g (limit %.4g), min improvement %.3g, CG error %.2e",
              accepted, violations, worst_kl, limit, worst_impr, cg)};
}

Outcome bandit() {
  double mu = 0.0;
  const int it = bandit_iterations_to_converge(1, 200, 200, &mu);
  return {it > 0 && it <= 200, fmt("|mu-3| < 0.1 after %d iterations, final mu %.4f", it, mu)};
}

Outcome gail_sanity() {
  const double sep = disc_accuracy_after_training(3, true);
  const double same = disc_accuracy_after_training(4, false);
  const double r5 = surrogate_reward_from_d(0.5), r9 = surrogate_reward_from_d(0.9);
  const bool rewards = std::abs(r5 - std::log(2.0)) < 1e-9 && std::abs(r9 - std::log(10.0)) < 1e-9;
  return {sep > 0.95 && std::abs(same - 0.5) <= 0.05 && rewards,
          fmt("separable accuracy %.3f, identical accuracy %.3f, r(0.5) %.12f, r(0.9) %.12f", sep, same, r5, r9)};
}

Outcome campaign(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::remove_all(work);
  const std::string out = (work / "out").string();
  const fs::path models = work / "out" / "models";
  const std::vector<std::vector<std::string>> steps = {
      {"synth-expert"},
      {"train", "bc", "--arch", "mlp"},
      {"train", "gail", "--arch", "mlp", "--set", "gail.iterations=50"},
      {"fit", "sg"},
      {"evaluate", "--models", (models / "sg.json").string(), (models / "bc-mlp.json").string(),
       (models / "gail-mlp.json").string(), "--set", "metrics.scenes=100", "--set", "metrics.repeats=5"},
  };
  for (auto args : steps) {
    for (const char* a : {"-o", out.c_str(), "--seed", "1"}) args.push_back(a);
    const auto s0 = std::chrono::steady_clock::now();
    const CliRun r = cli(args);
    std::printf("  %s: exit %d, %.0f s\n", args[0].c_str(), r.code,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count());
    if (r.code != 0) return {false, args[0] + " failed: " + r.err};
  }
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  const CampaignReport rep = parse_report_json(slurp(work / "out" / "evaluation" / "evaluation.json"));
  auto model = [&](const std::string& name) -> const ModelReport& {
    for (const auto& m : rep.models) {
      if (m.name == name) return m;
    }
    throw Error(ErrorCode::kParseError, "no model " + name + " in the report");
  };
  const ModelReport &sg = model("sg"), &bc = model("bc-mlp"), &gail = model("gail-mlp");
  const std::size_t h1 = static_cast<std::size_t>(
      std::find(rep.horizons.begin(), rep.horizons.end(), 1.0) - rep.horizons.begin());
  const double bc_rwse = bc.rwse.at(RwseVariable::kPosition).at(h1);
  const double gail_rwse = gail.rwse.at(RwseVariable::kPosition).at(h1);
  const bool a = gail.emergent.collision_rate < sg.emergent.collision_rate;
  const bool b = gail.emergent.offroad_duration < bc.emergent.offroad_duration;
  const bool c = bc_rwse <= gail_rwse + 0.5;
  std::printf("  (a) collision rate gail %.4f < sg %.4f: %s\n", gail.emergent.collision_rate,
              sg.emergent.collision_rate, a ? "yes" : "no");
  std::printf("  (b) offroad duration gail %.4f < bc %.4f: %s\n", gail.emergent.offroad_duration,
              bc.emergent.offroad_duration, b ? "yes" : "no");
  std::printf("  (c) position RWSE at 1 s bc %.4f <= gail %.4f + 0.5: %s\n", bc_rwse, gail_rwse, c ? "yes" : "no");
  return {a && b && c && minutes < 45.0,
          fmt("orderings a=%d b=%d c=%d, %.1f min total", int(a), int(b), int(c), minutes)};
}

Outcome metric_oracles() {
  const std::vector<std::vector<double>> two{{1.0, 2.0}};
  const double r = rwse(two);
  const std::vector<double> p{3.0, 1.0}, q{1.0, 1.0};
  const double kl = kl_from_counts(p, q);
  const SelfReplayResult self = self_replay_campaign(1);
  const bool ok = std::abs(r - std::sqrt(2.5)) < 1e-9 && std::abs(kl - 0.13081) < 1e-5 && self.max_rwse == 0.0 &&
                  self.max_kl < 1e-3 && self.emergent_equal;
  return {ok, fmt("rwse %.10f, kl %.6f, self-replay over %zu scenes: max rwse %.3g, max kl %.3g, emergent equal %d", r,
                  kl, self.scenes, self.max_rwse, self.max_kl, int(self.emergent_equal))};
}

Outcome em() {
  double worst_drop = 0.0, worst_mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const EmResult r = em_fit(two_clusters(seed), 2, seed);
    worst_drop = std::max(worst_drop, worst_ll_drop(r));
    worst_mean = std::max(worst_mean, cluster_mean_error(r));
  }
  return {worst_drop <= 1e-9 && worst_mean < 0.2,
          fmt("100 seeds: largest log-likelihood decrease %.3g, largest mean error %.4f", worst_drop, worst_mean)};
}

Outcome ekf() {
  int improved = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const ArcSmoothing r = smooth_noisy_arc(seed, 0.5);
    if (r.smoothed_rmse < r.raw_rmse) ++improved;
    worst = std::max(worst, r.smoothed_rmse / r.raw_rmse);
  }
  return {improved >= 95, fmt("%d/100 arcs improved, worst smoothed/raw RMSE ratio %.3f", improved, worst)};
}

// Random-action rollouts on the fixture: every termination must agree with the
// indicator bits and the step count with the horizon.
Outcome environment() {
  bool ok = kFeatureCount == 51 && kBeamCount == 20;
  for (std::size_t k = 0; k < kBeamCount; ++k) ok = ok && std::abs(beam_angle(k) - k * std::numbers::pi / 10.0) < 1e-12;
  const SimConfig sim;
  ok = ok && sim.horizon == 100 && sim.dt == 0.1;
  auto data = fixture_dataset();
  Env env(data, sim);
  Rng rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  // Driving styles: random, hard braking, full throttle straight ahead.
  const std::array<std::array<double, 4>, 3> styles{{{0.0, 3.0, 0.0, 0.15}, {-4.0, 1.0, 0.0, 0.01}, {3.0, 0.5, 0.0, 0.0}}};
  int episodes = 0, inconsistent = 0;
  std::map<Termination, int> seen;
  for (const Scene& s : env.eligible_scenes()) {
    for (const auto& st : styles) {
      env.reset(s);
      Env::StepResult r;
      while (!env.terminated()) r = env.step({st[0] + st[1] * noise(rng), st[2] + st[3] * noise(rng)});
      ++episodes;
      ++seen[r.termination];
      const FeatureVector& o = r.obs;
      const bool c = o[kIndicatorOffset] == 1.0, off = o[kIndicatorOffset + 1] == 1.0,
                 rev = o[kIndicatorOffset + 2] == 1.0;
      bool good = true;
      switch (r.termination) {
        case Termination::kCollision: good = c; break;
        case Termination::kOffroad: good = off && !c; break;
        case Termination::kReverse: good = rev && !c && !off; break;
        case Termination::kHorizon: good = !c && !off && !rev && env.step_count() == sim.horizon; break;
        default: good = false;
      }
      good = good && env.step_count() <= sim.horizon && o.size() == kFeatureCount;
      if (!good) ++inconsistent;
    }
  }
  return {ok && inconsistent == 0 && episodes > 0,
          fmt("constants %s, %d random episodes (%d collision, %d offroad, %d reverse, %d horizon), %d inconsistent",
              ok ? "ok" : "wrong", episodes, seen[Termination::kCollision], seen[Termination::kOffroad],
              seen[Termination::kReverse], seen[Termination::kHorizon], inconsistent)};
}

Outcome determinism(const fs::path& work) {
  const DeterminismCheck d = evaluate_twice(work);
  if (!d.ran) return {false, "evaluate failed: " + d.log};
  return {d.identical, fmt("%zu report files, identical across runs: %d", d.files, int(d.identical))};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <criterion 1-10> <work dir>\n", argv[0]);
    return 2;
  }
  const int n = std::atoi(argv[1]);
  const fs::path work = fs::path(argv[2]) / ("criterion_" + std::to_string(n));
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> checks = {
      {1, {"gradient correctness", gradients}},
      {2, {"trust region", trust_region}},
      {3, {"bandit convergence", bandit}},
      {4, {"adversarial sanity", gail_sanity}},
      {5, {"end-to-end campaign", [&] { return campaign(work); }}},
      {6, {"metric oracles", metric_oracles}},
      {7, {"EM monotonicity", em}},
      {8, {"EKF smoothing", ekf}},
      {9, {"environment invariants", environment}},
      {10, {"evaluate determinism", [&] { return determinism(work); }}},
  };
  const auto it = checks.find(n);
  if (it == checks.end()) {
    std::fprintf(stderr, "unknown criterion %d\n", n);
    return 2;
  }
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = it->second.second();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("CRITERION %d (%s): %s  %s [%.1f s]\n", n, it->second.first, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
              secs);
  return o.pass ? 0 : 1;
}
