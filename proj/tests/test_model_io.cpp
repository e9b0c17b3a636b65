#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <json.hpp>

#include "driveimit/error.hpp"
#include "driveimit/model_io.hpp"
#include "support.hpp"

using namespace driveimit;
using namespace driveimit::test;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no throw");
  return ErrorCode::kIoError;
}

nlohmann::json read(const std::filesystem::path& p) { return nlohmann::json::parse(std::ifstream(p)); }
void write(const std::filesystem::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(); }

}  // namespace

TEST_CASE("policy round trip is exact") {
  TempDir dir("driveimit_model_io_policy");
  for (PolicyArch arch : {PolicyArch::kMlp, PolicyArch::kGru}) {
    GaussianPolicyNet net = GaussianPolicyNet::make(arch, 5);
    ActionScaling sc;
    sc.scale = {2.0, 0.07};
    sc.mean = {0.1, -0.002};
    net.set_scaling(sc);
    const auto path = dir.path / "p.json";
    save_policy(path, net, "bc-x", "../data/feature_stats.csv");
    CHECK(peek_model_kind(path) == ModelKind::kPolicy);
    const PolicyFile f = load_policy(path, net.architecture());
    CHECK(f.name == "bc-x");
    CHECK(f.normalization == "../data/feature_stats.csv");
    CHECK(f.net.architecture() == net.architecture());
    REQUIRE(f.net.params().size() == net.params().size());
    CHECK(std::ranges::equal(f.net.params().values(), net.params().values()));
    CHECK(f.net.scaling().scale == sc.scale);
    CHECK(f.net.scaling().mean == sc.mean);
  }
}

TEST_CASE("policy files reject a different architecture") {
  TempDir dir("driveimit_model_io_mismatch");
  const auto path = dir.path / "p.json";
  save_policy(path, GaussianPolicyNet::make(PolicyArch::kMlp, 1), "p", "");

  PolicyArchitecture gru;
  gru.arch = PolicyArch::kGru;
  CHECK(code_of([&] { load_policy(path, gru); }) == ErrorCode::kArchitectureMismatch);

  nlohmann::json j = read(path);
  j["architecture"]["hidden"][1] = 100;
  write(dir.path / "resized.json", j);
  CHECK(code_of([&] { load_policy(dir.path / "resized.json"); }) == ErrorCode::kArchitectureMismatch);

  j = read(path);
  j["params"].erase(j["params"].begin());
  write(dir.path / "missing.json", j);
  CHECK(code_of([&] { load_policy(dir.path / "missing.json"); }) == ErrorCode::kArchitectureMismatch);

  CHECK(code_of([&] { load_discriminator(path); }) == ErrorCode::kArchitectureMismatch);

  j = read(path);
  j["version"] = 2;
  write(dir.path / "v2.json", j);
  CHECK(code_of([&] { load_policy(dir.path / "v2.json"); }) == ErrorCode::kParseError);

  std::ofstream(dir.path / "junk.json") << "{not json";
  CHECK(code_of([&] { load_policy(dir.path / "junk.json"); }) == ErrorCode::kParseError);
  CHECK(code_of([&] { load_policy(dir.path / "absent.json"); }) == ErrorCode::kIoError);
}

TEST_CASE("discriminator round trip") {
  TempDir dir("driveimit_model_io_disc");
  DiscriminatorNet d(9);
  save_discriminator(dir.path / "d.json", d);
  const DiscriminatorNet back = load_discriminator(dir.path / "d.json");
  CHECK(back.hidden() == d.hidden());
  FeatureVector obs{};
  obs[3] = 0.4;
  CHECK(back.forward(obs, {0.5, 0.01}) == d.forward(obs, {0.5, 0.01}));
  CHECK(code_of([&] { load_model_policy(dir.path / "d.json"); }) == ErrorCode::kConfigError);
}

TEST_CASE("baseline round trips") {
  TempDir dir("driveimit_model_io_baselines");
  StaticGaussian g;
  g.mu = {0.3, -0.004};
  g.sigma << 0.5, 0.001, 0.001, 2e-4;
  save_static_gaussian(dir.path / "sg.json", g);
  const StaticGaussian gb = load_static_gaussian(dir.path / "sg.json");
  CHECK(gb.mu == g.mu);
  CHECK(gb.sigma == g.sigma);
  CHECK(peek_model_kind(dir.path / "sg.json") == ModelKind::kStaticGaussian);
  CHECK(load_model_policy(dir.path / "sg.json") != nullptr);

  MixtureRegression m;
  m.features = {3, 17};
  for (int k = 0; k < 2; ++k) {
    GaussianComponent c;
    c.weight = k == 0 ? 0.25 : 0.75;
    c.mean = Eigen::Vector4d(0.1 * k, 0.0, 1.0, -1.0 + k);
    c.cov = Eigen::Matrix4d::Identity() * (1.0 + k);
    m.components.push_back(c);
  }
  save_mixture(dir.path / "mr.json", m);
  const MixtureRegression mb = load_mixture(dir.path / "mr.json");
  CHECK(mb.features == m.features);
  REQUIRE(mb.components.size() == 2);
  CHECK(mb.components[1].weight == 0.75);
  CHECK(mb.components[1].mean == m.components[1].mean);
  CHECK(mb.components[1].cov == m.components[1].cov);

  CHECK(code_of([&] { load_static_gaussian(dir.path / "mr.json"); }) == ErrorCode::kArchitectureMismatch);
}
