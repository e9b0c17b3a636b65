#include "driveimit/model_io.hpp"

#include <fstream>
#include <json.hpp>

#include "driveimit/error.hpp"
#include "driveimit/policies.hpp"

namespace driveimit {

using nlohmann::ordered_json;

std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kPolicy: return "policy";
    case ModelKind::kDiscriminator: return "discriminator";
    case ModelKind::kStaticGaussian: return "static_gaussian";
    case ModelKind::kMixtureRegression: return "mixture_regression";
  }
  return "policy";
}

namespace {

ordered_json header(ModelKind k) {
  ordered_json j;
  j["format"] = "driveimit-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = model_kind_name(k);
  return j;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

ordered_json read_json(const std::filesystem::path& path, std::optional<ModelKind> kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "driveimit-model") {
    throw Error(ErrorCode::kParseError, path.string() + ": not a model file");
  }
  if (j.value("version", 0) != kModelFormatVersion) {
    throw Error(ErrorCode::kParseError, path.string() + ": unsupported model version");
  }
  if (kind && j.value("kind", "") != model_kind_name(*kind)) {
    throw Error(ErrorCode::kArchitectureMismatch,
                path.string() + ": expected a " + std::string(model_kind_name(*kind)) + " model");
  }
  return j;
}

ordered_json params_json(const ParamVector& pv) {
  ordered_json j = ordered_json::object();
  const auto values = pv.values();
  for (const auto& s : pv.slices()) {
    j[s.name] = std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(s.offset),
                                    values.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size));
  }
  return j;
}

void load_params(const ordered_json& j, ParamVector& pv, const std::string& what) {
  if (!j.is_object() || j.size() != pv.slices().size()) {
    throw Error(ErrorCode::kArchitectureMismatch, what + ": parameter slices do not match the architecture");
  }
  auto values = pv.values();
  for (const auto& s : pv.slices()) {
    if (!j.contains(s.name)) throw Error(ErrorCode::kArchitectureMismatch, what + ": missing slice " + s.name);
    const auto v = j.at(s.name).get<std::vector<double>>();
    if (v.size() != s.size) throw Error(ErrorCode::kArchitectureMismatch, what + ": slice " + s.name + " has wrong size");
    std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(s.offset));
  }
  if (!pv.all_finite()) throw Error(ErrorCode::kParseError, what + ": non-finite parameters");
}

ordered_json scaling_json(const ActionScaling& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

ActionScaling scaling_from(const ordered_json& j) {
  ActionScaling s;
  s.mean = j.at("mean").get<std::array<double, kActionDim>>();
  s.scale = j.at("scale").get<std::array<double, kActionDim>>();
  return s;
}

template <class Fn>
auto guarded(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

}  // namespace

void save_policy(const std::filesystem::path& path, const GaussianPolicyNet& net, const std::string& name,
                 const std::string& normalization) {
  ordered_json j = header(ModelKind::kPolicy);
  j["name"] = name;
  const PolicyArchitecture& a = net.architecture();
  j["architecture"] = {{"arch", policy_arch_name(a.arch)}, {"input", a.input}, {"hidden", a.hidden}, {"core", a.core}};
  j["action_scaling"] = scaling_json(net.scaling());
  j["normalization"] = normalization;
  j["params"] = params_json(net.params());
  write_json(path, j);
}

PolicyFile load_policy(const std::filesystem::path& path, const std::optional<PolicyArchitecture>& expected) {
  const ordered_json j = read_json(path, ModelKind::kPolicy);
  return guarded(path, [&] {
    PolicyArchitecture a;
    const auto& aj = j.at("architecture");
    a.arch = parse_policy_arch(aj.at("arch").get<std::string>());
    a.input = aj.at("input").get<std::size_t>();
    a.hidden = aj.at("hidden").get<std::vector<std::size_t>>();
    a.core = aj.at("core").get<std::size_t>();
    if (expected && !(*expected == a)) {
      throw Error(ErrorCode::kArchitectureMismatch, path.string() + ": architecture differs from the expected one");
    }
    PolicyFile f{j.value("name", "policy"), j.value("normalization", ""), GaussianPolicyNet(a, 0)};
    f.net.set_scaling(scaling_from(j.at("action_scaling")));
    load_params(j.at("params"), f.net.params(), path.string());
    return f;
  });
}

void save_discriminator(const std::filesystem::path& path, const DiscriminatorNet& disc) {
  ordered_json j = header(ModelKind::kDiscriminator);
  j["architecture"] = {{"obs_dim", disc.obs_dim()}, {"hidden", disc.hidden()}};
  j["action_scaling"] = scaling_json(disc.scaling());
  j["params"] = params_json(disc.params());
  write_json(path, j);
}

DiscriminatorNet load_discriminator(const std::filesystem::path& path) {
  const ordered_json j = read_json(path, ModelKind::kDiscriminator);
  return guarded(path, [&] {
    const auto& aj = j.at("architecture");
    DiscriminatorNet d(0, aj.at("obs_dim").get<std::size_t>(), aj.at("hidden").get<std::vector<std::size_t>>());
    d.set_scaling(scaling_from(j.at("action_scaling")));
    load_params(j.at("params"), d.params(), path.string());
    return d;
  });
}

void save_static_gaussian(const std::filesystem::path& path, const StaticGaussian& g) {
  ordered_json j = header(ModelKind::kStaticGaussian);
  j["mu"] = {g.mu(0), g.mu(1)};
  j["sigma"] = {{g.sigma(0, 0), g.sigma(0, 1)}, {g.sigma(1, 0), g.sigma(1, 1)}};
  write_json(path, j);
}

StaticGaussian load_static_gaussian(const std::filesystem::path& path) {
  const ordered_json j = read_json(path, ModelKind::kStaticGaussian);
  return guarded(path, [&] {
    StaticGaussian g;
    const auto mu = j.at("mu").get<std::array<double, 2>>();
    const auto s = j.at("sigma").get<std::array<std::array<double, 2>, 2>>();
    g.mu << mu[0], mu[1];
    g.sigma << s[0][0], s[0][1], s[1][0], s[1][1];
    return g;
  });
}

void save_mixture(const std::filesystem::path& path, const MixtureRegression& mr) {
  ordered_json j = header(ModelKind::kMixtureRegression);
  j["features"] = mr.features;
  j["components"] = ordered_json::array();
  for (const auto& c : mr.components) {
    std::vector<double> mean(c.mean.data(), c.mean.data() + c.mean.size());
    std::vector<std::vector<double>> cov;
    for (Eigen::Index r = 0; r < c.cov.rows(); ++r) {
      cov.emplace_back();
      for (Eigen::Index k = 0; k < c.cov.cols(); ++k) cov.back().push_back(c.cov(r, k));
    }
    j["components"].push_back({{"weight", c.weight}, {"mean", mean}, {"cov", cov}});
  }
  write_json(path, j);
}

MixtureRegression load_mixture(const std::filesystem::path& path) {
  const ordered_json j = read_json(path, ModelKind::kMixtureRegression);
  return guarded(path, [&] {
    MixtureRegression mr;
    mr.features = j.at("features").get<std::vector<std::size_t>>();
    const auto dim = static_cast<Eigen::Index>(2 + mr.features.size());
    for (const auto& cj : j.at("components")) {
      GaussianComponent c;
      c.weight = cj.at("weight").get<double>();
      const auto mean = cj.at("mean").get<std::vector<double>>();
      const auto cov = cj.at("cov").get<std::vector<std::vector<double>>>();
      if (static_cast<Eigen::Index>(mean.size()) != dim || static_cast<Eigen::Index>(cov.size()) != dim) {
        throw Error(ErrorCode::kArchitectureMismatch, path.string() + ": component dimension mismatch");
      }
      c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
      c.cov.resize(dim, dim);
      for (Eigen::Index r = 0; r < dim; ++r) {
        if (static_cast<Eigen::Index>(cov[static_cast<std::size_t>(r)].size()) != dim) {
          throw Error(ErrorCode::kArchitectureMismatch, path.string() + ": component dimension mismatch");
        }
        for (Eigen::Index k = 0; k < dim; ++k) c.cov(r, k) = cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)];
      }
      mr.components.push_back(std::move(c));
    }
    return mr;
  });
}

ModelKind peek_model_kind(const std::filesystem::path& path) {
  const ordered_json j = read_json(path, std::nullopt);
  const std::string k = j.value("kind", "");
  for (ModelKind m : {ModelKind::kPolicy, ModelKind::kDiscriminator, ModelKind::kStaticGaussian,
                      ModelKind::kMixtureRegression}) {
    if (k == model_kind_name(m)) return m;
  }
  throw Error(ErrorCode::kParseError, path.string() + ": unknown model kind '" + k + "'");
}

std::unique_ptr<Policy> load_model_policy(const std::filesystem::path& path, std::string* normalization) {
  if (normalization) normalization->clear();
  switch (peek_model_kind(path)) {
    case ModelKind::kPolicy: {
      PolicyFile f = load_policy(path);
      if (normalization) *normalization = f.normalization;
      return std::make_unique<NeuralPolicy>(std::make_shared<const GaussianPolicyNet>(std::move(f.net)), f.name);
    }
    case ModelKind::kStaticGaussian:
      return std::make_unique<SgPolicy>(load_static_gaussian(path));
    case ModelKind::kMixtureRegression:
      return std::make_unique<MrPolicy>(std::make_shared<const MixtureRegression>(load_mixture(path)));
    case ModelKind::kDiscriminator:
      break;
  }
  throw Error(ErrorCode::kConfigError, path.string() + ": a discriminator cannot drive");
}

}  // namespace driveimit
