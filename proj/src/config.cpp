#include "driveimit/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "driveimit/error.hpp"

namespace driveimit {

namespace {

struct Binding {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_as(const std::string& key, const std::string& text) {
  const std::string v = boost::trim_copy(text);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      const std::string l = boost::to_lower_copy(v);
      if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
      if (l == "false" || l == "0" || l == "no" || l == "off") return false;
      throw boost::bad_lexical_cast();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.empty() && v[0] == '-') throw boost::bad_lexical_cast();
      return boost::lexical_cast<T>(v);
    } else {
      return boost::lexical_cast<T>(v);
    }
  } catch (const boost::bad_lexical_cast&) {
    throw Error(ErrorCode::kConfigError, key + ": cannot parse '" + text + "'");
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<double> out;
  for (const auto& p : parts) {
    if (boost::trim_copy(p).empty()) continue;
    out.push_back(parse_as<double>(key, p));
  }
  return out;
}

// Binds a field reached through a getter of a nested struct.
template <class T, class Access>
Binding bind_at(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = parse_as<T>("", v); },
          [access](const RunConfig& c) {
            const T& x = access(const_cast<RunConfig&>(c));
            if constexpr (std::is_same_v<T, bool>) return std::string(x ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return fmt(x);
            else return boost::lexical_cast<std::string>(x);
          }};
}

template <class Access>
Binding bind_list(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = parse_list("", v); },
          [access](const RunConfig& c) {
            std::string s;
            for (double x : access(const_cast<RunConfig&>(c))) s += (s.empty() ? "" : ",") + fmt(x);
            return s;
          }};
}

template <class Access>
Binding bind_path(Access access) {
  return {[access](RunConfig& c, const std::string& v) { access(c) = boost::trim_copy(v); },
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)).string(); }};
}

#define FIELD(T, expr) bind_at<T>([](RunConfig& c) -> T& { return expr; })

const std::vector<std::pair<std::string, Binding>>& bindings() {
  static const std::vector<std::pair<std::string, Binding>> table = {
      {"run.seed", FIELD(std::uint64_t, c.seed)},
      {"run.jobs", FIELD(unsigned, c.jobs)},
      {"paths.output", bind_path([](RunConfig& c) -> std::filesystem::path& { return c.output; })},
      {"paths.data", bind_path([](RunConfig& c) -> std::filesystem::path& { return c.data; })},
      {"paths.trajectories", bind_path([](RunConfig& c) -> std::filesystem::path& { return c.trajectories; })},
      {"paths.centerlines", bind_path([](RunConfig& c) -> std::filesystem::path& { return c.centerlines; })},
      {"roadway.lane_width", FIELD(double, c.lane_width)},

      {"sim.dt", FIELD(double, c.sim.dt)},
      {"sim.horizon", FIELD(int, c.sim.horizon)},
      {"sim.accel_min", FIELD(double, c.sim.bounds.accel_min)},
      {"sim.accel_max", FIELD(double, c.sim.bounds.accel_max)},
      {"sim.turn_rate_min", FIELD(double, c.sim.bounds.turn_rate_min)},
      {"sim.turn_rate_max", FIELD(double, c.sim.bounds.turn_rate_max)},
      {"sim.offroad_threshold", FIELD(double, c.sim.offroad_threshold)},
      {"sim.emergency_threshold", FIELD(double, c.sim.emergency_threshold)},

      {"idm.desired_speed", FIELD(double, c.driver.idm.desired_speed)},
      {"idm.min_spacing", FIELD(double, c.driver.idm.min_spacing)},
      {"idm.time_headway", FIELD(double, c.driver.idm.time_headway)},
      {"idm.max_accel", FIELD(double, c.driver.idm.max_accel)},
      {"idm.comfort_decel", FIELD(double, c.driver.idm.comfort_decel)},
      {"idm.exponent", FIELD(double, c.driver.idm.exponent)},
      {"mobil.politeness", FIELD(double, c.driver.mobil.politeness)},
      {"mobil.accel_gain_threshold", FIELD(double, c.driver.mobil.accel_gain_threshold)},
      {"mobil.safe_decel_limit", FIELD(double, c.driver.mobil.safe_decel_limit)},
      {"lane_tracking.offset_gain", FIELD(double, c.driver.gains.offset)},
      {"lane_tracking.heading_gain", FIELD(double, c.driver.gains.heading)},
      {"controller_noise.sigma_accel", FIELD(double, c.noise.sigma_accel)},
      {"controller_noise.sigma_turn_rate", FIELD(double, c.noise.sigma_turn_rate)},

      {"ekf.measurement_sigma", FIELD(double, c.ekf.measurement_sigma)},
      {"ekf.accel_sigma", FIELD(double, c.ekf.accel_sigma)},
      {"ekf.yaw_rate_sigma", FIELD(double, c.ekf.yaw_rate_sigma)},

      {"expert.episodes", FIELD(std::size_t, c.expert_episodes)},
      {"expert.heldout_fraction", FIELD(double, c.heldout_fraction)},
      {"features.normalizer_episodes", FIELD(std::size_t, c.normalizer_episodes)},

      {"bc.epochs", FIELD(int, c.bc.epochs)},
      {"bc.step_size", FIELD(double, c.bc.step_size)},
      {"bc.minibatch", FIELD(int, c.bc.minibatch)},
      {"bc.sequence_batch", FIELD(int, c.bc.sequence_batch)},
      {"bc.bptt_length", FIELD(int, c.bc.bptt_length)},

      {"trpo.gamma", FIELD(double, c.trpo.gamma)},
      {"trpo.lambda", FIELD(double, c.trpo.lambda)},
      {"trpo.kl_step", FIELD(double, c.trpo.kl_step)},
      {"trpo.cg_iters", FIELD(int, c.trpo.cg_iters)},
      {"trpo.cg_damping", FIELD(double, c.trpo.cg_damping)},
      {"trpo.backtrack_ratio", FIELD(double, c.trpo.backtrack_ratio)},
      {"trpo.backtrack_steps", FIELD(int, c.trpo.backtrack_steps)},
      {"trpo.batch_steps", FIELD(int, c.trpo.batch_steps)},
      {"trpo.fisher_subsample", FIELD(double, c.trpo.fisher_subsample)},

      {"gail.iterations", FIELD(int, c.gail.iterations)},
      {"gail.expert_batch", FIELD(std::size_t, c.gail.expert_batch)},
      {"gail.reward_min", FIELD(double, c.gail.reward_min)},
      {"gail.reward_max", FIELD(double, c.gail.reward_max)},
      {"gail.checkpoint_every", FIELD(int, c.gail.checkpoint_every)},
      {"gail.disc_step_size", FIELD(double, c.gail.disc.step_size)},
      {"gail.disc_epochs", FIELD(int, c.gail.disc.epochs)},
      {"gail.disc_minibatch", FIELD(int, c.gail.disc.minibatch)},

      {"baselines.mr_components", FIELD(int, c.mr.k)},
      {"baselines.mr_max_features", FIELD(std::size_t, c.mr.max_features)},
      {"baselines.mr_max_samples", FIELD(std::size_t, c.mr.max_samples)},
      {"baselines.em_iterations", FIELD(int, c.mr.em.max_iters)},
      {"baselines.em_tol", FIELD(double, c.mr.em.tol)},
      {"baselines.em_ridge", FIELD(double, c.mr.em.ridge)},

      {"metrics.scenes", FIELD(std::size_t, c.metrics.scenes)},
      {"metrics.repeats", FIELD(int, c.metrics.repeats)},
      {"metrics.horizons", bind_list([](RunConfig& c) -> std::vector<double>& { return c.metrics.rwse.horizons; })},

      {"synth.lanes", FIELD(int, c.synth.lanes)},
      {"synth.length", FIELD(double, c.synth.length)},
      {"synth.warmup", FIELD(double, c.synth.warmup)},
      {"synth.duration", FIELD(double, c.synth.duration)},
      {"synth.inflow", FIELD(double, c.synth.inflow)},
      {"synth.lane_speeds", bind_list([](RunConfig& c) -> std::vector<double>& { return c.synth.lane_speeds; })},
      {"synth.speed_sigma", FIELD(double, c.synth.speed_sigma)},
      {"synth.truck_fraction", FIELD(double, c.synth.truck_fraction)},
      {"synth.position_noise", FIELD(double, c.synth.position_noise)},
      {"synth.offset_gain", FIELD(double, c.synth.gains.offset)},
      {"synth.heading_gain", FIELD(double, c.synth.gains.heading)},
  };
  return table;
}

#undef FIELD

const Binding& find_binding(const std::string& key) {
  for (const auto& [k, b] : bindings()) {
    if (k == key) return b;
  }
  throw Error(ErrorCode::kConfigError, "unknown configuration key '" + key + "'");
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kConfigError, what);
  };
  require(c.sim.dt > 0.0 && c.sim.horizon >= 1, "sim.dt must be positive and sim.horizon >= 1");
  require(c.sim.bounds.accel_min < c.sim.bounds.accel_max, "sim.accel_min must be below sim.accel_max");
  require(c.sim.bounds.turn_rate_min < c.sim.bounds.turn_rate_max, "sim.turn_rate_min must be below sim.turn_rate_max");
  require(c.lane_width > 0.0, "roadway.lane_width must be positive");
  require(c.heldout_fraction >= 0.0 && c.heldout_fraction < 1.0, "expert.heldout_fraction must be in [0, 1)");
  require(c.trpo.kl_step > 0.0 && c.trpo.cg_iters >= 1 && c.trpo.batch_steps >= 1, "invalid trpo settings");
  require(c.trpo.fisher_subsample > 0.0 && c.trpo.fisher_subsample <= 1.0, "trpo.fisher_subsample must be in (0, 1]");
  require(c.gail.reward_min <= c.gail.reward_max, "gail.reward_min must not exceed gail.reward_max");
  require(c.bc.minibatch >= 1 && c.bc.sequence_batch >= 1 && c.bc.bptt_length >= 1, "invalid bc batch settings");
  require(c.mr.k >= 1, "baselines.mr_components must be >= 1");
  require(c.metrics.repeats >= 1 && c.metrics.scenes >= 1, "metrics.scenes and metrics.repeats must be >= 1");
  require(!c.metrics.rwse.horizons.empty(), "metrics.horizons must not be empty");
  require(static_cast<int>(c.synth.lane_speeds.size()) == c.synth.lanes, "synth.lane_speeds needs one value per lane");
}

}  // namespace

std::filesystem::path RunConfig::data_dir() const { return data.empty() ? output / "data" : data; }

unsigned RunConfig::effective_jobs() const {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

SimConfig RunConfig::sim_config() const {
  SimConfig s = sim;
  s.emergency_idm = driver.idm;
  s.lane_gains = driver.gains;
  return s;
}

IdmMobilParams RunConfig::driver_params() const {
  IdmMobilParams p = driver;
  p.bounds = sim.bounds;
  return p;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig s = synth;
  s.lane_width = lane_width;
  s.dt = kFrameDt;
  s.driver = driver_params();
  s.noise = noise;
  s.seed = derive_seed(seed, {0x5e7});
  return s;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    find_binding(key).set(cfg, value);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kConfigError) throw;
    const std::string msg = e.what();
    if (msg.find("unknown configuration key") != std::string::npos) throw;
    throw Error(ErrorCode::kConfigError, key + " = '" + value + "' is not a valid value");
  }
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return find_binding(key).get(cfg); }

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, b] : bindings()) keys.push_back(k);
  return keys;
}

RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (file) {
    if (!std::filesystem::exists(*file)) throw Error(ErrorCode::kConfigError, "config file not found: " + file->string());
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorCode::kConfigError, e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw Error(ErrorCode::kConfigError, "key '" + section + "' is outside any section");
      for (const auto& [key, value] : body) set_config_value(cfg, section + "." + key, value.data());
    }
  }
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
    cfg.output = env;
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfigError, "override '" + o + "' is not section.key=value");
    const std::string key = boost::trim_copy(o.substr(0, eq));
    set_config_value(cfg, key, o.substr(eq + 1));
  }
  validate(cfg);
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, b] : bindings()) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    out << key.substr(dot + 1) << " = " << b.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace driveimit
