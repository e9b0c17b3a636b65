#include "driveimit/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "driveimit/error.hpp"
#include "driveimit/model_io.hpp"
#include "driveimit/policies.hpp"

namespace driveimit {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSmoothed = "smoothed.csv";
constexpr const char* kVehicles = "vehicles.csv";
constexpr const char* kCenterlines = "centerlines.csv";
constexpr const char* kFeatureStats = "feature_stats.csv";

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw Error(ErrorCode::kConfigError, what + " path is not set");
  if (!fs::exists(p)) throw Error(ErrorCode::kIoError, what + " not found: " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

}  // namespace

PreparedData load_prepared(const fs::path& dir, double lane_width) {
  for (const char* f : {kSmoothed, kVehicles, kCenterlines, kFeatureStats}) require_file(dir / f, "dataset file");
  Roadway road = load_centerlines(dir / kCenterlines, lane_width);
  std::vector<Trajectory> trajs = load_smoothed(dir / kSmoothed, dir / kVehicles);
  PreparedData p;
  p.data = std::make_shared<const Dataset>(std::move(road), std::move(trajs));
  p.normalizer = FeatureNormalizer::load(dir / kFeatureStats);
  return p;
}

PreparedData prepare_dataset(const Roadway& roadway, std::span<const RawTrajectory> raw, const RunConfig& cfg,
                             const fs::path& dir, std::ostream& log) {
  const std::vector<RawTrajectory> cars = filter_cars(raw);
  log << "ingest: " << raw.size() << " trajectories, " << cars.size() << " cars\n";
  // Other classes stay in the scene as traffic; only their class keeps them
  // from being egos.
  std::vector<Trajectory> smoothed = ekf_smooth_all(raw, cfg.ekf, cfg.effective_jobs());
  fs::create_directories(dir);
  save_smoothed(dir / kSmoothed, smoothed);
  save_vehicles(dir / kVehicles, smoothed);
  save_centerlines(dir / kCenterlines, roadway);

  PreparedData p;
  p.data = std::make_shared<const Dataset>(roadway, std::move(smoothed));
  Env env(p.data, cfg.sim_config());
  Rng rng = make_rng(cfg.seed, {0xfea7});
  const std::vector<Scene> scenes = expert_scenes(*p.data, cfg.sim.horizon, cfg.normalizer_episodes, rng);
  if (scenes.empty()) throw Error(ErrorCode::kNoEligibleScene, "no complete expert window in the dataset");
  std::vector<FeatureVector> samples;
  for (const auto& ep : extract_expert(env, scenes)) samples.insert(samples.end(), ep.raw_obs.begin(), ep.raw_obs.end());
  p.normalizer = FeatureNormalizer::fit(samples);
  p.normalizer.save(dir / kFeatureStats);
  log << "ingest: " << p.data->index().total_states() << " states, feature stats from " << samples.size()
      << " samples -> " << dir.string() << '\n';
  return p;
}

ExpertSplit load_expert(const PreparedData& prepared, const RunConfig& cfg) {
  Rng rng = make_rng(cfg.seed, {0xe7});
  std::vector<Scene> scenes = expert_scenes(*prepared.data, cfg.sim.horizon, cfg.expert_episodes, rng);
  if (scenes.empty()) throw Error(ErrorCode::kNoEligibleScene, "no complete expert window in the dataset");
  std::shuffle(scenes.begin(), scenes.end(), rng);
  auto heldout = static_cast<std::size_t>(cfg.heldout_fraction * static_cast<double>(scenes.size()));
  if (scenes.size() < 2) heldout = 0;
  Env env(prepared.data, cfg.sim_config(), prepared.normalizer);
  ExpertSplit split;
  const std::span<const Scene> all(scenes);
  split.heldout = extract_expert(env, all.first(heldout));
  split.train = extract_expert(env, all.subspan(heldout));
  if (split.train.empty()) throw Error(ErrorCode::kNoEligibleScene, "no expert training episode");
  return split;
}

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string output;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned jobs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override a configuration value (section.key=value)")->allow_extra_args(false);
  cmd->add_option("-o,--output", c.output, "Output directory");
  cmd->add_option("--seed", c.seed, "Master seed")->each([&c](const std::string&) { c.seed_given = true; });
  cmd->add_option("-j,--jobs", c.jobs, "Worker threads (default: available parallelism)");
}

RunConfig resolve(const Common& c) {
  std::optional<fs::path> file;
  if (!c.config_file.empty()) file = c.config_file;
  std::vector<std::string> sets = c.sets;
  if (!c.output.empty()) sets.push_back("paths.output=" + c.output);
  if (c.seed_given) sets.push_back("run.seed=" + std::to_string(c.seed));
  if (c.jobs > 0) sets.push_back("run.jobs=" + std::to_string(c.jobs));
  return load_config(file, sets);
}

std::string model_name(const std::string& method, PolicyArch arch) {
  return method + "-" + std::string(policy_arch_name(arch));
}

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  Stopwatch sw;
  const SynthResult s = synthesize_traffic(cfg.synth_config());
  const fs::path dir = cfg.output / "synth";
  fs::create_directories(dir);
  save_trajectories(dir / "trajectories.csv", s.trajectories);
  save_centerlines(dir / kCenterlines, s.roadway);
  log << "synth-expert: " << s.trajectories.size() << " vehicles, " << s.collisions << " collisions -> "
      << dir.string() << '\n';
  const PreparedData p = prepare_dataset(s.roadway, s.trajectories, cfg, cfg.data_dir(), log);
  Rng rng = make_rng(cfg.seed, {0xe7});
  log << "synth-expert: " << expert_scenes(*p.data, cfg.sim.horizon, 0, rng).size()
      << " expert windows available (" << sw.seconds() << " s)\n";
}

void cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  require_file(cfg.trajectories, "trajectory file");
  require_file(cfg.centerlines, "centerline file");
  const Roadway road = load_centerlines(cfg.centerlines, cfg.lane_width);
  const std::vector<RawTrajectory> raw = load_trajectories(cfg.trajectories);
  prepare_dataset(road, raw, cfg, cfg.data_dir(), log);
}

void save_bc_history(const fs::path& path, std::span<const BcEpoch> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(10);
  out << "epoch,train_nll,heldout_nll,step_size,reverted\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i + 1 << ',' << rows[i].train_nll << ',' << rows[i].heldout_nll << ',' << rows[i].step_size << ','
        << (rows[i].reverted ? 1 : 0) << '\n';
  }
}

void cmd_train(const RunConfig& cfg, const std::string& method, const std::string& arch_name,
               const std::string& init, std::ostream& log) {
  Stopwatch sw;
  const PolicyArch arch = parse_policy_arch(arch_name);
  const PreparedData prepared = load_prepared(cfg.data_dir(), cfg.lane_width);
  const ExpertSplit expert = load_expert(prepared, cfg);
  const std::vector<StateAction> pairs = flatten_pairs(expert.train);
  log << "train " << method << ": " << expert.train.size() << " expert episodes (" << pairs.size() << " pairs), "
      << expert.heldout.size() << " held out\n";

  PolicyArchitecture pa;
  pa.arch = arch;
  GaussianPolicyNet net(pa, derive_seed(cfg.seed, {0x7e7, static_cast<std::uint64_t>(arch)}));
  net.set_scaling(action_scaling_from(pairs));
  if (!init.empty()) {
    require_file(init, "initial model");
    net = load_policy(init, pa).net;
  }
  const fs::path models = cfg.output / "models";
  fs::create_directories(models);
  const std::string name = model_name(method, arch);
  const std::string stats = fs::absolute(cfg.data_dir() / kFeatureStats).lexically_normal().string();

  if (method == "bc") {
    Rng rng = make_rng(cfg.seed, {0xbc, static_cast<std::uint64_t>(arch)});
    const std::vector<BcEpoch> hist = bc_train(net, expert.train, expert.heldout, cfg.bc, rng);
    save_bc_history(models / (name + "_history.csv"), hist);
    if (!hist.empty()) {
      log << "train bc: final train nll " << hist.back().train_nll << ", held-out nll " << hist.back().heldout_nll
          << '\n';
    }
  } else {
    DiscriminatorNet disc(derive_seed(cfg.seed, {0xd15c}));
    disc.set_scaling(net.scaling());
    GailConfig gail = cfg.gail;
    gail.jobs = cfg.effective_jobs();
    const CheckpointFn checkpoint = [&](int iter, const GaussianPolicyNet& n) {
      save_policy(models / (name + "_iter" + std::to_string(iter + 1) + ".json"), n, name, stats);
    };
    const std::vector<GailHistoryRow> hist = gail_train(net, disc, prepared.data, cfg.sim_config(),
                                                        prepared.normalizer, expert.train, gail, cfg.trpo,
                                                        derive_seed(cfg.seed, {0x9a11}), checkpoint);
    save_history_csv(models / (name + "_history.csv"), hist);
    save_discriminator(models / (name + "_disc.json"), disc);
    if (!hist.empty()) {
      log << "train gail: final V " << hist.back().v << ", mean length " << hist.back().mean_len << ", nll "
          << hist.back().nll << '\n';
    }
  }
  save_policy(models / (name + ".json"), net, name, stats);
  log << "train " << method << ": wrote " << (models / (name + ".json")).string() << " (" << sw.seconds()
      << " s)\n";
}

void cmd_fit(const RunConfig& cfg, const std::string& which, std::ostream& log) {
  const PreparedData prepared = load_prepared(cfg.data_dir(), cfg.lane_width);
  const ExpertSplit expert = load_expert(prepared, cfg);
  std::vector<FeatureVector> obs;
  std::vector<DriveAction> actions;
  for (const auto& ep : expert.train) {
    obs.insert(obs.end(), ep.obs.begin(), ep.obs.end());
    actions.insert(actions.end(), ep.actions.begin(), ep.actions.end());
  }
  const fs::path models = cfg.output / "models";
  fs::create_directories(models);
  if (which == "sg") {
    const StaticGaussian g = fit_static_gaussian(actions);
    save_static_gaussian(models / "sg.json", g);
    log << "fit sg: mean (" << g.mu(0) << ", " << g.mu(1) << ") from " << actions.size() << " actions\n";
  } else {
    const MixtureRegression mr = fit_mixture_regression(obs, actions, cfg.mr, derive_seed(cfg.seed, {0x3a}));
    save_mixture(models / "mr.json", mr);
    log << "fit mr: " << mr.components.size() << " components on features";
    for (std::size_t f : mr.features) log << ' ' << f;
    log << '\n';
  }
}

std::unique_ptr<Policy> resolve_model(const std::string& model, const RunConfig& cfg, const fs::path& data_stats,
                                      std::ostream& log) {
  if (model == "idm-mobil") return std::make_unique<IdmMobilPolicy>(cfg.driver_params(), cfg.noise);
  if (model == "replay") return std::make_unique<ReplayPolicy>();
  require_file(model, "model");
  std::string stats;
  auto p = load_model_policy(model, &stats);
  if (!stats.empty()) {
    std::error_code ec;
    if (!fs::equivalent(stats, data_stats, ec)) {
      log << "warning: " << model << " was trained with feature stats " << stats << '\n';
    }
  }
  return p;
}

void cmd_rollout(const RunConfig& cfg, const std::string& model, std::size_t episodes, std::ostream& log) {
  const PreparedData prepared = load_prepared(cfg.data_dir(), cfg.lane_width);
  const auto policy = resolve_model(model, cfg, cfg.data_dir() / kFeatureStats, log);
  Env env(prepared.data, cfg.sim_config(), prepared.normalizer);
  const std::vector<Scene> scenes = sample_scenes(env, episodes, derive_seed(cfg.seed, {0x20}));
  const fs::path dir = cfg.output / "rollouts" / policy->name();
  fs::create_directories(dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Rng rng = make_rng(cfg.seed, {0x20, i});
    auto p = policy->clone();
    const EpisodeRollout ro = rollout(*p, env, scenes[i], rng);
    std::ostringstream file;
    file << "episode_" << std::setw(4) << std::setfill('0') << i << ".csv";
    save_rollout_csv(dir / file.str(), ro);
    log << "rollout " << i << ": scene (" << scenes[i].frame << ", " << scenes[i].ego_id << "), "
        << ro.length() << " steps, " << termination_name(ro.termination) << '\n';
  }
}

void cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& specs, std::ostream& log) {
  Stopwatch sw;
  const PreparedData prepared = load_prepared(cfg.data_dir(), cfg.lane_width);
  std::vector<std::unique_ptr<Policy>> owned;
  std::vector<const Policy*> models;
  for (const auto& s : specs) {
    owned.push_back(resolve_model(s, cfg, cfg.data_dir() / kFeatureStats, log));
    models.push_back(owned.back().get());
  }
  CampaignConfig cc = cfg.metrics;
  cc.seed = derive_seed(cfg.seed, {0xe7a1});
  cc.jobs = cfg.effective_jobs();
  const CampaignReport report = run_campaign(models, prepared.data, cfg.sim_config(), prepared.normalizer, cc);
  const fs::path dir = cfg.output / "evaluation";
  write_report(dir, report);
  for (const auto& m : report.models) {
    log << "evaluate " << m.name << ": collision " << m.emergent.collision_rate << ", offroad "
        << m.emergent.offroad_duration << ", position RWSE";
    for (std::size_t h = 0; h < report.horizons.size(); ++h) {
      log << ' ' << report.horizons[h] << "s=" << m.rwse.at(RwseVariable::kPosition)[h];
    }
    log << '\n';
  }
  log << "evaluate: " << report.scenes.size() << " scenes -> " << dir.string() << " (" << sw.seconds() << " s)\n";
}

void cmd_report(const RunConfig& cfg, const std::string& evaluation, std::ostream& log) {
  const fs::path src = evaluation.empty() ? cfg.output / "evaluation" / "evaluation.json" : fs::path(evaluation);
  require_file(src, "evaluation report");
  const CampaignReport report = parse_report_json(read_text(src));
  const fs::path dir = cfg.output / "report";
  write_report(dir, report);
  log << "report: " << report.models.size() << " models -> " << dir.string() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Driver behavior imitation workbench", "driveimit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  std::string method, arch = "mlp", init, which, model, evaluation;
  std::vector<std::string> models;
  std::size_t episodes = 10;

  auto* synth = app.add_subcommand("synth-expert", "Generate synthetic IDM+MOBIL traffic and ingest it");
  add_common(synth, common);

  auto* ingest = app.add_subcommand("ingest", "Load, filter, smooth and index a trajectory file");
  add_common(ingest, common);
  std::string traj_path, center_path;
  ingest->add_option("--trajectories", traj_path, "Trajectory CSV (vehicle_id,frame,class,length,width,x,y)");
  ingest->add_option("--centerlines", center_path, "Centerline CSV (lane,x,y)");

  auto* train = app.add_subcommand("train", "Train a neural driving policy");
  add_common(train, common);
  train->add_option("method", method, "bc or gail")->required()->check(CLI::IsMember({"bc", "gail"}));
  train->add_option("--arch", arch, "mlp or gru")->check(CLI::IsMember({"mlp", "gru"}));
  train->add_option("--init", init, "Start from this policy file");

  auto* fit = app.add_subcommand("fit", "Fit a baseline model");
  add_common(fit, common);
  fit->add_option("model", which, "sg or mr")->required()->check(CLI::IsMember({"sg", "mr"}));

  auto* roll = app.add_subcommand("rollout", "Roll out one model from sampled scenes");
  add_common(roll, common);
  roll->add_option("--model", model, "Model file, idm-mobil or replay")->required();
  roll->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("evaluate", "Validation campaign over shared scenes");
  add_common(eval, common);
  eval->add_option("--models", models, "Model files, idm-mobil or replay")->required();

  auto* report = app.add_subcommand("report", "Emit curve and table files from an evaluation");
  add_common(report, common);
  report->add_option("--evaluation", evaluation, "evaluation.json (default: <output>/evaluation)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    RunConfig cfg = resolve(common);
    if (!traj_path.empty()) cfg.trajectories = traj_path;
    if (!center_path.empty()) cfg.centerlines = center_path;
    if (synth->parsed()) cmd_synth(cfg, err);
    else if (ingest->parsed()) cmd_ingest(cfg, err);
    else if (train->parsed()) cmd_train(cfg, method, arch, init, err);
    else if (fit->parsed()) cmd_fit(cfg, which, err);
    else if (roll->parsed()) cmd_rollout(cfg, model, episodes, err);
    else if (eval->parsed()) cmd_evaluate(cfg, models, err);
    else if (report->parsed()) cmd_report(cfg, evaluation, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace driveimit
