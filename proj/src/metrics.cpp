#include "driveimit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "driveimit/error.hpp"
#include "driveimit/parallel.hpp"
#include "driveimit/policies.hpp"

namespace driveimit {

double rwse(std::span<const std::vector<double>> errors) {
  if (errors.empty()) throw Error(ErrorCode::kMisalignedSamples, "no trajectories");
  const std::size_t n = errors[0].size();
  if (n == 0) throw Error(ErrorCode::kMisalignedSamples, "no samples");
  double sum = 0.0;
  for (const auto& row : errors) {
    if (row.size() != n) throw Error(ErrorCode::kMisalignedSamples, "trajectories carry different sample counts");
    for (double e : row) sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(errors.size() * n));
}

std::string_view rwse_variable_name(RwseVariable v) {
  switch (v) {
    case RwseVariable::kPosition: return "position";
    case RwseVariable::kLaneOffset: return "lane_offset";
    case RwseVariable::kSpeed: return "speed";
  }
  return "position";
}

RwseTable rwse_table(const Dataset& data, const SimConfig& sim, std::span<const Scene> scenes,
                     std::span<const std::vector<EpisodeRollout>> sims, const RwseConfig& cfg) {
  if (scenes.size() != sims.size()) throw Error(ErrorCode::kMisalignedSamples, "one rollout set per scene required");
  RwseTable table;
  for (RwseVariable v : {RwseVariable::kPosition, RwseVariable::kLaneOffset, RwseVariable::kSpeed}) {
    table[v].assign(cfg.horizons.size(), 0.0);
  }
  for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
    const auto k = static_cast<std::size_t>(
        std::clamp<long>(std::lround(cfg.horizons[h] / sim.dt), 0, static_cast<long>(sim.horizon)));
    std::vector<std::vector<double>> pos(scenes.size()), off(scenes.size()), spd(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const Trajectory* tr = data.find(scenes[i].ego_id);
      if (tr == nullptr) throw Error(ErrorCode::kMisalignedSamples, "scene ego not in dataset");
      const int frame = std::min(scenes[i].frame + static_cast<int>(k), tr->last_frame());
      const VehicleState& truth = tr->at_frame(frame);
      const double truth_t = project_to_frenet(data.roadway(), {truth.x, truth.y}, truth.heading).t;
      for (const auto& ro : sims[i]) {
        const VehicleState& s = ro.state_at(k);
        pos[i].push_back(std::hypot(s.x - truth.x, s.y - truth.y));
        off[i].push_back(ro.info_at(k).proj.t - truth_t);
        spd[i].push_back(s.speed - truth.speed);
      }
    }
    table[RwseVariable::kPosition][h] = rwse(pos);
    table[RwseVariable::kLaneOffset][h] = rwse(off);
    table[RwseVariable::kSpeed][h] = rwse(spd);
  }
  return table;
}

Histogram::Histogram(double lo, double hi, std::size_t bins) : lo_(lo), hi_(hi), counts_(bins, 0) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi) || bins == 0) {
    throw Error(ErrorCode::kRangeMismatch, "histogram range must be finite and non-empty");
  }
}

void Histogram::add(double x) {
  if (std::isnan(x)) return;
  const double u = (x - lo_) / (hi_ - lo_) * static_cast<double>(counts_.size());
  const auto last = static_cast<double>(counts_.size() - 1);
  const auto bin = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, last));
  ++counts_[bin];
  ++total_;
}

double kl_from_counts(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw Error(ErrorCode::kRangeMismatch, "bin counts differ");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  const double bins = static_cast<double>(p.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = ((sp > 0.0 ? p[i] / sp : 0.0) + kKlSmoothing) / (1.0 + bins * kKlSmoothing);
    const double qi = ((sq > 0.0 ? q[i] / sq : 0.0) + kKlSmoothing) / (1.0 + bins * kKlSmoothing);
    kl += pi * std::log(pi / qi);
  }
  return std::max(0.0, kl);
}

double kl_divergence(const Histogram& real, const Histogram& sim) {
  if (real.lo() != sim.lo() || real.hi() != sim.hi() || real.bins() != sim.bins()) {
    throw Error(ErrorCode::kRangeMismatch, "histograms have different ranges");
  }
  const std::vector<double> p(real.counts().begin(), real.counts().end());
  const std::vector<double> q(sim.counts().begin(), sim.counts().end());
  return kl_from_counts(p, q);
}

double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) throw Error(ErrorCode::kTooFewSamples, "percentile of an empty set");
  std::sort(xs.begin(), xs.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(xs.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, xs.size() - 1);
  return xs[i] + (pos - static_cast<double>(i)) * (xs[j] - xs[i]);
}

int count_lane_changes(std::span<const int> lanes, int debounce) {
  if (lanes.empty()) return 0;
  int current = lanes[0];
  int candidate = current;
  int run = 0;
  int changes = 0;
  for (int lane : lanes.subspan(1)) {
    if (lane == current) {
      run = 0;
      continue;
    }
    if (lane == candidate && run > 0) {
      ++run;
    } else {
      candidate = lane;
      run = 1;
    }
    if (run >= debounce) {
      ++changes;
      current = candidate;
      run = 0;
    }
  }
  return changes;
}

namespace {

template <class Fn>
void for_each_info(const EpisodeRollout& ro, Fn&& fn) {
  for (const auto& s : ro.steps) fn(s.info);
  fn(ro.final_info);
}

}  // namespace

EmergentReport emergent_metrics(std::span<const EpisodeRollout> rollouts) {
  EmergentReport r;
  if (rollouts.empty()) return r;
  double changes = 0.0, offroad = 0.0, collisions = 0.0, hard = 0.0;
  for (const auto& ro : rollouts) {
    std::vector<int> lanes;
    bool collided = false;
    for_each_info(ro, [&](const StepInfo& info) {
      lanes.push_back(info.proj.lane_index);
      offroad += info.offroad ? 1.0 : 0.0;
      collided = collided || info.colliding;
    });
    changes += count_lane_changes(lanes);
    collisions += collided ? 1.0 : 0.0;
    const bool braked = std::any_of(ro.steps.begin(), ro.steps.end(),
                                    [](const StepRecord& s) { return s.applied.accel < kHardBrakeAccel; });
    hard += braked ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(rollouts.size());
  r.lane_change_rate = changes / n;
  r.offroad_duration = offroad / n;
  r.collision_rate = collisions / n;
  r.hard_brake_rate = hard / n;
  return r;
}

std::vector<double> ittc_samples(std::span<const EpisodeRollout> rollouts) {
  std::vector<double> out;
  for (const auto& ro : rollouts) {
    for_each_info(ro, [&](const StepInfo& info) {
      if (info.leader && info.leader->gap > 0.0) out.push_back(std::max(0.0, info.leader->closing_speed) / info.leader->gap);
    });
  }
  return out;
}

std::string_view quantity_name(Quantity q) {
  switch (q) {
    case Quantity::kIttc: return "ittc";
    case Quantity::kSpeed: return "speed";
    case Quantity::kAccel: return "accel";
    case Quantity::kTurnRate: return "turn_rate";
    case Quantity::kJerk: return "jerk";
  }
  return "ittc";
}

std::vector<double> quantity_samples(std::span<const EpisodeRollout> rollouts, Quantity q, double dt) {
  if (q == Quantity::kIttc) return ittc_samples(rollouts);
  std::vector<double> out;
  for (const auto& ro : rollouts) {
    const std::size_t n = ro.length() + 1;
    std::vector<double> accel;
    for (std::size_t k = 0; k < n; ++k) {
      const VehicleState& s = ro.state_at(k);
      if (q == Quantity::kSpeed) out.push_back(s.speed);
      if (k + 1 >= n) continue;
      const VehicleState& s1 = ro.state_at(k + 1);
      if (q == Quantity::kTurnRate) out.push_back(wrap_angle(s1.heading - s.heading) / dt);
      accel.push_back((s1.speed - s.speed) / dt);
    }
    if (q == Quantity::kAccel) out.insert(out.end(), accel.begin(), accel.end());
    if (q == Quantity::kJerk) {
      for (std::size_t k = 0; k + 1 < accel.size(); ++k) out.push_back((accel[k + 1] - accel[k]) / dt);
    }
  }
  return out;
}

std::vector<Scene> sample_scenes(const Env& env, std::size_t count, std::uint64_t seed) {
  const auto& all = env.eligible_scenes();
  if (all.empty()) throw Error(ErrorCode::kNoEligibleScene, "no eligible scene in dataset");
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, {0xc0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(count, idx.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<Scene> out;
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

namespace {

std::vector<EpisodeRollout> flatten(const std::vector<std::vector<EpisodeRollout>>& nested) {
  std::vector<EpisodeRollout> out;
  for (const auto& v : nested) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<std::vector<EpisodeRollout>> run_model(const Policy& model, const Env& proto,
                                                   std::span<const Scene> scenes, int repeats,
                                                   std::uint64_t seed, unsigned jobs) {
  const std::size_t n = scenes.size() * static_cast<std::size_t>(repeats);
  std::vector<EpisodeRollout> flat(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<Env> envs(workers, proto);
  parallel_for_workers(n, workers, [&](std::size_t i, unsigned w) {
    const std::size_t scene = i / static_cast<std::size_t>(repeats);
    const std::size_t rep = i % static_cast<std::size_t>(repeats);
    auto pol = model.clone();
    Rng rng = make_rng(seed, {0x5e, scene, rep});
    flat[i] = rollout(*pol, envs[w], scenes[scene], rng);
  });
  std::vector<std::vector<EpisodeRollout>> out(scenes.size());
  for (std::size_t i = 0; i < n; ++i) out[i / static_cast<std::size_t>(repeats)].push_back(std::move(flat[i]));
  return out;
}

}  // namespace

CampaignReport run_campaign(std::span<const Policy* const> models, std::shared_ptr<const Dataset> data,
                            const SimConfig& sim, const FeatureNormalizer& normalizer, const CampaignConfig& cfg) {
  const Env proto(data, sim, normalizer);
  CampaignReport report;
  report.scenes = sample_scenes(proto, cfg.scenes, cfg.seed);
  report.horizons = cfg.rwse.horizons;

  const ReplayPolicy replay;
  const std::vector<EpisodeRollout> real = flatten(run_model(replay, proto, report.scenes, 1, cfg.seed, cfg.jobs));
  report.real = emergent_metrics(real);
  std::map<Quantity, Histogram> real_hist;
  for (Quantity q : kQuantities) {
    const std::vector<double> xs = quantity_samples(real, q, sim.dt);
    double lo = 0.0, hi = 1.0;
    if (!xs.empty()) {
      lo = percentile(xs, 0.1);
      hi = percentile(xs, 99.9);
      if (!(hi - lo > 1e-9)) {
        lo -= 0.5;
        hi += 0.5;
      }
    }
    report.ranges[q] = {lo, hi};
    Histogram h(lo, hi);
    h.add(xs);
    real_hist.emplace(q, h);
  }

  for (const Policy* model : models) {
    const auto nested = run_model(*model, proto, report.scenes, cfg.repeats, cfg.seed, cfg.jobs);
    const std::vector<EpisodeRollout> all = flatten(nested);
    ModelReport mr;
    mr.name = model->name();
    mr.rollouts = all.size();
    double len = 0.0;
    for (const auto& ro : all) {
      len += static_cast<double>(ro.length());
      ++mr.terminations[std::string(termination_name(ro.termination))];
    }
    mr.mean_length = all.empty() ? 0.0 : len / static_cast<double>(all.size());
    mr.rwse = rwse_table(*data, sim, report.scenes, nested, cfg.rwse);
    for (Quantity q : kQuantities) {
      Histogram h(report.ranges[q].first, report.ranges[q].second);
      h.add(quantity_samples(all, q, sim.dt));
      mr.kl[q] = kl_divergence(real_hist.at(q), h);
    }
    mr.emergent = emergent_metrics(all);
    report.models.push_back(std::move(mr));
  }
  return report;
}

namespace {

nlohmann::ordered_json emergent_json(const EmergentReport& e) {
  nlohmann::ordered_json j;
  j["lane_change_rate"] = e.lane_change_rate;
  j["offroad_duration"] = e.offroad_duration;
  j["collision_rate"] = e.collision_rate;
  j["hard_brake_rate"] = e.hard_brake_rate;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::string report_json(const CampaignReport& report) {
  nlohmann::ordered_json j;
  j["format"] = "driveimit-evaluation";
  j["version"] = 1;
  j["scenes"] = nlohmann::ordered_json::array();
  for (const auto& s : report.scenes) j["scenes"].push_back({{"frame", s.frame}, {"ego", s.ego_id}});
  j["horizons"] = report.horizons;
  for (const auto& [q, r] : report.ranges) j["ranges"][std::string(quantity_name(q))] = {r.first, r.second};
  j["real"]["emergent"] = emergent_json(report.real);
  j["models"] = nlohmann::ordered_json::array();
  for (const auto& m : report.models) {
    nlohmann::ordered_json mj;
    mj["name"] = m.name;
    mj["rollouts"] = m.rollouts;
    mj["mean_length"] = m.mean_length;
    for (const auto& [k, v] : m.terminations) mj["terminations"][k] = v;
    for (const auto& [v, curve] : m.rwse) mj["rwse"][std::string(rwse_variable_name(v))] = curve;
    for (const auto& [q, kl] : m.kl) mj["kl"][std::string(quantity_name(q))] = kl;
    mj["emergent"] = emergent_json(m.emergent);
    j["models"].push_back(std::move(mj));
  }
  return j.dump(2) + "\n";
}

CampaignReport parse_report_json(const std::string& text) {
  CampaignReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "driveimit-evaluation" || j.value("version", 0) != 1) {
      throw Error(ErrorCode::kParseError, "not an evaluation report");
    }
    auto emergent = [](const nlohmann::json& e) {
      return EmergentReport{e.at("lane_change_rate").get<double>(), e.at("offroad_duration").get<double>(),
                            e.at("collision_rate").get<double>(), e.at("hard_brake_rate").get<double>()};
    };
    for (const auto& s : j.at("scenes")) r.scenes.push_back({s.at("frame").get<int>(), s.at("ego").get<int>()});
    r.horizons = j.at("horizons").get<std::vector<double>>();
    for (Quantity q : kQuantities) {
      const auto& range = j.at("ranges").at(std::string(quantity_name(q)));
      r.ranges[q] = {range.at(0).get<double>(), range.at(1).get<double>()};
    }
    r.real = emergent(j.at("real").at("emergent"));
    for (const auto& mj : j.at("models")) {
      ModelReport m;
      m.name = mj.at("name").get<std::string>();
      m.rollouts = mj.at("rollouts").get<std::size_t>();
      m.mean_length = mj.at("mean_length").get<double>();
      if (mj.contains("terminations")) m.terminations = mj.at("terminations").get<std::map<std::string, int>>();
      for (RwseVariable v : {RwseVariable::kPosition, RwseVariable::kLaneOffset, RwseVariable::kSpeed}) {
        m.rwse[v] = mj.at("rwse").at(std::string(rwse_variable_name(v))).get<std::vector<double>>();
        if (m.rwse[v].size() != r.horizons.size()) throw Error(ErrorCode::kParseError, "rwse curve length");
      }
      for (Quantity q : kQuantities) m.kl[q] = mj.at("kl").at(std::string(quantity_name(q))).get<double>();
      m.emergent = emergent(mj.at("emergent"));
      r.models.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("evaluation report: ") + e.what());
  }
  return r;
}

void write_report(const std::filesystem::path& dir, const CampaignReport& report) {
  std::filesystem::create_directories(dir);
  write_text(dir / "evaluation.json", report_json(report));

  for (RwseVariable v : {RwseVariable::kPosition, RwseVariable::kLaneOffset, RwseVariable::kSpeed}) {
    std::ostringstream out;
    out.precision(10);
    out << "horizon";
    for (const auto& m : report.models) out << ',' << m.name;
    out << '\n';
    for (std::size_t h = 0; h < report.horizons.size(); ++h) {
      out << report.horizons[h];
      for (const auto& m : report.models) out << ',' << m.rwse.at(v)[h];
      out << '\n';
    }
    write_text(dir / ("rwse_" + std::string(rwse_variable_name(v)) + ".csv"), out.str());
  }

  std::ostringstream kl;
  kl.precision(10);
  kl << "model";
  for (Quantity q : kQuantities) kl << ',' << quantity_name(q);
  kl << '\n';
  for (const auto& m : report.models) {
    kl << m.name;
    for (Quantity q : kQuantities) kl << ',' << m.kl.at(q);
    kl << '\n';
  }
  write_text(dir / "kl_divergences.csv", kl.str());

  std::ostringstream em;
  em.precision(10);
  em << "model,lane_change_rate,offroad_duration,collision_rate,hard_brake_rate\n";
  auto row = [&](const std::string& name, const EmergentReport& e) {
    em << name << ',' << e.lane_change_rate << ',' << e.offroad_duration << ',' << e.collision_rate << ','
       << e.hard_brake_rate << '\n';
  };
  row("real", report.real);
  for (const auto& m : report.models) row(m.name, m.emergent);
  write_text(dir / "emergent_values.csv", em.str());
}

}  // namespace driveimit
