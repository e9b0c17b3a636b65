#pragma once

// Driving models that can control the ego inside the simulator.

#include <memory>

#include "driveimit/baselines.hpp"
#include "driveimit/net.hpp"
#include "driveimit/simenv.hpp"

namespace driveimit {

class NeuralPolicy final : public Policy {
 public:
  NeuralPolicy(std::shared_ptr<const GaussianPolicyNet> net, std::string name)
      : net_(std::move(net)), name_(std::move(name)) {}
  std::unique_ptr<Policy> clone() const override { return std::make_unique<NeuralPolicy>(*this); }
  std::string name() const override { return name_; }
  void reset(const Env& env) override;
  PolicyOutput act(const Env& env, const FeatureVector& obs, Rng& rng) override;
  const GaussianPolicyNet& net() const { return *net_; }

 private:
  std::shared_ptr<const GaussianPolicyNet> net_;
  std::string name_;
  std::vector<double> hidden_;
};

class SgPolicy final : public Policy {
 public:
  SgPolicy(StaticGaussian g, std::string name = "sg");
  std::unique_ptr<Policy> clone() const override { return std::make_unique<SgPolicy>(*this); }
  std::string name() const override { return name_; }
  PolicyOutput act(const Env& env, const FeatureVector& obs, Rng& rng) override;
  const StaticGaussian& model() const { return g_; }

 private:
  StaticGaussian g_;
  Eigen::Matrix2d chol_;
  double log_norm_ = 0.0;
  std::string name_;
};

// Draws a component by its conditional weight, then an action from it.
class MrPolicy final : public Policy {
 public:
  explicit MrPolicy(std::shared_ptr<const MixtureRegression> mr, std::string name = "mr")
      : mr_(std::move(mr)), name_(std::move(name)) {}
  std::unique_ptr<Policy> clone() const override { return std::make_unique<MrPolicy>(*this); }
  std::string name() const override { return name_; }
  PolicyOutput act(const Env& env, const FeatureVector& obs, Rng& rng) override;
  const MixtureRegression& model() const { return *mr_; }

 private:
  std::shared_ptr<const MixtureRegression> mr_;
  std::string name_;
};

// IDM along the current lane, MOBIL lane selection, proportional lane
// tracking and Gaussian noise. The desired speed is the ego's speed at the
// start of the episode; a chosen target lane is held until it is reached.
class IdmMobilPolicy final : public Policy {
 public:
  IdmMobilPolicy(IdmMobilParams params, ControllerNoise noise) : params_(params), noise_(noise) {}
  std::unique_ptr<Policy> clone() const override { return std::make_unique<IdmMobilPolicy>(*this); }
  std::string name() const override { return "idm-mobil"; }
  void reset(const Env& env) override;
  PolicyOutput act(const Env& env, const FeatureVector& obs, Rng& rng) override;

 private:
  IdmMobilParams params_;
  ControllerNoise noise_;
  int target_lane_ = 0;
};

// The recorded ego itself.
class ReplayPolicy final : public Policy {
 public:
  std::unique_ptr<Policy> clone() const override { return std::make_unique<ReplayPolicy>(*this); }
  std::string name() const override { return "replay"; }
  PolicyOutput act(const Env&, const FeatureVector&, Rng&) override { return {}; }
  bool replays_recorded_ego() const override { return true; }
};

// MOBIL context for a vehicle at `proj` among `others`.
MobilContext mobil_context(const Roadway& roadway, const FrenetProjection& proj, double speed,
                           double length, std::span<const ProjectedParticipant> others);

}  // namespace driveimit
