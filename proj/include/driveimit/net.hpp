#pragma once

// Small differentiable networks in 64-bit arithmetic: dense ELU stacks, a GRU
// cell, the Gaussian driving policy and the state-action discriminator.
//
// Every layer offers three passes over a recorded forward cache: reverse mode
// (backward), and forward mode (jvp) for Fisher-vector products. Parameters of
// a network live in one flat ParamVector with named slices.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "driveimit/dynamics.hpp"
#include "driveimit/features.hpp"
#include "driveimit/rng.hpp"

namespace driveimit {

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class ParamVector {
 public:
  std::size_t add(std::string name, std::size_t size);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }
  const std::vector<ParamSlice>& slices() const { return slices_; }
  const ParamSlice* find(std::string_view name) const;

  void zero_grad();
  bool all_finite() const;

 private:
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<ParamSlice> slices_;
};

double elu(double x);
double elu_grad(double x);
double sigmoid(double x);

// Affine layers with ELU between them (and after the last one when
// `activate_last`).
class DenseStack {
 public:
  struct Cache {
    std::vector<std::vector<double>> pre;  // pre-activation of each layer
    std::vector<std::vector<double>> act;  // act[0] = input, act[L] = output
  };

  DenseStack() = default;
  DenseStack(ParamVector& params, const std::string& prefix, std::vector<std::size_t> sizes,
             bool activate_last);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  void forward(std::span<const double> params, std::span<const double> x, Cache& cache) const;
  // Accumulates dL/dparams into `grad`; writes dL/dx into `dx` when non-empty.
  void backward(std::span<const double> params, const Cache& cache, std::span<const double> dy,
                std::span<double> grad, std::span<double> dx) const;
  // Output tangent for parameter tangent `v` and input tangent `dx` (may be empty).
  void jvp(std::span<const double> params, const Cache& cache, std::span<const double> v,
           std::span<const double> dx, std::span<double> dy) const;
  void init(std::span<double> params, Rng& rng) const;

 private:
  struct Layer {
    std::size_t in = 0, out = 0, w = 0, b = 0;
  };
  std::vector<std::size_t> sizes_;
  std::vector<Layer> layers_;
  bool activate_last_ = true;
};

// h' = (1 - z) h + z tanh(W x + U (r h) + b), with z, r sigmoid gates.
class GruCell {
 public:
  struct Cache {
    std::vector<double> x, h, z, r, cand, rh;
  };

  GruCell() = default;
  GruCell(ParamVector& params, const std::string& prefix, std::size_t input, std::size_t hidden);

  std::size_t input_dim() const { return in_; }
  std::size_t hidden_dim() const { return hid_; }

  void forward(std::span<const double> params, std::span<const double> x, std::span<const double> h,
               Cache& cache, std::span<double> h_next) const;
  void backward(std::span<const double> params, const Cache& cache, std::span<const double> dh_next,
                std::span<double> grad, std::span<double> dx, std::span<double> dh) const;
  void jvp(std::span<const double> params, const Cache& cache, std::span<const double> v,
           std::span<const double> dx, std::span<const double> dh, std::span<double> dh_next) const;
  // Orthogonal recurrent matrices, uniform fan-in input matrices, zero biases.
  void init(std::span<double> params, Rng& rng) const;

 private:
  std::size_t in_ = 0, hid_ = 0;
  // Offsets of Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh.
  std::array<std::size_t, 9> off_{};
};

enum class PolicyArch { kMlp, kGru };
std::string_view policy_arch_name(PolicyArch a);
PolicyArch parse_policy_arch(std::string_view s);  // throws ConfigError

inline constexpr std::size_t kActionDim = 2;

// Fixed affine map between network units and physical action units.
struct ActionScaling {
  std::array<double, kActionDim> mean{0.0, 0.0};
  std::array<double, kActionDim> scale{1.0, 1.0};
};

struct GaussianActionDist {
  std::array<double, kActionDim> mu{};
  std::array<double, kActionDim> log_nu{};  // log of diagonal variance
};

inline constexpr double kLogNuMin = -10.0;
inline constexpr double kLogNuMax = 4.0;

double gaussian_log_prob(const GaussianActionDist& d, const DriveAction& a);
struct SampledAction {
  DriveAction action;
  double log_prob = 0.0;
};
SampledAction sample_and_logprob(const GaussianActionDist& d, Rng& rng);

// Gradient of (mu, log_nu) outputs: [dmu0, dmu1, dlognu0, dlognu1].
using DistGrad = std::array<double, 2 * kActionDim>;

struct PolicyArchitecture {
  PolicyArch arch = PolicyArch::kMlp;
  std::size_t input = kFeatureCount;
  std::vector<std::size_t> hidden{256, 128, 64, 48, 32};
  std::size_t core = 32;  // GRU units, or width of the extra dense layer
  bool operator==(const PolicyArchitecture&) const = default;
};

class GaussianPolicyNet;

// Forward record of one sequence, consumed by a single backward call.
class PolicyTrace {
 public:
  std::size_t steps() const { return outputs.size(); }
  const std::vector<GaussianActionDist>& dists() const { return outputs; }

 private:
  friend class GaussianPolicyNet;
  std::vector<DenseStack::Cache> trunk, core;
  std::vector<GruCell::Cache> gru;
  std::vector<DenseStack::Cache> head;
  std::vector<GaussianActionDist> outputs;
  std::vector<std::array<bool, kActionDim>> clamped;
  bool consumed = false;
};

class GaussianPolicyNet {
 public:
  GaussianPolicyNet(PolicyArchitecture arch, std::uint64_t seed);
  static GaussianPolicyNet make(PolicyArch arch, std::uint64_t seed) {
    PolicyArchitecture a;
    a.arch = arch;
    return GaussianPolicyNet(a, seed);
  }

  const PolicyArchitecture& architecture() const { return arch_; }
  PolicyArch arch() const { return arch_.arch; }
  std::size_t input_dim() const { return arch_.input; }
  std::size_t hidden_state_dim() const { return arch_.arch == PolicyArch::kGru ? arch_.core : 0; }

  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  const ActionScaling& scaling() const { return scaling_; }
  void set_scaling(const ActionScaling& s) { scaling_ = s; }

  // One step. `hidden` is resized and updated for GRU; ignored for MLP.
  GaussianActionDist step(std::span<const double> obs, std::vector<double>& hidden) const;

  // Unrolls a sequence from a zero hidden state (`obs` is steps x input).
  PolicyTrace forward_sequence(std::span<const double> obs) const;
  PolicyTrace forward_sequence(std::span<const FeatureVector> obs) const;
  // Continues from `hidden` (updated to the state after the last step).
  PolicyTrace forward_sequence(std::span<const double> obs, std::vector<double>& hidden) const;

  // Accumulates dL/dparams into params().grads(). Throws GraphReuse when the
  // trace was already consumed.
  void backward(PolicyTrace& trace, std::span<const DistGrad> d_out);
  // Same, into an external gradient buffer.
  void backward(PolicyTrace& trace, std::span<const DistGrad> d_out, std::span<double> grad) const;
  // Pullback that leaves the trace reusable (repeated Fisher products).
  void vjp(const PolicyTrace& trace, std::span<const DistGrad> d_out, std::span<double> grad) const;
  // Output tangents for a parameter tangent.
  std::vector<DistGrad> jvp(const PolicyTrace& trace, std::span<const double> tangent) const;

 private:
  GaussianActionDist head_to_dist(std::span<const double> raw, std::array<bool, kActionDim>& clamped) const;

  PolicyArchitecture arch_;
  ParamVector params_;
  DenseStack trunk_;
  DenseStack core_dense_;
  GruCell core_gru_;
  DenseStack head_;
  ActionScaling scaling_;
};

// D(s, a) = sigmoid(f(s, a)); inputs are the normalized observation and the
// action mapped through `scaling`.
class DiscriminatorNet {
 public:
  static constexpr double kClamp = 1e-6;

  explicit DiscriminatorNet(std::uint64_t seed, std::size_t obs_dim = kFeatureCount,
                            std::vector<std::size_t> hidden = {128, 128});

  std::size_t obs_dim() const { return obs_dim_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  const ActionScaling& scaling() const { return scaling_; }
  void set_scaling(const ActionScaling& s) { scaling_ = s; }

  double logit(std::span<const double> obs, const DriveAction& a, DenseStack::Cache& cache) const;
  // Clamped to [kClamp, 1 - kClamp].
  double forward(std::span<const double> obs, const DriveAction& a) const;
  void backward_logit(const DenseStack::Cache& cache, double dlogit, std::span<double> grad) const;

 private:
  std::size_t obs_dim_;
  std::vector<std::size_t> hidden_;
  ParamVector params_;
  DenseStack body_;
  ActionScaling scaling_;
};

class Adam {
 public:
  Adam(std::size_t n, double step_size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  // Descent step on `params` along `grad`.
  void step(std::span<double> params, std::span<const double> grad);
  double step_size() const { return lr_; }
  void set_step_size(double lr) { lr_ = lr; }

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace driveimit
