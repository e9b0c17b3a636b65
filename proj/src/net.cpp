#include "driveimit/net.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "driveimit/error.hpp"
#include "driveimit/kernels.hpp"

namespace driveimit {

std::size_t ParamVector::add(std::string name, std::size_t size) {
  const std::size_t off = values_.size();
  slices_.push_back({std::move(name), off, size});
  values_.resize(off + size, 0.0);
  grads_.resize(off + size, 0.0);
  return off;
}

const ParamSlice* ParamVector::find(std::string_view name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void ParamVector::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void uniform_fill(std::span<double> out, double limit, Rng& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& v : out) v = u(rng);
}

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": expected " + std::to_string(want) +
                                               ", got " + std::to_string(got));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DenseStack

DenseStack::DenseStack(ParamVector& params, const std::string& prefix, std::vector<std::size_t> sizes,
                       bool activate_last)
    : sizes_(std::move(sizes)), activate_last_(activate_last) {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    Layer layer;
    layer.in = sizes_[l];
    layer.out = sizes_[l + 1];
    layer.w = params.add(prefix + std::to_string(l) + ".w", layer.in * layer.out);
    layer.b = params.add(prefix + std::to_string(l) + ".b", layer.out);
    layers_.push_back(layer);
  }
}

void DenseStack::forward(std::span<const double> params, std::span<const double> x, Cache& cache) const {
  check_size(x.size(), input_dim(), "dense input");
  const std::size_t n = layers_.size();
  cache.pre.resize(n);
  cache.act.resize(n + 1);
  cache.act[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < n; ++l) {
    const Layer& L = layers_[l];
    auto& pre = cache.pre[l];
    auto& out = cache.act[l + 1];
    pre.resize(L.out);
    out.resize(L.out);
    kernels::gemv(params.data() + L.w, L.out, L.in, cache.act[l].data(), params.data() + L.b, pre.data());
    const bool activate = activate_last_ || l + 1 < n;
    for (std::size_t i = 0; i < L.out; ++i) out[i] = activate ? elu(pre[i]) : pre[i];
  }
}

void DenseStack::backward(std::span<const double> params, const Cache& cache, std::span<const double> dy,
                          std::span<double> grad, std::span<double> dx) const {
  const std::size_t n = layers_.size();
  std::vector<double> delta(dy.begin(), dy.end());
  std::vector<double> below;
  for (std::size_t l = n; l-- > 0;) {
    const Layer& L = layers_[l];
    const bool activate = activate_last_ || l + 1 < n;
    if (activate) {
      for (std::size_t i = 0; i < L.out; ++i) delta[i] *= elu_grad(cache.pre[l][i]);
    }
    kernels::ger_acc(L.out, L.in, delta.data(), cache.act[l].data(), grad.data() + L.w);
    kernels::axpy(1.0, delta.data(), grad.data() + L.b, L.out);
    if (l == 0 && dx.empty()) break;
    below.assign(L.in, 0.0);
    kernels::gemv_t_acc(params.data() + L.w, L.out, L.in, delta.data(), below.data());
    delta.swap(below);
  }
  if (!dx.empty()) std::copy(delta.begin(), delta.end(), dx.begin());
}

void DenseStack::jvp(std::span<const double> params, const Cache& cache, std::span<const double> v,
                     std::span<const double> dx, std::span<double> dy) const {
  const std::size_t n = layers_.size();
  std::vector<double> t(dx.begin(), dx.end());
  if (t.empty()) t.assign(input_dim(), 0.0);
  std::vector<double> next, tmp;
  for (std::size_t l = 0; l < n; ++l) {
    const Layer& L = layers_[l];
    next.resize(L.out);
    tmp.resize(L.out);
    kernels::gemv(params.data() + L.w, L.out, L.in, t.data(), v.data() + L.b, next.data());
    kernels::gemv(v.data() + L.w, L.out, L.in, cache.act[l].data(), nullptr, tmp.data());
    const bool activate = activate_last_ || l + 1 < n;
    for (std::size_t i = 0; i < L.out; ++i) {
      next[i] += tmp[i];
      if (activate) next[i] *= elu_grad(cache.pre[l][i]);
    }
    t.swap(next);
  }
  std::copy(t.begin(), t.end(), dy.begin());
}

void DenseStack::init(std::span<double> params, Rng& rng) const {
  for (const Layer& L : layers_) {
    uniform_fill(params.subspan(L.w, L.in * L.out), std::sqrt(3.0 / static_cast<double>(L.in)), rng);
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(L.b), L.out, 0.0);
  }
}

// ---------------------------------------------------------------------------
// GruCell

GruCell::GruCell(ParamVector& params, const std::string& prefix, std::size_t input, std::size_t hidden)
    : in_(input), hid_(hidden) {
  const char* gates[3] = {"z", "r", "h"};
  for (int g = 0; g < 3; ++g) {
    off_[3 * g] = params.add(prefix + "W" + gates[g], hid_ * in_);
    off_[3 * g + 1] = params.add(prefix + "U" + gates[g], hid_ * hid_);
    off_[3 * g + 2] = params.add(prefix + "b" + gates[g], hid_);
  }
}

void GruCell::forward(std::span<const double> p, std::span<const double> x, std::span<const double> h,
                      Cache& c, std::span<double> h_next) const {
  check_size(x.size(), in_, "gru input");
  check_size(h.size(), hid_, "gru hidden");
  c.x.assign(x.begin(), x.end());
  c.h.assign(h.begin(), h.end());
  c.z.resize(hid_);
  c.r.resize(hid_);
  c.cand.resize(hid_);
  c.rh.resize(hid_);
  std::vector<double> tmp(hid_);
  const double* P = p.data();
  // Update and reset gates.
  kernels::gemv(P + off_[0], hid_, in_, x.data(), P + off_[2], c.z.data());
  kernels::gemv(P + off_[1], hid_, hid_, h.data(), nullptr, tmp.data());
  for (std::size_t i = 0; i < hid_; ++i) c.z[i] = sigmoid(c.z[i] + tmp[i]);
  kernels::gemv(P + off_[3], hid_, in_, x.data(), P + off_[5], c.r.data());
  kernels::gemv(P + off_[4], hid_, hid_, h.data(), nullptr, tmp.data());
  for (std::size_t i = 0; i < hid_; ++i) {
    c.r[i] = sigmoid(c.r[i] + tmp[i]);
    c.rh[i] = c.r[i] * h[i];
  }
  kernels::gemv(P + off_[6], hid_, in_, x.data(), P + off_[8], c.cand.data());
  kernels::gemv(P + off_[7], hid_, hid_, c.rh.data(), nullptr, tmp.data());
  for (std::size_t i = 0; i < hid_; ++i) {
    c.cand[i] = std::tanh(c.cand[i] + tmp[i]);
    h_next[i] = (1.0 - c.z[i]) * h[i] + c.z[i] * c.cand[i];
  }
}

void GruCell::backward(std::span<const double> p, const Cache& c, std::span<const double> g,
                       std::span<double> grad, std::span<double> dx, std::span<double> dh) const {
  const double* P = p.data();
  double* G = grad.data();
  std::vector<double> da_z(hid_), da_r(hid_), da_c(hid_), drh(hid_, 0.0);
  std::vector<double> dh_acc(hid_), dx_acc(in_, 0.0);
  for (std::size_t i = 0; i < hid_; ++i) {
    const double dz = g[i] * (c.cand[i] - c.h[i]);
    const double dcand = g[i] * c.z[i];
    dh_acc[i] = g[i] * (1.0 - c.z[i]);
    da_c[i] = dcand * (1.0 - c.cand[i] * c.cand[i]);
    da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
  }
  kernels::ger_acc(hid_, in_, da_c.data(), c.x.data(), G + off_[6]);
  kernels::ger_acc(hid_, hid_, da_c.data(), c.rh.data(), G + off_[7]);
  kernels::axpy(1.0, da_c.data(), G + off_[8], hid_);
  kernels::gemv_t_acc(P + off_[7], hid_, hid_, da_c.data(), drh.data());
  kernels::gemv_t_acc(P + off_[6], hid_, in_, da_c.data(), dx_acc.data());
  for (std::size_t i = 0; i < hid_; ++i) {
    const double dr = drh[i] * c.h[i];
    dh_acc[i] += drh[i] * c.r[i];
    da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
  }
  kernels::ger_acc(hid_, in_, da_r.data(), c.x.data(), G + off_[3]);
  kernels::ger_acc(hid_, hid_, da_r.data(), c.h.data(), G + off_[4]);
  kernels::axpy(1.0, da_r.data(), G + off_[5], hid_);
  kernels::gemv_t_acc(P + off_[3], hid_, in_, da_r.data(), dx_acc.data());
  kernels::gemv_t_acc(P + off_[4], hid_, hid_, da_r.data(), dh_acc.data());

  kernels::ger_acc(hid_, in_, da_z.data(), c.x.data(), G + off_[0]);
  kernels::ger_acc(hid_, hid_, da_z.data(), c.h.data(), G + off_[1]);
  kernels::axpy(1.0, da_z.data(), G + off_[2], hid_);
  kernels::gemv_t_acc(P + off_[0], hid_, in_, da_z.data(), dx_acc.data());
  kernels::gemv_t_acc(P + off_[1], hid_, hid_, da_z.data(), dh_acc.data());

  if (!dx.empty()) std::copy(dx_acc.begin(), dx_acc.end(), dx.begin());
  if (!dh.empty()) std::copy(dh_acc.begin(), dh_acc.end(), dh.begin());
}

void GruCell::jvp(std::span<const double> p, const Cache& c, std::span<const double> v,
                  std::span<const double> dx, std::span<const double> dh, std::span<double> dh_next) const {
  const double* P = p.data();
  const double* V = v.data();
  std::vector<double> zero_x(in_, 0.0), zero_h(hid_, 0.0);
  const double* tx = dx.empty() ? zero_x.data() : dx.data();
  const double* th = dh.empty() ? zero_h.data() : dh.data();
  std::vector<double> a(hid_), b(hid_), dz(hid_), dr(hid_), drh(hid_);
  // d(pre) = W dx + dW x + U dh + dU h + db
  auto gate_tangent = [&](std::size_t W, std::size_t U, std::size_t B, const double* hin,
                          const double* thin, std::vector<double>& out) {
    kernels::gemv(P + W, hid_, in_, tx, V + B, out.data());
    kernels::gemv(V + W, hid_, in_, c.x.data(), nullptr, a.data());
    kernels::gemv(P + U, hid_, hid_, thin, nullptr, b.data());
    for (std::size_t i = 0; i < hid_; ++i) out[i] += a[i] + b[i];
    kernels::gemv(V + U, hid_, hid_, hin, nullptr, a.data());
    for (std::size_t i = 0; i < hid_; ++i) out[i] += a[i];
  };
  gate_tangent(off_[0], off_[1], off_[2], c.h.data(), th, dz);
  gate_tangent(off_[3], off_[4], off_[5], c.h.data(), th, dr);
  for (std::size_t i = 0; i < hid_; ++i) {
    dz[i] *= c.z[i] * (1.0 - c.z[i]);
    dr[i] *= c.r[i] * (1.0 - c.r[i]);
    drh[i] = dr[i] * c.h[i] + c.r[i] * th[i];
  }
  std::vector<double> dc(hid_);
  gate_tangent(off_[6], off_[7], off_[8], c.rh.data(), drh.data(), dc);
  for (std::size_t i = 0; i < hid_; ++i) {
    const double dcand = (1.0 - c.cand[i] * c.cand[i]) * dc[i];
    dh_next[i] = -dz[i] * c.h[i] + (1.0 - c.z[i]) * th[i] + dz[i] * c.cand[i] + c.z[i] * dcand;
  }
}

void GruCell::init(std::span<double> params, Rng& rng) const {
  const double lim = std::sqrt(3.0 / static_cast<double>(in_));
  for (int g = 0; g < 3; ++g) {
    uniform_fill(params.subspan(off_[3 * g], hid_ * in_), lim, rng);
    Eigen::MatrixXd m(hid_, hid_);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(hid_, hid_);
    for (std::size_t r = 0; r < hid_; ++r) {
      for (std::size_t col = 0; col < hid_; ++col) {
        params[off_[3 * g + 1] + r * hid_ + col] = q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col));
      }
    }
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(off_[3 * g + 2]), hid_, 0.0);
  }
}

// ---------------------------------------------------------------------------
// Gaussian action distribution

std::string_view policy_arch_name(PolicyArch a) { return a == PolicyArch::kGru ? "gru" : "mlp"; }

PolicyArch parse_policy_arch(std::string_view s) {
  if (s == "mlp") return PolicyArch::kMlp;
  if (s == "gru") return PolicyArch::kGru;
  throw Error(ErrorCode::kConfigError, "unknown architecture '" + std::string(s) + "'");
}

double gaussian_log_prob(const GaussianActionDist& d, const DriveAction& a) {
  const double x[2] = {a.accel, a.turn_rate};
  double lp = 0.0;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    const double nu = std::exp(d.log_nu[i]);
    const double diff = x[i] - d.mu[i];
    lp += -0.5 * diff * diff / nu - 0.5 * (std::log(2.0 * std::numbers::pi) + d.log_nu[i]);
  }
  return lp;
}

SampledAction sample_and_logprob(const GaussianActionDist& d, Rng& rng) {
  SampledAction s;
  s.action.accel = d.mu[0] + std::exp(0.5 * d.log_nu[0]) * standard_normal(rng);
  s.action.turn_rate = d.mu[1] + std::exp(0.5 * d.log_nu[1]) * standard_normal(rng);
  s.log_prob = gaussian_log_prob(d, s.action);
  return s;
}

// ---------------------------------------------------------------------------
// GaussianPolicyNet

GaussianPolicyNet::GaussianPolicyNet(PolicyArchitecture arch, std::uint64_t seed) : arch_(std::move(arch)) {
  if (arch_.hidden.empty()) throw Error(ErrorCode::kShapeMismatch, "policy needs hidden layers");
  std::vector<std::size_t> trunk_sizes{arch_.input};
  trunk_sizes.insert(trunk_sizes.end(), arch_.hidden.begin(), arch_.hidden.end());
  trunk_ = DenseStack(params_, "trunk", trunk_sizes, true);
  const std::size_t last = arch_.hidden.back();
  if (arch_.arch == PolicyArch::kGru) {
    core_gru_ = GruCell(params_, "gru.", last, arch_.core);
  } else {
    core_dense_ = DenseStack(params_, "core", {last, arch_.core}, true);
  }
  head_ = DenseStack(params_, "head", {arch_.core, 2 * kActionDim}, false);

  Rng rng(seed);
  auto p = params_.values();
  trunk_.init(p, rng);
  if (arch_.arch == PolicyArch::kGru) {
    core_gru_.init(p, rng);
  } else {
    core_dense_.init(p, rng);
  }
  head_.init(p, rng);
  const ParamSlice* hw = params_.find("head0.w");
  const ParamSlice* hb = params_.find("head0.b");
  for (std::size_t i = 0; i < hw->size; ++i) p[hw->offset + i] *= 0.01;
  for (std::size_t i = 0; i < kActionDim; ++i) p[hb->offset + kActionDim + i] = -1.0;
}

GaussianActionDist GaussianPolicyNet::head_to_dist(std::span<const double> raw,
                                                   std::array<bool, kActionDim>& clamped) const {
  GaussianActionDist d;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    d.mu[i] = scaling_.mean[i] + scaling_.scale[i] * raw[i];
    const double ln = raw[kActionDim + i] + 2.0 * std::log(scaling_.scale[i]);
    clamped[i] = ln < kLogNuMin || ln > kLogNuMax;
    d.log_nu[i] = std::clamp(ln, kLogNuMin, kLogNuMax);
  }
  return d;
}

GaussianActionDist GaussianPolicyNet::step(std::span<const double> obs, std::vector<double>& hidden) const {
  check_size(obs.size(), arch_.input, "policy input");
  PolicyTrace t = arch_.arch == PolicyArch::kGru ? forward_sequence(obs, hidden) : forward_sequence(obs);
  return t.outputs.front();
}

PolicyTrace GaussianPolicyNet::forward_sequence(std::span<const double> obs) const {
  std::vector<double> h(hidden_state_dim(), 0.0);
  return forward_sequence(obs, h);
}

PolicyTrace GaussianPolicyNet::forward_sequence(std::span<const FeatureVector> obs) const {
  return forward_sequence(std::span<const double>(obs.data()->data(), obs.size() * kFeatureCount));
}

PolicyTrace GaussianPolicyNet::forward_sequence(std::span<const double> obs, std::vector<double>& hidden) const {
  if (obs.size() % arch_.input != 0) {
    throw Error(ErrorCode::kShapeMismatch, "observation length is not a multiple of the input size");
  }
  const std::size_t steps = obs.size() / arch_.input;
  const auto p = params_.values();
  const bool gru = arch_.arch == PolicyArch::kGru;
  if (gru) {
    if (hidden.empty()) hidden.assign(arch_.core, 0.0);
    check_size(hidden.size(), arch_.core, "policy hidden state");
  }
  PolicyTrace t;
  t.trunk.resize(steps);
  t.head.resize(steps);
  if (gru) {
    t.gru.resize(steps);
  } else {
    t.core.resize(steps);
  }
  t.outputs.resize(steps);
  t.clamped.resize(steps);
  std::vector<double> h_next(arch_.core);
  for (std::size_t k = 0; k < steps; ++k) {
    trunk_.forward(p, obs.subspan(k * arch_.input, arch_.input), t.trunk[k]);
    const auto& feat = t.trunk[k].act.back();
    std::span<const double> core_out;
    if (gru) {
      core_gru_.forward(p, feat, hidden, t.gru[k], h_next);
      hidden = h_next;
      core_out = hidden;
    } else {
      core_dense_.forward(p, feat, t.core[k]);
      core_out = t.core[k].act.back();
    }
    head_.forward(p, core_out, t.head[k]);
    t.outputs[k] = head_to_dist(t.head[k].act.back(), t.clamped[k]);
  }
  return t;
}

void GaussianPolicyNet::backward(PolicyTrace& trace, std::span<const DistGrad> d_out) {
  backward(trace, d_out, params_.grads());
}

void GaussianPolicyNet::backward(PolicyTrace& trace, std::span<const DistGrad> d_out,
                                 std::span<double> grad) const {
  if (trace.consumed) throw Error(ErrorCode::kGraphReuse, "backward already ran on this trace");
  check_size(d_out.size(), trace.steps(), "output gradient steps");
  check_size(grad.size(), params_.size(), "gradient buffer");
  trace.consumed = true;
  vjp(trace, d_out, grad);
}

void GaussianPolicyNet::vjp(const PolicyTrace& trace, std::span<const DistGrad> d_out,
                            std::span<double> grad) const {
  check_size(d_out.size(), trace.steps(), "output gradient steps");
  check_size(grad.size(), params_.size(), "gradient buffer");
  const auto p = params_.values();
  const bool gru = arch_.arch == PolicyArch::kGru;
  std::vector<double> draw(2 * kActionDim), dcore(arch_.core), dfeat(arch_.hidden.back());
  std::vector<double> dh_carry(arch_.core, 0.0), dh_prev(arch_.core);
  for (std::size_t k = trace.steps(); k-- > 0;) {
    for (std::size_t i = 0; i < kActionDim; ++i) {
      draw[i] = d_out[k][i] * scaling_.scale[i];
      draw[kActionDim + i] = trace.clamped[k][i] ? 0.0 : d_out[k][kActionDim + i];
    }
    head_.backward(p, trace.head[k], draw, grad, dcore);
    if (gru) {
      for (std::size_t i = 0; i < arch_.core; ++i) dcore[i] += dh_carry[i];
      core_gru_.backward(p, trace.gru[k], dcore, grad, dfeat, dh_prev);
      dh_carry.swap(dh_prev);
    } else {
      core_dense_.backward(p, trace.core[k], dcore, grad, dfeat);
    }
    trunk_.backward(p, trace.trunk[k], dfeat, grad, {});
  }
}

std::vector<DistGrad> GaussianPolicyNet::jvp(const PolicyTrace& trace, std::span<const double> tangent) const {
  check_size(tangent.size(), params_.size(), "parameter tangent");
  const auto p = params_.values();
  const bool gru = arch_.arch == PolicyArch::kGru;
  std::vector<DistGrad> out(trace.steps());
  std::vector<double> dfeat(arch_.hidden.back()), dcore(arch_.core), dh(arch_.core, 0.0);
  std::vector<double> draw(2 * kActionDim);
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    trunk_.jvp(p, trace.trunk[k], tangent, {}, dfeat);
    if (gru) {
      core_gru_.jvp(p, trace.gru[k], tangent, dfeat, dh, dcore);
      dh = dcore;
    } else {
      core_dense_.jvp(p, trace.core[k], tangent, dfeat, dcore);
    }
    head_.jvp(p, trace.head[k], tangent, dcore, draw);
    for (std::size_t i = 0; i < kActionDim; ++i) {
      out[k][i] = scaling_.scale[i] * draw[i];
      out[k][kActionDim + i] = trace.clamped[k][i] ? 0.0 : draw[kActionDim + i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// DiscriminatorNet

DiscriminatorNet::DiscriminatorNet(std::uint64_t seed, std::size_t obs_dim, std::vector<std::size_t> hidden)
    : obs_dim_(obs_dim), hidden_(std::move(hidden)) {
  std::vector<std::size_t> sizes{obs_dim_ + kActionDim};
  sizes.insert(sizes.end(), hidden_.begin(), hidden_.end());
  sizes.push_back(1);
  body_ = DenseStack(params_, "disc", sizes, false);
  Rng rng(seed);
  body_.init(params_.values(), rng);
}

double DiscriminatorNet::logit(std::span<const double> obs, const DriveAction& a, DenseStack::Cache& cache) const {
  check_size(obs.size(), obs_dim_, "discriminator observation");
  std::vector<double> in(obs.begin(), obs.end());
  in.push_back((a.accel - scaling_.mean[0]) / scaling_.scale[0]);
  in.push_back((a.turn_rate - scaling_.mean[1]) / scaling_.scale[1]);
  body_.forward(params_.values(), in, cache);
  return cache.act.back()[0];
}

double DiscriminatorNet::forward(std::span<const double> obs, const DriveAction& a) const {
  DenseStack::Cache cache;
  return std::clamp(sigmoid(logit(obs, a, cache)), kClamp, 1.0 - kClamp);
}

void DiscriminatorNet::backward_logit(const DenseStack::Cache& cache, double dlogit, std::span<double> grad) const {
  const double dy[1] = {dlogit};
  body_.backward(params_.values(), cache, dy, grad, {});
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::size_t n, double step_size, double beta1, double beta2, double eps)
    : lr_(step_size), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace driveimit
