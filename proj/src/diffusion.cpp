#include "orl/diffusion.hpp"

#include "orl/adam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace orl {

void NoiseSchedule::require_step(int t) const {
  if (t < 1 || t > steps) {
    throw InvalidArgument("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps) + "]");
  }
}

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 2) throw InvalidArgument("noise schedule needs at least 2 steps");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
    throw InvalidArgument("noise schedule requires 0 < beta_min <= beta_max < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.betas = Eigen::VectorXd::LinSpaced(steps, beta_min, beta_max);
  s.alphas = 1.0 - s.betas.array();
  s.alpha_bars.resize(steps);
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    prod *= s.alphas[i];
    s.alpha_bars[i] = prod;
  }
  return s;
}

Latent forward_noise(const Latent& z0, int t, const Eigen::Ref<const Eigen::VectorXd>& noise,
                     const NoiseSchedule& sched) {
  sched.require_step(t);
  if (noise.size() != z0.size()) throw InvalidArgument("forward_noise: noise shape does not match latent");
  const double ab = sched.alpha_bar(t);
  Latent zt;
  zt.values.resize(z0.values.rows(), z0.values.cols());
  zt.flat() = std::sqrt(ab) * z0.flat() + std::sqrt(1.0 - ab) * noise;
  zt.t = t;
  return zt;
}

Latent forward_step(const Latent& z_prev, const Eigen::Ref<const Eigen::VectorXd>& noise, const NoiseSchedule& sched) {
  const int t = z_prev.t + 1;
  sched.require_step(t);
  if (noise.size() != z_prev.size()) throw InvalidArgument("forward_step: noise shape does not match latent");
  Latent zt;
  zt.values.resize(z_prev.values.rows(), z_prev.values.cols());
  zt.flat() = std::sqrt(sched.alpha(t)) * z_prev.flat() + std::sqrt(sched.beta(t)) * noise;
  zt.t = t;
  return zt;
}

Eigen::VectorXd timestep_embedding(int t, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw InvalidArgument("timestep embedding dimension must be positive and even");
  const int half = dim / 2;
  Eigen::VectorXd emb(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(1000.0, -static_cast<double>(i) / half);
    emb[i] = std::sin(t * freq);
    emb[half + i] = std::cos(t * freq);
  }
  return emb;
}

StepAction StepAction::squashed() const {
  return {std::clamp(mean_shift, -1.0, 1.0), std::clamp(log_scale, -1.0, 1.0), std::clamp(stop_gate, -1.0, 1.0)};
}

StepAction StepAction::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != kActionDim) throw InvalidArgument("step action needs 3 components");
  return StepAction{v[0], v[1], v[2]}.squashed();
}

// --- Denoiser ---------------------------------------------------------------

namespace {

std::vector<int> denoiser_sizes(int latent_side, const std::vector<int>& hidden) {
  const int d = latent_side * latent_side;
  std::vector<int> sizes{2 * d + kTimeEmbedDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(d);
  return sizes;
}

}  // namespace

std::string to_string(DenoiserHead head) {
  switch (head) {
    case DenoiserHead::epsilon: return "epsilon";
    case DenoiserHead::velocity: return "velocity";
    case DenoiserHead::residual: return "residual";
  }
  return "unknown";
}

DenoiserHead parse_denoiser_head(const std::string& name) {
  if (name == "epsilon") return DenoiserHead::epsilon;
  if (name == "velocity") return DenoiserHead::velocity;
  if (name == "residual") return DenoiserHead::residual;
  throw InvalidArgument("unknown denoiser head '" + name + "' (expected epsilon, velocity or residual)");
}

void HeadSpec::validate() const {
  if (kind == DenoiserHead::epsilon) return;
  if (alpha_bars.size() < 2 || !alpha_bars.allFinite() || alpha_bars.minCoeff() <= 0.0 ||
      alpha_bars.maxCoeff() >= 1.0) {
    throw InvalidArgument(to_string(kind) + " head needs alpha_bars in (0, 1) for at least 2 steps");
  }
  if (kind == DenoiserHead::residual && !(prior_scale > 0.0 && std::isfinite(prior_scale))) {
    throw InvalidArgument("residual head needs a positive prior scale");
  }
}

Denoiser::Denoiser(int latent_side, const std::vector<int>& hidden, Activation activation, std::uint64_t seed,
                   HeadSpec head)
    : Denoiser(latent_side, Mlp(denoiser_sizes(latent_side, hidden), activation, OutputActivation::none, seed),
               std::move(head)) {}

Denoiser::Denoiser(int latent_side, Mlp net, HeadSpec head)
    : latent_side_(latent_side), head_(std::move(head)), net_(std::move(net)) {
  const int d = latent_size();
  if (latent_side <= 0 || net_.input_size() != 2 * d + kTimeEmbedDim || net_.output_size() != d) {
    throw InvalidArgument("denoiser network does not fit a latent of side " + std::to_string(latent_side));
  }
  head_.validate();
  if (head_.kind == DenoiserHead::epsilon) head_ = HeadSpec{};
}

void Denoiser::require_schedule(const NoiseSchedule& sched) const {
  if (head_.kind != DenoiserHead::epsilon && head_.alpha_bars != sched.alpha_bars) {
    throw InvalidArgument("denoiser head was built for a different noise schedule");
  }
}

namespace {

struct ResidualCoeffs {
  double c_skip;
  double c_out;
};

ResidualCoeffs residual_coeffs(double ab, double s) {
  const double denom = ab * s * s + 1.0 - ab;
  return {std::sqrt(ab) * s * s / denom, s * std::sqrt(1.0 - ab) / std::sqrt(denom)};
}

}  // namespace

double Denoiser::head_gain(int t) const {
  if (head_.kind == DenoiserHead::epsilon) return 1.0;
  const double ab = head_.alpha_bars[t - 1];
  if (head_.kind == DenoiserHead::velocity) return std::sqrt(ab);
  return -std::sqrt(ab) * residual_coeffs(ab, head_.prior_scale).c_out / std::sqrt(1.0 - ab);
}

void Denoiser::apply_head(const Eigen::Ref<const Eigen::VectorXd>& z_t, int t,
                          const Eigen::Ref<const Eigen::VectorXd>& condition, Eigen::Ref<Eigen::VectorXd> out) const {
  if (head_.kind == DenoiserHead::epsilon) return;
  if (t < 1 || t > head_.alpha_bars.size()) {
    throw InvalidArgument("timestep " + std::to_string(t) + " outside the denoiser's schedule");
  }
  const double ab = head_.alpha_bars[t - 1];
  if (head_.kind == DenoiserHead::velocity) {
    out = std::sqrt(1.0 - ab) * z_t + std::sqrt(ab) * out;
    return;
  }
  const ResidualCoeffs k = residual_coeffs(ab, head_.prior_scale);
  const Eigen::VectorXd y = z_t - std::sqrt(ab) * condition;
  const Eigen::VectorXd x0 = condition + k.c_skip * y + k.c_out * out;
  out = (z_t - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
}

void Denoiser::assemble_input(const Eigen::Ref<const Eigen::VectorXd>& z_t, int t,
                              const Eigen::Ref<const Eigen::VectorXd>& condition,
                              Eigen::Ref<Eigen::VectorXd> column) const {
  const int d = latent_size();
  if (z_t.size() != d || condition.size() != d) throw InvalidArgument("denoiser input has the wrong latent size");
  column.head(d) = z_t;
  column.segment(d, kTimeEmbedDim) = timestep_embedding(t);
  column.tail(d) = condition;
}

Eigen::VectorXd Denoiser::predict_noise(const Eigen::Ref<const Eigen::VectorXd>& z_t, int t,
                                        const Eigen::Ref<const Eigen::VectorXd>& condition) const {
  Eigen::VectorXd input(net_.input_size());
  assemble_input(z_t, t, condition, input);
  Eigen::VectorXd out = net_.forward(input);
  apply_head(z_t, t, condition, out);
  return out;
}

NetParams Denoiser::to_params() const {
  NetParams out;
  Eigen::VectorXd meta(4);
  meta << latent_side_, net_.activation() == Activation::tanh ? 0.0 : 1.0, static_cast<double>(head_.kind),
      head_.prior_scale;
  out.add("denoiser.meta", RealArray({4}, meta));
  if (head_.kind != DenoiserHead::epsilon) {
    out.add("denoiser.alpha_bars",
            RealArray({static_cast<std::size_t>(head_.alpha_bars.size())}, head_.alpha_bars));
  }
  out.append_prefixed("denoiser.", net_.params());
  return out;
}

Denoiser Denoiser::from_params(const NetParams& params) {
  if (!params.contains("denoiser.meta")) throw InvalidArgument("checkpoint has no denoiser.meta frame");
  const auto& meta = params.at("denoiser.meta").data();
  if (meta.size() != 4) throw InvalidArgument("denoiser.meta must hold 4 values");
  const Activation act = meta[1] == 0.0 ? Activation::tanh : Activation::relu;
  if (meta[2] != 0.0 && meta[2] != 1.0 && meta[2] != 2.0) throw InvalidArgument("unknown denoiser head code");
  HeadSpec head{static_cast<DenoiserHead>(static_cast<int>(meta[2])), {}, meta[3]};
  if (head.kind != DenoiserHead::epsilon) {
    if (!params.contains("denoiser.alpha_bars")) throw InvalidArgument("denoiser head has no alpha_bars frame");
    head.alpha_bars = params.at("denoiser.alpha_bars").data();
  }
  NetParams net_params = params.with_prefix_stripped("denoiser.layer");
  NetParams renamed;
  for (const auto& [name, value] : net_params) renamed.add("layer" + name, value);
  return Denoiser(static_cast<int>(meta[0]), Mlp::from_params(std::move(renamed), act, OutputActivation::none),
                  std::move(head));
}

double DenoiserTrainResult::smoothed_final_loss(std::size_t window) const {
  if (loss_history.empty()) return 0.0;
  const std::size_t n = std::min(window, loss_history.size());
  return std::accumulate(loss_history.end() - static_cast<std::ptrdiff_t>(n), loss_history.end(), 0.0) /
         static_cast<double>(n);
}

DenoiserTrainResult train_denoiser(std::span<const ImagePair> dataset, const NoiseSchedule& sched,
                                   const DenoiserTrainConfig& cfg) {
  if (dataset.empty()) throw InvalidArgument("train_denoiser: empty dataset");
  if (cfg.batch_size <= 0 || cfg.steps < 0) throw InvalidArgument("train_denoiser: bad batch size or step count");

  const int d = cfg.latent_side * cfg.latent_side;
  Eigen::MatrixXd clean(d, static_cast<Eigen::Index>(dataset.size()));
  Eigen::MatrixXd cond(d, static_cast<Eigen::Index>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    clean.col(static_cast<Eigen::Index>(i)) = encode(dataset[i].hr, cfg.latent_side).flat();
    cond.col(static_cast<Eigen::Index>(i)) = encode(dataset[i].lr, cfg.latent_side).flat();
  }

  HeadSpec head{cfg.head, {}, 0.0};
  if (cfg.head != DenoiserHead::epsilon) head.alpha_bars = sched.alpha_bars;
  if (cfg.head == DenoiserHead::residual) {
    // RMS of z0 - c over the training set, floored so a noiseless corpus still works.
    head.prior_scale = std::max(std::sqrt((clean - cond).squaredNorm() / static_cast<double>(clean.size())), 1e-3);
  }
  DenoiserTrainResult result{Denoiser(cfg.latent_side, cfg.hidden, cfg.activation, mix_seed(cfg.seed, 1), head), {}};
  Denoiser& den = result.denoiser;

  Rng rng(mix_seed(cfg.seed, 2));
  AdamState adam = AdamState::for_params(den.net().params(), cfg.learning_rate);
  Eigen::MatrixXd inputs(den.net().input_size(), cfg.batch_size);
  Eigen::MatrixXd targets(d, cfg.batch_size);
  std::vector<int> ts(static_cast<std::size_t>(cfg.batch_size));
  Eigen::VectorXd head_gain = Eigen::VectorXd::Ones(cfg.batch_size);  // d eps / d f per column
  MlpTape tape;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto idx = static_cast<Eigen::Index>(rng.below(dataset.size()));
      const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.steps)));
      const Eigen::VectorXd eps = rng.normal_vector(d);
      const double ab = sched.alpha_bar(t);
      const Eigen::VectorXd z_t = std::sqrt(ab) * clean.col(idx) + std::sqrt(1.0 - ab) * eps;
      den.assemble_input(z_t, t, cond.col(idx), inputs.col(b));
      targets.col(b) = eps;
      ts[static_cast<std::size_t>(b)] = t;
      head_gain[b] = den.head_gain(t);
    }
    Eigen::MatrixXd pred = den.net().forward(inputs, &tape);
    for (int b = 0; b < cfg.batch_size; ++b) {
      den.apply_head(inputs.col(b).head(d), ts[static_cast<std::size_t>(b)], inputs.col(b).tail(d), pred.col(b));
    }
    const Eigen::MatrixXd diff = pred - targets;
    const double scale = 1.0 / static_cast<double>(diff.size());
    result.loss_history.push_back(diff.squaredNorm() * scale);
    const MlpGradients grads = den.net().backward(tape, 2.0 * scale * diff * head_gain.asDiagonal());
    adam_step(den.net().params(), grads.params, adam);
  }
  return result;
}

// --- Reverse process ----------------------------------------------------------

Latent predict_clean_from_eps(const Latent& z_t, const Eigen::Ref<const Eigen::VectorXd>& eps,
                              const NoiseSchedule& sched) {
  sched.require_step(z_t.t);
  if (eps.size() != z_t.size()) throw InvalidArgument("predict_clean: eps shape does not match latent");
  const double ab = sched.alpha_bar(z_t.t);
  Latent z0;
  z0.values.resize(z_t.values.rows(), z_t.values.cols());
  z0.flat() = (z_t.flat() - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
  z0.t = 0;
  return z0;
}

Latent predict_clean(const Latent& z_t, const Denoiser& den, const NoiseSchedule& sched, const Latent& condition) {
  sched.require_step(z_t.t);
  return predict_clean_from_eps(z_t, den.predict_noise(z_t.flat(), z_t.t, condition.flat()), sched);
}

Latent reverse_step_from_eps(const Latent& z_t, const Eigen::Ref<const Eigen::VectorXd>& eps,
                             const NoiseSchedule& sched, const StepAction& action,
                             const Eigen::Ref<const Eigen::VectorXd>& xi) {
  const int t = z_t.t;
  sched.require_step(t);
  if (xi.size() != z_t.size()) throw InvalidArgument("reverse_step: xi shape does not match latent");
  if (eps.size() != z_t.size()) throw InvalidArgument("reverse_step: eps shape does not match latent");
  const StepAction a = action.squashed();
  const double beta = sched.beta(t);
  const double sigma = std::sqrt(beta);

  Latent next;
  next.values.resize(z_t.values.rows(), z_t.values.cols());
  next.flat() = (z_t.flat() - (beta / std::sqrt(1.0 - sched.alpha_bar(t))) * eps) / std::sqrt(sched.alpha(t));
  if (a.mean_shift != 0.0) next.flat().array() += kModulationGain * a.mean_shift * sigma;
  if (t > 1) next.flat() += (std::exp(kModulationGain * a.log_scale) * sigma) * xi;
  next.t = t - 1;
  return next;
}

Latent reverse_step(const Latent& z_t, const Denoiser& den, const NoiseSchedule& sched, const Latent& condition,
                    const StepAction& action, const Eigen::Ref<const Eigen::VectorXd>& xi) {
  sched.require_step(z_t.t);
  return reverse_step_from_eps(z_t, den.predict_noise(z_t.flat(), z_t.t, condition.flat()), sched, action, xi);
}

ReverseSampler::ReverseSampler(const Denoiser& den, const NoiseSchedule& sched, Latent condition,
                               std::uint64_t seed)
    : den_(&den), sched_(&sched), condition_(std::move(condition)), rng_(seed) {
  den.require_schedule(sched);
  if (condition_.size() != den.latent_size()) throw InvalidArgument("condition latent does not fit the denoiser");
  z_ = Latent::from_flat(rng_.normal_vector(den.latent_size()), den.latent_side(), sched.steps);
}

void ReverseSampler::advance(const StepAction& action) {
  if (done_) throw ProtocolError("reverse trajectory already finished");
  const StepAction a = action.squashed();
  ++steps_used_;
  if (a.stops()) {
    z_ = predict_clean(z_, *den_, *sched_, condition_);
    done_ = true;
    return;
  }
  if (z_.t > 1) {
    const Eigen::VectorXd xi = rng_.normal_vector(z_.size());
    z_ = reverse_step(z_, *den_, *sched_, condition_, a, xi);
  } else {
    z_ = reverse_step(z_, *den_, *sched_, condition_, a, Eigen::VectorXd::Zero(z_.size()));
  }
  done_ = z_.t == 0;
}

SampleResult sample(const Latent& condition, const Denoiser& den, const NoiseSchedule& sched,
                    const ActionPolicy& policy, std::uint64_t seed) {
  ReverseSampler sampler(den, sched, condition, seed);
  while (!sampler.done()) {
    sampler.advance(policy ? policy(sampler.state(), sampler.condition()) : StepAction{});
  }
  return {sampler.state(), sampler.steps_used()};
}

}  // namespace orl
