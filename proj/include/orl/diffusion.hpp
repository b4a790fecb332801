#pragma once

#include "orl/image.hpp"
#include "orl/latent_codec.hpp"
#include "orl/mlp.hpp"
#include "orl/random.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace orl {

/// Linear beta schedule. Timesteps are 1-based: t in [1, steps].
struct NoiseSchedule {
  int steps = 0;
  Eigen::VectorXd betas;
  Eigen::VectorXd alphas;
  Eigen::VectorXd alpha_bars;

  double beta(int t) const { return betas[t - 1]; }
  double alpha(int t) const { return alphas[t - 1]; }
  double alpha_bar(int t) const { return alpha_bars[t - 1]; }

  // Throws InvalidArgument unless 1 <= t <= steps.
  void require_step(int t) const;
};

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max);

/// z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) noise.
Latent forward_noise(const Latent& z0, int t, const Eigen::Ref<const Eigen::VectorXd>& noise,
                     const NoiseSchedule& sched);

/// One Markov step q(z_t | z_{t-1}): z_t = sqrt(alpha_t) z_{t-1} + sqrt(beta_t) noise, t = z_prev.t + 1.
Latent forward_step(const Latent& z_prev, const Eigen::Ref<const Eigen::VectorXd>& noise, const NoiseSchedule& sched);

inline constexpr int kTimeEmbedDim = 8;

/// [sin(t f_0..f_{d/2-1}), cos(t f_0..f_{d/2-1})] with f_i = 1000^(-i / (d/2)).
Eigen::VectorXd timestep_embedding(int t, int dim = kTimeEmbedDim);

/// Per-step modulation chosen by the agent. Components are clamped to
/// [-1, 1] before use; the zero action reproduces plain DDPM.
struct StepAction {
  double mean_shift = 0.0;
  double log_scale = 0.0;
  double stop_gate = 0.0;

  StepAction squashed() const;
  static StepAction from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);
  bool stops() const { return stop_gate > 0.0; }
};

inline constexpr int kActionDim = 3;
inline constexpr double kModulationGain = 0.5;

/// How the network output f becomes the noise estimate.
///   epsilon:  eps = f
///   velocity: eps = sqrt(1 - ab) z_t + sqrt(ab) f
///   residual: x0 = c + c_skip y + c_out f with y = z_t - sqrt(ab) c, and
///             eps = (z_t - sqrt(ab) x0) / sqrt(1 - ab)
/// where ab = alpha_bar_t. The residual head treats z0 - c as N(0, s^2)
/// with s = prior_scale: c_skip = sqrt(ab) s^2 / D and c_out = s sqrt(1 - ab) / sqrt(D),
/// D = ab s^2 + 1 - ab. With f = 0 it is the exact posterior-mean denoiser
/// for that prior. The epsilon head amplifies eps errors in the clean-latent
/// estimate by sqrt((1 - ab) / ab); the other two heads do not.
enum class DenoiserHead { epsilon, velocity, residual };

std::string to_string(DenoiserHead head);
DenoiserHead parse_denoiser_head(const std::string& name);

struct HeadSpec {
  DenoiserHead kind = DenoiserHead::epsilon;
  Eigen::VectorXd alpha_bars;  // schedule the head was built for; unused by epsilon
  double prior_scale = 0.0;    // residual head only

  // Throws InvalidArgument if the fields do not suit `kind`.
  void validate() const;
};

/// Conditional noise predictor eps_theta(z_t, t, c). The network input is
/// flatten(z_t) ++ timestep_embedding(t) ++ flatten(c).
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(int latent_side, const std::vector<int>& hidden, Activation activation, std::uint64_t seed,
           HeadSpec head = {});
  Denoiser(int latent_side, Mlp net, HeadSpec head = {});

  int latent_side() const { return latent_side_; }
  int latent_size() const { return latent_side_ * latent_side_; }
  const HeadSpec& head() const { return head_; }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }

  // Throws InvalidArgument if the head was built for another schedule.
  void require_schedule(const NoiseSchedule& sched) const;

  // Maps one network output column to eps in place.
  void apply_head(const Eigen::Ref<const Eigen::VectorXd>& z_t, int t,
                  const Eigen::Ref<const Eigen::VectorXd>& condition, Eigen::Ref<Eigen::VectorXd> out) const;
  // d eps / d f at timestep t (the head is a per-t affine map with scalar gain).
  double head_gain(int t) const;

  Eigen::VectorXd predict_noise(const Eigen::Ref<const Eigen::VectorXd>& z_t, int t,
                                const Eigen::Ref<const Eigen::VectorXd>& condition) const;

  // Writes one network input column.
  void assemble_input(const Eigen::Ref<const Eigen::VectorXd>& z_t, int t,
                      const Eigen::Ref<const Eigen::VectorXd>& condition, Eigen::Ref<Eigen::VectorXd> column) const;

  NetParams to_params() const;
  static Denoiser from_params(const NetParams& params);

 private:
  int latent_side_ = 0;
  HeadSpec head_;
  Mlp net_;
};

struct DenoiserTrainConfig {
  int latent_side = 8;
  std::vector<int> hidden{256, 256};
  Activation activation = Activation::tanh;
  DenoiserHead head = DenoiserHead::residual;
  int steps = 2000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
};

struct DenoiserTrainResult {
  Denoiser denoiser;
  std::vector<double> loss_history;  // one minibatch MSE per optimizer step

  // Mean of the last `window` losses.
  double smoothed_final_loss(std::size_t window = 100) const;
};

/// Fits eps_theta by minimizing the mean squared error between predicted and
/// injected noise over uniformly drawn (pair, t, noise) triples.
DenoiserTrainResult train_denoiser(std::span<const ImagePair> dataset, const NoiseSchedule& sched,
                                   const DenoiserTrainConfig& cfg);

/// Direct clean-latent estimate (z_t - sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_bar_t).
Latent predict_clean_from_eps(const Latent& z_t, const Eigen::Ref<const Eigen::VectorXd>& eps,
                              const NoiseSchedule& sched);
Latent predict_clean(const Latent& z_t, const Denoiser& den, const NoiseSchedule& sched, const Latent& condition);

/// One modulated reverse step from z_t (t = z_t.t) to z_{t-1}:
///   mu = (z_t - beta_t / sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_t), sigma = sqrt(beta_t)
///   z_{t-1} = mu + k m sigma + exp(k s) sigma xi   (noise term dropped at t = 1)
/// with k = kModulationGain and (m, s) the squashed action.
Latent reverse_step_from_eps(const Latent& z_t, const Eigen::Ref<const Eigen::VectorXd>& eps,
                             const NoiseSchedule& sched, const StepAction& action,
                             const Eigen::Ref<const Eigen::VectorXd>& xi);
Latent reverse_step(const Latent& z_t, const Denoiser& den, const NoiseSchedule& sched, const Latent& condition,
                    const StepAction& action, const Eigen::Ref<const Eigen::VectorXd>& xi);

/// One reverse-diffusion trajectory, advanced one action at a time. Draws
/// z_T and then one noise vector per non-final step from a private Rng, so
/// every driver (plain sampler, RL environment) sees the same stream.
/// The denoiser and schedule must outlive the sampler.
class ReverseSampler {
 public:
  ReverseSampler(const Denoiser& den, const NoiseSchedule& sched, Latent condition, std::uint64_t seed);

  const Latent& state() const { return z_; }
  const Latent& condition() const { return condition_; }
  int t() const { return z_.t; }
  bool done() const { return done_; }
  int steps_used() const { return steps_used_; }

  // stop_gate > 0 finishes with predict_clean; otherwise one reverse_step.
  void advance(const StepAction& action);

 private:
  const Denoiser* den_;
  const NoiseSchedule* sched_;
  Latent condition_;
  Rng rng_;
  Latent z_;
  int steps_used_ = 0;
  bool done_ = false;
};

using ActionPolicy = std::function<StepAction(const Latent& z_t, const Latent& condition)>;

struct SampleResult {
  Latent latent;
  int steps_used = 0;
};

/// Full reverse chain from seeded z_T ~ N(0, I). Without a policy every
/// action is zero and all T steps run.
SampleResult sample(const Latent& condition, const Denoiser& den, const NoiseSchedule& sched,
                    const ActionPolicy& policy, std::uint64_t seed);

}  // namespace orl
