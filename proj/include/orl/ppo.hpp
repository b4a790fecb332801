#pragma once

#include "orl/adam.hpp"
#include "orl/mlp.hpp"
#include "orl/rl_env.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace orl {

struct PpoConfig {
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double value_coef = 0.5;
  int update_epochs = 4;
  int batch_size = 64;
  int train_epochs = 200;
  int steps_per_epoch = 1000;
  std::uint64_t seed = 42;
  double entropy_coef = 0.01;

  std::vector<int> policy_hidden{64, 64};
  std::vector<int> value_hidden{64, 64};
  double initial_log_std = -1.0;
  // Squashed-mean target of the untrained policy, one entry per action
  // dimension; empty means zero.
  std::vector<double> initial_action_mean{0.0, 0.0, 0.0};
  int reward_smoothing_window = 10;
};

struct PolicySample {
  Eigen::VectorXd raw_action;
  Eigen::VectorXd action;
  double log_prob = 0.0;
};

/// Diagonal Gaussian log density of `raw` under N(mean, exp(log_std)^2).
double gaussian_log_prob(const Eigen::Ref<const Eigen::VectorXd>& raw, const Eigen::Ref<const Eigen::VectorXd>& mean,
                         const Eigen::Ref<const Eigen::VectorXd>& log_std);

/// Gaussian policy over pre-squash actions. The mean comes from an MLP with a
/// tanh output; samples are squashed with tanh. log_prob is the density of
/// the pre-squash draw.
class GaussianPolicy {
 public:
  static constexpr double kMinLogStd = -4.0;
  static constexpr double kMaxLogStd = 1.0;

  GaussianPolicy() = default;
  // The output layer starts with weights scaled by 0.01 and biases chosen so
  // the mean-net output is close to initial_mean (zero when empty).
  GaussianPolicy(int feature_dim, int action_dim, const std::vector<int>& hidden, double initial_log_std,
                 std::uint64_t seed, const std::vector<double>& initial_mean = {});
  GaussianPolicy(Mlp mean_net, const Eigen::VectorXd& log_std);

  int feature_dim() const { return mean_net_.input_size(); }
  int action_dim() const { return mean_net_.output_size(); }

  Eigen::VectorXd mean(const Eigen::Ref<const Eigen::VectorXd>& features) const;
  const Eigen::VectorXd& log_std() const { return log_std_.at("log_std").data(); }

  PolicySample sample(const Eigen::Ref<const Eigen::VectorXd>& features, Rng& rng) const;
  double log_prob(const Eigen::Ref<const Eigen::VectorXd>& features,
                  const Eigen::Ref<const Eigen::VectorXd>& raw_action) const;
  Eigen::VectorXd deterministic_action(const Eigen::Ref<const Eigen::VectorXd>& features) const;

  Mlp& mean_net() { return mean_net_; }
  const Mlp& mean_net() const { return mean_net_; }
  NetParams& log_std_params() { return log_std_; }
  const NetParams& log_std_params() const { return log_std_; }

  void clamp_log_std();

 private:
  Mlp mean_net_;
  NetParams log_std_;
};

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// values has one more entry than rewards (bootstrap, 0 at a terminal).
GaeResult gae(const Eigen::Ref<const Eigen::VectorXd>& rewards, const Eigen::Ref<const Eigen::VectorXd>& values,
              double gamma, double lambda);

double clipped_surrogate(double ratio, double advantage, double clip);

/// Flattened transitions, one column per step.
struct RolloutBatch {
  Eigen::MatrixXd features;
  Eigen::MatrixXd raw_actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return old_log_probs.size(); }
};

/// Runs GAE per trajectory and stacks the results. Advantages are normalized
/// to zero mean and unit variance over the batch when `normalize` is set
/// (a batch with no spread is only centred).
RolloutBatch build_batch(std::span<const Trajectory> trajectories, double gamma, double lambda,
                         bool normalize = true);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  double min_minibatch_ratio = 1.0;  // extremes of the per-minibatch mean ratio
  double max_minibatch_ratio = 1.0;
  int minibatches = 0;
};

/// Policy, value network and their optimizer state.
class PpoAgent : public Agent {
 public:
  PpoAgent() = default;
  PpoAgent(int feature_dim, int action_dim, const PpoConfig& cfg);
  PpoAgent(GaussianPolicy policy, Mlp value_net, const PpoConfig& cfg);

  AgentDecision act(const Eigen::VectorXd& features, Rng& rng) const override;

  double value(const Eigen::Ref<const Eigen::VectorXd>& features) const;

  GaussianPolicy& policy() { return policy_; }
  const GaussianPolicy& policy() const { return policy_; }
  Mlp& value_net() { return value_; }
  const Mlp& value_net() const { return value_; }
  const PpoConfig& config() const { return cfg_; }

  // Checkpoint frames: policy.meta, policy.layer*, policy.log_std, value.layer*.
  NetParams to_params() const;
  static PpoAgent from_params(const NetParams& params, const PpoConfig& cfg);

 private:
  friend PpoStats ppo_update(PpoAgent& agent, const RolloutBatch& batch, Rng& rng);

  PpoConfig cfg_;
  GaussianPolicy policy_;
  Mlp value_;
  AdamState mean_adam_;
  AdamState log_std_adam_;
  AdamState value_adam_;
};

/// update_epochs passes of shuffled minibatches over the batch, each taking
/// one Adam step on
///   -min(r A, clip(r) A) - entropy_coef H + value_coef (V - R)^2.
PpoStats ppo_update(PpoAgent& agent, const RolloutBatch& batch, Rng& rng);

struct CurvePoint {
  int epoch = 0;
  double mean_reward = 0.0;      // trailing mean over reward_smoothing_window epochs
  double raw_mean_reward = 0.0;  // this epoch's mean episode reward
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

struct TrainResult {
  PpoAgent agent;
  std::vector<CurvePoint> curve;
};

/// Alternates rollout_steps(steps_per_epoch) and ppo_update for train_epochs.
TrainResult train(SuperResolutionEnv& env, const PpoConfig& cfg);

}  // namespace orl
