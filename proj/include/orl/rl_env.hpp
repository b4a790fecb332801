#pragma once

#include "orl/diffusion.hpp"
#include "orl/metrics.hpp"
#include "orl/random.hpp"
#include "orl/scenes.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace orl {

struct EnvConfig {
  int image_side = 32;
  int latent_side = 8;
  double gamma = 0.99;
  std::uint64_t seed = 42;
  RewardNormalization reward_norm;
};

/// (mean, std, min, max) of the condition latent.
Eigen::Vector4d condition_summary(const Latent& condition);

/// flatten(z_t) ++ timestep_embedding(t) ++ condition_summary(c).
Eigen::VectorXd state_features(const Latent& z_t, const Latent& condition);

inline int feature_dim_for(int latent_side) { return latent_side * latent_side + kTimeEmbedDim + 4; }

/// Scores a final latent against the HR reference with the composite reward.
RewardBreakdown score_latent(const Image& hr, const Latent& z0, int steps_used, int total_steps, int image_side,
                             const RewardNormalization& norm);

struct EnvState {
  Eigen::VectorXd features;
  int t = 0;
  bool episode_done = false;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
  std::optional<RewardBreakdown> breakdown;  // set on the terminal step only
};

/// Reverse diffusion as an episodic MDP. One episode denoises one scene;
/// every reward is zero except the terminal composite reward.
class SuperResolutionEnv {
 public:
  SuperResolutionEnv(EnvConfig cfg, std::shared_ptr<const Denoiser> denoiser, NoiseSchedule sched,
                     std::vector<ScenePair> scenes = {});

  EnvState reset(const ImagePair& scene, std::uint64_t episode_seed);
  StepResult step(const StepAction& action);

  int feature_dim() const { return feature_dim_for(cfg_.latent_side); }
  const EnvConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return sched_; }
  const std::vector<ScenePair>& scenes() const { return scenes_; }
  // Current latent of the running (or just finished) episode.
  const Latent& latent() const;

 private:
  EnvState make_state() const;

  EnvConfig cfg_;
  std::shared_ptr<const Denoiser> denoiser_;
  NoiseSchedule sched_;
  std::vector<ScenePair> scenes_;
  std::optional<ReverseSampler> sampler_;
  Image hr_;
};

struct AgentDecision {
  Eigen::VectorXd raw_action;  // pre-squash sample
  Eigen::VectorXd action;      // squashed into [-1, 1]
  double log_prob = 0.0;
  double value = 0.0;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentDecision act(const Eigen::VectorXd& features, Rng& rng) const = 0;
};

struct Transition {
  Eigen::VectorXd features;
  Eigen::VectorXd raw_action;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  RewardBreakdown terminal;

  double total_reward() const;
};

Trajectory run_episode(SuperResolutionEnv& env, const ImagePair& scene, std::uint64_t episode_seed,
                       const Agent& agent, Rng& action_rng);

/// n_episodes episodes over env.scenes() round-robin starting at first_scene.
/// Episode i uses seed mix_seed(seed, i).
std::vector<Trajectory> rollout(SuperResolutionEnv& env, const Agent& agent, int n_episodes, std::uint64_t seed,
                                std::size_t first_scene = 0);

/// Runs whole episodes until at least min_steps transitions exist. Scenes
/// come from successive reshuffled passes over env.scenes().
std::vector<Trajectory> rollout_steps(SuperResolutionEnv& env, const Agent& agent, int min_steps,
                                      std::uint64_t seed);

}  // namespace orl
