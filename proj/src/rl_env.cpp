#include "orl/rl_env.hpp"

#include <cmath>
#include <numeric>

namespace orl {

Eigen::Vector4d condition_summary(const Latent& condition) {
  const auto v = condition.flat().array();
  const double mean = v.mean();
  const double sd = std::sqrt((v - mean).square().mean());
  return {mean, sd, v.minCoeff(), v.maxCoeff()};
}

Eigen::VectorXd state_features(const Latent& z_t, const Latent& condition) {
  const Eigen::Index d = z_t.size();
  Eigen::VectorXd f(d + kTimeEmbedDim + 4);
  f.head(d) = z_t.flat();
  f.segment(d, kTimeEmbedDim) = timestep_embedding(z_t.t);
  f.tail(4) = condition_summary(condition);
  return f;
}

RewardBreakdown score_latent(const Image& hr, const Latent& z0, int steps_used, int total_steps, int image_side,
                             const RewardNormalization& norm) {
  const Image recon = decode(z0, image_side);
  return composite_reward(psnr(recon, hr), ssim(recon, hr), perceptual_distance(recon, hr), steps_used, total_steps,
                          norm);
}

SuperResolutionEnv::SuperResolutionEnv(EnvConfig cfg, std::shared_ptr<const Denoiser> denoiser, NoiseSchedule sched,
                                       std::vector<ScenePair> scenes)
    : cfg_(cfg), denoiser_(std::move(denoiser)), sched_(std::move(sched)), scenes_(std::move(scenes)) {
  if (denoiser_ && denoiser_->latent_side() != cfg_.latent_side) {
    throw ConfigError("denoiser latent side does not match the environment");
  }
}

const Latent& SuperResolutionEnv::latent() const {
  if (!sampler_) throw ProtocolError("environment has not been reset");
  return sampler_->state();
}

EnvState SuperResolutionEnv::make_state() const {
  return {state_features(sampler_->state(), sampler_->condition()), sampler_->t(), sampler_->done()};
}

EnvState SuperResolutionEnv::reset(const ImagePair& scene, std::uint64_t episode_seed) {
  if (!denoiser_) throw ConfigError("environment has no trained denoiser attached");
  if (scene.hr.rows() != cfg_.image_side) throw InvalidArgument("scene HR side does not match the environment");
  hr_ = scene.hr;
  sampler_.emplace(*denoiser_, sched_, encode(scene.lr, cfg_.latent_side), episode_seed);
  return make_state();
}

StepResult SuperResolutionEnv::step(const StepAction& action) {
  if (!sampler_) throw ProtocolError("step() before reset()");
  if (sampler_->done()) throw ProtocolError("step() on a finished episode");
  sampler_->advance(action);
  StepResult result;
  result.state = make_state();
  result.done = sampler_->done();
  if (result.done) {
    result.breakdown = score_latent(hr_, sampler_->state(), sampler_->steps_used(), sched_.steps, cfg_.image_side,
                                    cfg_.reward_norm);
    result.reward = result.breakdown->composite;
  }
  return result;
}

double Trajectory::total_reward() const {
  double sum = 0.0;
  for (const auto& s : steps) sum += s.reward;
  return sum;
}

Trajectory run_episode(SuperResolutionEnv& env, const ImagePair& scene, std::uint64_t episode_seed,
                       const Agent& agent, Rng& action_rng) {
  Trajectory traj;
  EnvState state = env.reset(scene, episode_seed);
  while (!state.episode_done) {
    AgentDecision decision = agent.act(state.features, action_rng);
    StepResult r = env.step(StepAction::from_vector(decision.action));
    traj.steps.push_back({std::move(state.features), std::move(decision.raw_action), decision.log_prob,
                          decision.value, r.reward, r.done});
    if (r.breakdown) traj.terminal = *r.breakdown;
    state = std::move(r.state);
  }
  return traj;
}

namespace {

template <typename PickScene>
std::vector<Trajectory> collect(SuperResolutionEnv& env, const Agent& agent, int max_episodes, long min_steps,
                                std::uint64_t seed, PickScene pick) {
  const auto& scenes = env.scenes();
  if (scenes.empty()) throw ConfigError("environment has no scenes to roll out");
  Rng action_rng(mix_seed(seed, 0xac7105));
  std::vector<Trajectory> out;
  long steps = 0;
  for (int i = 0; (max_episodes < 0 || i < max_episodes) && (min_steps < 0 || steps < min_steps); ++i) {
    const ScenePair& scene = scenes[pick(static_cast<std::size_t>(i)) % scenes.size()];
    out.push_back(run_episode(env, {scene.hr, scene.lr}, mix_seed(seed, static_cast<std::uint64_t>(i)), agent,
                              action_rng));
    steps += static_cast<long>(out.back().steps.size());
  }
  return out;
}

}  // namespace

std::vector<Trajectory> rollout(SuperResolutionEnv& env, const Agent& agent, int n_episodes, std::uint64_t seed,
                                std::size_t first_scene) {
  if (n_episodes < 0) throw InvalidArgument("rollout: negative episode count");
  if (n_episodes == 0) return {};
  return collect(env, agent, n_episodes, -1, seed, [first_scene](std::size_t i) { return first_scene + i; });
}

std::vector<Trajectory> rollout_steps(SuperResolutionEnv& env, const Agent& agent, int min_steps,
                                      std::uint64_t seed) {
  if (min_steps <= 0) return {};
  Rng scene_rng(mix_seed(seed, 0x5ce9e));
  std::vector<std::size_t> order(std::max<std::size_t>(env.scenes().size(), 1));
  std::size_t next = order.size();
  auto pick = [&](std::size_t) {
    if (next == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      scene_rng.shuffle(std::span(order));
      next = 0;
    }
    return order[next++];
  };
  return collect(env, agent, -1, min_steps, seed, pick);
}

}  // namespace orl
