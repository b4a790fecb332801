#include "orl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>

namespace orl {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;  // log(2 pi)

std::vector<int> net_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

NetParams rename_layers(const NetParams& params, std::string_view prefix) {
  NetParams out;
  for (const auto& [name, value] : params.with_prefix_stripped(prefix)) out.add("layer" + name, value);
  return out;
}

}  // namespace

double gaussian_log_prob(const Eigen::Ref<const Eigen::VectorXd>& raw, const Eigen::Ref<const Eigen::VectorXd>& mean,
                         const Eigen::Ref<const Eigen::VectorXd>& log_std) {
  if (raw.size() != mean.size() || raw.size() != log_std.size()) {
    throw InvalidArgument("gaussian_log_prob: dimension mismatch");
  }
  const Eigen::ArrayXd z = (raw - mean).array() / log_std.array().exp();
  return (-0.5 * z.square() - log_std.array() - 0.5 * kLogTwoPi).sum();
}

// --- GaussianPolicy ---------------------------------------------------------

GaussianPolicy::GaussianPolicy(int feature_dim, int action_dim, const std::vector<int>& hidden,
                               double initial_log_std, std::uint64_t seed, const std::vector<double>& initial_mean)
    : mean_net_(net_sizes(feature_dim, hidden, action_dim), Activation::tanh, OutputActivation::tanh, seed) {
  if (!initial_mean.empty() && static_cast<int>(initial_mean.size()) != action_dim) {
    throw InvalidArgument("initial action mean needs one entry per action dimension");
  }
  const int last = mean_net_.layer_count() - 1;
  mean_net_.params().at("layer" + std::to_string(last) + ".weight").data() *= 0.01;
  auto& bias = mean_net_.params().at("layer" + std::to_string(last) + ".bias").data();
  for (std::size_t i = 0; i < initial_mean.size(); ++i) {
    if (!(std::abs(initial_mean[i]) < 1.0)) throw InvalidArgument("initial action mean must lie in (-1, 1)");
    bias[static_cast<Eigen::Index>(i)] = std::atanh(initial_mean[i]);
  }
  log_std_.add("log_std", RealArray({static_cast<std::size_t>(action_dim)},
                                    Eigen::VectorXd::Constant(action_dim, initial_log_std)));
  clamp_log_std();
}

GaussianPolicy::GaussianPolicy(Mlp mean_net, const Eigen::VectorXd& log_std) : mean_net_(std::move(mean_net)) {
  if (log_std.size() != mean_net_.output_size()) throw InvalidArgument("log_std length must match the action size");
  log_std_.add("log_std", RealArray({static_cast<std::size_t>(log_std.size())}, log_std));
  clamp_log_std();
}

void GaussianPolicy::clamp_log_std() {
  auto& ls = log_std_.at("log_std").data();
  ls = ls.cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd);
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::Ref<const Eigen::VectorXd>& features) const {
  if (features.size() != feature_dim()) {
    throw InvalidArgument("policy expects " + std::to_string(feature_dim()) + " features, got " +
                          std::to_string(features.size()));
  }
  return mlp_forward(mean_net_, features);
}

PolicySample GaussianPolicy::sample(const Eigen::Ref<const Eigen::VectorXd>& features, Rng& rng) const {
  const Eigen::VectorXd mu = mean(features);
  const Eigen::VectorXd sigma = log_std().array().exp();
  PolicySample s;
  s.raw_action = mu + sigma.cwiseProduct(rng.normal_vector(mu.size()));
  s.action = s.raw_action.array().tanh();
  s.log_prob = gaussian_log_prob(s.raw_action, mu, log_std());
  return s;
}

double GaussianPolicy::log_prob(const Eigen::Ref<const Eigen::VectorXd>& features,
                                const Eigen::Ref<const Eigen::VectorXd>& raw_action) const {
  return gaussian_log_prob(raw_action, mean(features), log_std());
}

Eigen::VectorXd GaussianPolicy::deterministic_action(const Eigen::Ref<const Eigen::VectorXd>& features) const {
  return mean(features).array().tanh();
}

// --- advantages -------------------------------------------------------------

GaeResult gae(const Eigen::Ref<const Eigen::VectorXd>& rewards, const Eigen::Ref<const Eigen::VectorXd>& values,
              double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n + 1) {
    throw InvalidArgument("gae: need len(values) == len(rewards) + 1, got " + std::to_string(values.size()) +
                          " and " + std::to_string(n));
  }
  GaeResult out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  double running = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
  }
  out.returns = out.advantages + values.head(n);
  return out;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  if (!(clip > 0.0)) throw InvalidArgument("clipped_surrogate: clip must be positive");
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

RolloutBatch build_batch(std::span<const Trajectory> trajectories, double gamma, double lambda, bool normalize) {
  Eigen::Index total = 0;
  for (const auto& tr : trajectories) total += static_cast<Eigen::Index>(tr.steps.size());
  if (total == 0) throw InvalidArgument("build_batch: no transitions");

  const auto& first = trajectories.front().steps.front();
  RolloutBatch b;
  b.features.resize(first.features.size(), total);
  b.raw_actions.resize(first.raw_action.size(), total);
  b.old_log_probs.resize(total);
  b.advantages.resize(total);
  b.returns.resize(total);

  Eigen::Index col = 0;
  for (const auto& tr : trajectories) {
    const auto n = static_cast<Eigen::Index>(tr.steps.size());
    Eigen::VectorXd rewards(n);
    Eigen::VectorXd values = Eigen::VectorXd::Zero(n + 1);  // terminal bootstrap is 0
    for (Eigen::Index i = 0; i < n; ++i) {
      const Transition& s = tr.steps[static_cast<std::size_t>(i)];
      rewards[i] = s.reward;
      values[i] = s.value;
      b.features.col(col + i) = s.features;
      b.raw_actions.col(col + i) = s.raw_action;
      b.old_log_probs[col + i] = s.log_prob;
    }
    if (n > 0 && !tr.steps.back().done) throw InvalidArgument("build_batch: trajectory does not end in done");
    GaeResult g = gae(rewards, values, gamma, lambda);
    b.advantages.segment(col, n) = g.advantages;
    b.returns.segment(col, n) = g.returns;
    col += n;
  }

  if (normalize) {
    const double mean = b.advantages.mean();
    b.advantages.array() -= mean;
    const double sd = std::sqrt(b.advantages.squaredNorm() / static_cast<double>(total));
    if (sd > 1e-8) b.advantages /= sd;
  }
  return b;
}

// --- PpoAgent ---------------------------------------------------------------

PpoAgent::PpoAgent(int feature_dim, int action_dim, const PpoConfig& cfg)
    : PpoAgent(GaussianPolicy(feature_dim, action_dim, cfg.policy_hidden, cfg.initial_log_std, mix_seed(cfg.seed, 1),
                              cfg.initial_action_mean),
               Mlp(net_sizes(feature_dim, cfg.value_hidden, 1), Activation::tanh, OutputActivation::none,
                   mix_seed(cfg.seed, 2)),
               cfg) {}

PpoAgent::PpoAgent(GaussianPolicy policy, Mlp value_net, const PpoConfig& cfg)
    : cfg_(cfg), policy_(std::move(policy)), value_(std::move(value_net)) {
  if (value_.input_size() != policy_.feature_dim() || value_.output_size() != 1) {
    throw InvalidArgument("value network must map the policy features to one output");
  }
  mean_adam_ = AdamState::for_params(policy_.mean_net().params(), cfg.learning_rate);
  log_std_adam_ = AdamState::for_params(policy_.log_std_params(), cfg.learning_rate);
  value_adam_ = AdamState::for_params(value_.params(), cfg.learning_rate);
}

AgentDecision PpoAgent::act(const Eigen::VectorXd& features, Rng& rng) const {
  PolicySample s = policy_.sample(features, rng);
  return {std::move(s.raw_action), std::move(s.action), s.log_prob, value(features)};
}

double PpoAgent::value(const Eigen::Ref<const Eigen::VectorXd>& features) const {
  return mlp_forward(value_, features)[0];
}

NetParams PpoAgent::to_params() const {
  NetParams out;
  Eigen::VectorXd meta(2);
  meta << policy_.feature_dim(), policy_.action_dim();
  out.add("policy.meta", RealArray({2}, meta));
  out.append_prefixed("policy.", policy_.mean_net().params());
  out.add("policy.log_std", policy_.log_std_params().at("log_std"));
  out.append_prefixed("value.", value_.params());
  return out;
}

PpoAgent PpoAgent::from_params(const NetParams& params, const PpoConfig& cfg) {
  if (!params.contains("policy.meta") || !params.contains("policy.log_std")) {
    throw InvalidArgument("checkpoint has no policy frames");
  }
  Mlp mean_net = Mlp::from_params(rename_layers(params, "policy.layer"), Activation::tanh, OutputActivation::tanh);
  Mlp value_net = Mlp::from_params(rename_layers(params, "value.layer"), Activation::tanh, OutputActivation::none);
  const auto& meta = params.at("policy.meta").data();
  if (meta.size() != 2 || meta[0] != mean_net.input_size() || meta[1] != mean_net.output_size()) {
    throw InvalidArgument("policy.meta does not match the policy network");
  }
  return PpoAgent(GaussianPolicy(std::move(mean_net), params.at("policy.log_std").data()), std::move(value_net), cfg);
}

PpoStats ppo_update(PpoAgent& agent, const RolloutBatch& batch, Rng& rng) {
  const PpoConfig& cfg = agent.cfg_;
  const Eigen::Index n = batch.size();
  if (n == 0) throw InvalidArgument("ppo_update: empty batch");
  if (cfg.batch_size <= 0 || cfg.update_epochs < 0) throw InvalidArgument("ppo_update: bad batch size or epochs");
  if (batch.features.rows() != agent.policy_.feature_dim()) throw InvalidArgument("ppo_update: feature size mismatch");

  GaussianPolicy& policy = agent.policy_;
  const Eigen::Index act_dim = policy.action_dim();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  PpoStats stats;
  stats.min_minibatch_ratio = std::numeric_limits<double>::infinity();
  stats.max_minibatch_ratio = -std::numeric_limits<double>::infinity();
  double clipped = 0.0;
  double samples_seen = 0.0;

  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index m = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd x(batch.features.rows(), m);
      Eigen::MatrixXd raw(act_dim, m);
      Eigen::VectorXd old_lp(m), adv(m), ret(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Index k = order[static_cast<std::size_t>(start + j)];
        x.col(j) = batch.features.col(k);
        raw.col(j) = batch.raw_actions.col(k);
        old_lp[j] = batch.old_log_probs[k];
        adv[j] = batch.advantages[k];
        ret[j] = batch.returns[k];
      }

      MlpTape mean_tape;
      const Eigen::MatrixXd mu = policy.mean_net().forward(x, &mean_tape);
      const Eigen::VectorXd ls = policy.log_std();
      const Eigen::ArrayXd sigma = ls.array().exp();
      const Eigen::ArrayXXd z = (raw - mu).array().colwise() / sigma;

      Eigen::MatrixXd dmean(act_dim, m);
      Eigen::VectorXd dls = Eigen::VectorXd::Zero(act_dim);
      double policy_loss = 0.0;
      double ratio_sum = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double lp = (-0.5 * z.col(j).square() - ls.array() - 0.5 * kLogTwoPi).sum();
        const double r = std::exp(lp - old_lp[j]);
        ratio_sum += r;
        const double clamped = std::clamp(r, 1.0 - cfg.clip, 1.0 + cfg.clip);
        policy_loss -= std::min(r * adv[j], clamped * adv[j]);
        if (std::abs(r - 1.0) > cfg.clip) clipped += 1.0;
        // d(-surrogate)/d(log_prob) for the unclipped branch; 0 when the clamp is active.
        const double g = r * adv[j] <= clamped * adv[j] ? -r * adv[j] / static_cast<double>(m) : 0.0;
        dmean.col(j) = g * (z.col(j) / sigma).matrix();
        dls += g * (z.col(j).square() - 1.0).matrix();
      }
      dls.array() -= cfg.entropy_coef;  // entropy term: d(-c H)/d(log_std) = -c per dimension

      MlpTape value_tape;
      const Eigen::MatrixXd v = agent.value_.forward(x, &value_tape);
      const Eigen::RowVectorXd verr = v.row(0) - ret.transpose();
      const double value_loss = verr.squaredNorm() / static_cast<double>(m);
      const Eigen::MatrixXd dv = (2.0 * cfg.value_coef / static_cast<double>(m)) * verr;

      MlpGradients mean_grads = policy.mean_net().backward(mean_tape, dmean);
      MlpGradients value_grads = agent.value_.backward(value_tape, dv);
      NetParams ls_grads = policy.log_std_params().zeros_like();
      ls_grads.at("log_std").data() = dls;

      adam_step(policy.mean_net().params(), mean_grads.params, agent.mean_adam_);
      adam_step(policy.log_std_params(), ls_grads, agent.log_std_adam_);
      policy.clamp_log_std();
      adam_step(agent.value_.params(), value_grads.params, agent.value_adam_);

      const double mean_ratio = ratio_sum / static_cast<double>(m);
      stats.min_minibatch_ratio = std::min(stats.min_minibatch_ratio, mean_ratio);
      stats.max_minibatch_ratio = std::max(stats.max_minibatch_ratio, mean_ratio);
      stats.policy_loss += policy_loss / static_cast<double>(m);
      stats.value_loss += value_loss;
      stats.entropy += (ls.array() + 0.5 * (1.0 + kLogTwoPi)).sum();
      samples_seen += static_cast<double>(m);
      ++stats.minibatches;
    }
  }

  if (stats.minibatches > 0) {
    const double k = stats.minibatches;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction = clipped / samples_seen;
  } else {
    stats.min_minibatch_ratio = stats.max_minibatch_ratio = 1.0;
  }
  return stats;
}

// --- training loop ----------------------------------------------------------

TrainResult train(SuperResolutionEnv& env, const PpoConfig& cfg) {
  if (cfg.train_epochs < 0 || cfg.steps_per_epoch <= 0) throw InvalidArgument("train: bad epoch or step count");
  TrainResult result{PpoAgent(env.feature_dim(), kActionDim, cfg), {}};
  PpoAgent& agent = result.agent;
  const std::size_t window = static_cast<std::size_t>(std::max(1, cfg.reward_smoothing_window));
  std::deque<double> recent;
  double recent_sum = 0.0;

  for (int epoch = 0; epoch < cfg.train_epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(cfg.seed, 0x1000 + static_cast<std::uint64_t>(epoch));
    std::vector<Trajectory> trajs = rollout_steps(env, agent, cfg.steps_per_epoch, epoch_seed);
    const RolloutBatch batch = build_batch(trajs, cfg.gamma, cfg.gae_lambda);
    Rng update_rng(mix_seed(epoch_seed, 0x0bda7e));
    const PpoStats stats = ppo_update(agent, batch, update_rng);

    double reward = 0.0;
    for (const auto& tr : trajs) reward += tr.total_reward();
    reward /= static_cast<double>(trajs.size());
    recent.push_back(reward);
    recent_sum += reward;
    if (recent.size() > window) {
      recent_sum -= recent.front();
      recent.pop_front();
    }
    result.curve.push_back({epoch, recent_sum / static_cast<double>(recent.size()), reward, stats.policy_loss,
                            stats.value_loss, stats.clip_fraction});
  }
  return result;
}

}  // namespace orl
