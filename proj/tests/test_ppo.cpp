#include "orl/ppo.hpp"

#include "bandit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace orl;

namespace {

// A_t = sum_{k >= t} (gamma lambda)^(k - t) delta_k, written as a double loop.
Eigen::VectorXd brute_force_advantages(const Eigen::VectorXd& r, const Eigen::VectorXd& v, double g, double l) {
  const Eigen::Index n = r.size();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index k = t; k < n; ++k) {
      a[t] += std::pow(g * l, static_cast<double>(k - t)) * (r[k] + g * v[k + 1] - v[k]);
    }
  }
  return a;
}

Trajectory one_step(const Eigen::VectorXd& features, const AgentDecision& d, double reward) {
  Trajectory tr;
  tr.steps.push_back({features, d.raw_action, d.log_prob, d.value, reward, true});
  return tr;
}

PpoConfig small_config() {
  PpoConfig cfg;
  cfg.policy_hidden = {8};
  cfg.value_hidden = {8};
  cfg.initial_action_mean = {};
  return cfg;
}

}  // namespace

TEST(GaussianLogProb, AtMeanWithUnitSigma) {
  for (int d : {1, 3, 5}) {
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(d, -0.3, 0.4);
    EXPECT_NEAR(gaussian_log_prob(x, x, Eigen::VectorXd::Zero(d)), -0.5 * d * std::log(2.0 * std::numbers::pi),
                1e-14);
  }
}

TEST(GaussianLogProb, HandValue) {
  // N(1 | 0, 2^2): -0.5 (1/2)^2 - log 2 - 0.5 log(2 pi)
  const double expected = -0.125 - std::log(2.0) - 0.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(gaussian_log_prob(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1),
                                Eigen::VectorXd::Constant(1, std::log(2.0))),
              expected, 1e-14);
  EXPECT_THROW(gaussian_log_prob(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)),
               InvalidArgument);
}

TEST(GaussianPolicy, SampleIsReproducibleAndSquashed) {
  const GaussianPolicy p(4, 3, {8}, 0.5, 7);
  const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(4, -1, 1);
  Rng a(3), b(3);
  for (int i = 0; i < 20; ++i) {
    const PolicySample x = p.sample(f, a);
    const PolicySample y = p.sample(f, b);
    EXPECT_EQ(x.raw_action, y.raw_action);
    EXPECT_EQ(x.action, Eigen::VectorXd(x.raw_action.array().tanh()));
    EXPECT_LE(x.action.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_DOUBLE_EQ(x.log_prob, p.log_prob(f, x.raw_action));
  }
  EXPECT_THROW(p.mean(Eigen::VectorXd::Zero(5)), InvalidArgument);
}

TEST(GaussianPolicy, TinySigmaIsNearlyDeterministic) {
  GaussianPolicy p(4, 3, {8}, -10.0, 7);
  EXPECT_EQ(p.log_std(), Eigen::VectorXd::Constant(3, GaussianPolicy::kMinLogStd));
  const Eigen::VectorXd f = Eigen::VectorXd::Constant(4, 0.2);
  Rng rng(1);
  const PolicySample s = p.sample(f, rng);
  EXPECT_LT((s.action - p.deterministic_action(f)).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(GaussianPolicy(4, 3, {8}, 5.0, 7).log_std(), Eigen::VectorXd::Constant(3, GaussianPolicy::kMaxLogStd));
}

TEST(GaussianPolicy, InitialMeanBias) {
  const GaussianPolicy p(4, 3, {8}, -1.0, 7, {0.0, 0.5, -0.9});
  const Eigen::VectorXd a = p.deterministic_action(Eigen::VectorXd::Constant(4, 0.3));
  EXPECT_NEAR(a[1], std::tanh(std::tanh(std::atanh(0.5))), 0.02);
  EXPECT_LT(a[2], 0.0);
  EXPECT_THROW(GaussianPolicy(4, 3, {8}, -1.0, 7, {0.1}), InvalidArgument);
  EXPECT_THROW(GaussianPolicy(4, 3, {8}, -1.0, 7, {0.0, 1.0, 0.0}), InvalidArgument);
}

TEST(Gae, HandExamples) {
  GaeResult g = gae(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(2), 0.99, 0.95);
  EXPECT_EQ(g.advantages[0], 1.0);
  EXPECT_EQ(g.returns[0], 1.0);

  g = gae(Eigen::Vector2d(0, 1), Eigen::VectorXd::Zero(3), 0.99, 0.95);
  EXPECT_NEAR(g.advantages[0], 0.9405, 1e-15);
  EXPECT_EQ(g.advantages[1], 1.0);

  g = gae(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(5), 0.99, 0.95);
  EXPECT_EQ(g.advantages, Eigen::VectorXd::Zero(4));
  EXPECT_THROW(gae(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4), 0.99, 0.95), InvalidArgument);
}

TEST(Gae, MatchesBruteForceOnRandomTrajectories) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(60));
    const Eigen::VectorXd r = rng.normal_vector(n);
    Eigen::VectorXd v = rng.normal_vector(n + 1);
    if (trial % 2 == 0) v[n] = 0.0;
    const double g = rng.uniform(0.5, 1.0), l = rng.uniform(0.0, 1.0);
    const GaeResult out = gae(r, v, g, l);
    const Eigen::VectorXd expected = brute_force_advantages(r, v, g, l);
    EXPECT_LT((out.advantages - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((out.returns - (expected + v.head(n))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Surrogate, HandExamples) {
  EXPECT_EQ(clipped_surrogate(1.0, 2.0, 0.2), 2.0);
  EXPECT_NEAR(clipped_surrogate(1.5, 2.0, 0.2), 2.4, 1e-15);
  EXPECT_NEAR(clipped_surrogate(0.5, -1.0, 0.2), -0.8, 1e-15);
  EXPECT_THROW(clipped_surrogate(1.0, 1.0, 0.0), InvalidArgument);
}

TEST(Surrogate, UnitRatioReturnsAdvantage) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.normal() * 10, c = rng.uniform(0.01, 0.9);
    EXPECT_EQ(clipped_surrogate(1.0, a, c), a);
  }
}

TEST(Surrogate, IsPessimistic) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double r = rng.uniform(0.0, 3.0), a = rng.normal(), c = rng.uniform(0.05, 0.5);
    EXPECT_LE(clipped_surrogate(r, a, c), r * a + 1e-15);
  }
}

TEST(BuildBatch, NormalizesAndStacks) {
  const PpoAgent agent(3, 2, small_config());
  Rng rng(1);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd f = rng.normal_vector(3);
    trajs.push_back(one_step(f, agent.act(f, rng), static_cast<double>(i)));
  }
  const RolloutBatch b = build_batch(trajs, 0.99, 0.95);
  ASSERT_EQ(b.size(), 5);
  EXPECT_NEAR(b.advantages.mean(), 0.0, 1e-14);
  EXPECT_NEAR(b.advantages.squaredNorm() / 5.0, 1.0, 1e-12);
  EXPECT_EQ(b.features.col(2), trajs[2].steps[0].features);
  const RolloutBatch raw = build_batch(trajs, 0.99, 0.95, false);
  EXPECT_DOUBLE_EQ(raw.advantages[3], 3.0 - trajs[3].steps[0].value);
  EXPECT_THROW(build_batch(std::vector<Trajectory>{}, 0.99, 0.95), InvalidArgument);
  trajs[0].steps[0].done = false;
  EXPECT_THROW(build_batch(trajs, 0.99, 0.95), InvalidArgument);
}

TEST(PpoUpdate, ZeroAdvantageMovesOnlyByEntropy) {
  PpoConfig cfg = small_config();
  PpoAgent agent(3, 2, cfg);
  const NetParams before = agent.policy().mean_net().params();
  const Eigen::VectorXd ls_before = agent.policy().log_std();
  Rng rng(4);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 40; ++i) {
    const Eigen::VectorXd f = rng.normal_vector(3);
    trajs.push_back(one_step(f, agent.act(f, rng), 0.0));
  }
  RolloutBatch batch = build_batch(trajs, 0.99, 0.95);
  batch.advantages.setZero();
  const PpoStats stats = ppo_update(agent, batch, rng);
  EXPECT_EQ(agent.policy().mean_net().params(), before);
  // Entropy pushes log_std up by one Adam step (~lr) per minibatch.
  const Eigen::VectorXd moved = agent.policy().log_std() - ls_before;
  EXPECT_TRUE((moved.array() > 0.0).all());
  EXPECT_LE(moved.maxCoeff(), stats.minibatches * cfg.learning_rate * 1.01);
}

TEST(PpoUpdate, FirstPassHasUnitRatios) {
  PpoConfig cfg = small_config();
  cfg.update_epochs = 1;
  cfg.batch_size = 1000;
  PpoAgent agent(3, 2, cfg);
  Rng rng(8);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 30; ++i) {
    const Eigen::VectorXd f = rng.normal_vector(3);
    trajs.push_back(one_step(f, agent.act(f, rng), rng.normal()));
  }
  const PpoStats stats = ppo_update(agent, build_batch(trajs, 0.99, 0.95), rng);
  EXPECT_EQ(stats.minibatches, 1);
  EXPECT_EQ(stats.clip_fraction, 0.0);
  EXPECT_NEAR(stats.min_minibatch_ratio, 1.0, 1e-12);
}

TEST(PpoUpdate, EmptyBatchRejected) {
  PpoAgent agent(3, 2, small_config());
  Rng rng(1);
  EXPECT_THROW(ppo_update(agent, RolloutBatch{}, rng), InvalidArgument);
}

TEST(PpoUpdate, QuadraticBanditConvergesAndStaysStable) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const bandit::BanditRun run = bandit::run_bandit(seed, 200);
    EXPECT_NEAR(run.mean_action, bandit::kBanditTarget, 0.05) << seed;
    EXPECT_NEAR(run.deterministic_action, bandit::kBanditTarget, 0.05) << seed;
    EXPECT_LE(run.worst_ratio_gap, 2 * PpoConfig{}.clip) << seed;
  }
}

TEST(PpoAgent, ParamsRoundTrip) {
  const PpoConfig cfg = small_config();
  const PpoAgent agent(5, 3, cfg);
  const PpoAgent back = PpoAgent::from_params(agent.to_params(), cfg);
  const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(5, 0, 1);
  EXPECT_EQ(back.policy().mean(f), agent.policy().mean(f));
  EXPECT_EQ(back.policy().log_std(), agent.policy().log_std());
  EXPECT_EQ(back.value(f), agent.value(f));
  EXPECT_THROW(PpoAgent::from_params(NetParams{}, cfg), InvalidArgument);
}

TEST(PpoConfig, DefaultsFollowTable) {
  const PpoConfig cfg;
  EXPECT_EQ(cfg.learning_rate, 3e-4);
  EXPECT_EQ(cfg.gamma, 0.99);
  EXPECT_EQ(cfg.gae_lambda, 0.95);
  EXPECT_EQ(cfg.clip, 0.2);
  EXPECT_EQ(cfg.value_coef, 0.5);
  EXPECT_EQ(cfg.update_epochs, 4);
  EXPECT_EQ(cfg.batch_size, 64);
  EXPECT_EQ(cfg.train_epochs, 200);
  EXPECT_EQ(cfg.steps_per_epoch, 1000);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.entropy_coef, 0.01);
}
