#include "orl/diffusion.hpp"
#include "orl/scenes.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace orl;

namespace {

Latent constant_latent(double v, int side = 2, int t = 0) {
  return Latent::from_flat(Eigen::VectorXd::Constant(side * side, v), side, t);
}

Denoiser small_denoiser(std::uint64_t seed = 1) { return Denoiser(2, {8}, Activation::tanh, seed); }

}  // namespace

TEST(Schedule, TwoStepHandProduct) {
  const NoiseSchedule s = make_schedule(2, 0.1, 0.2);
  EXPECT_DOUBLE_EQ(s.beta(1), 0.1);
  EXPECT_DOUBLE_EQ(s.beta(2), 0.2);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.9);
  EXPECT_NEAR(s.alpha_bar(2), 0.72, 1e-15);
}

TEST(Schedule, DefaultIsDecreasingAndNearGaussian) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  double ab = 1.0;
  for (int t = 1; t <= 50; ++t) {
    ab *= 1.0 - s.beta(t);
    EXPECT_DOUBLE_EQ(s.alpha_bar(t), ab);
    if (t > 1) {
      EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
      EXPECT_GE(s.beta(t), s.beta(t - 1));
    }
  }
  EXPECT_LT(s.alpha_bar(50), 0.05);
}

TEST(Schedule, RejectsInvalidRanges) {
  EXPECT_THROW(make_schedule(1, 0.1, 0.2), InvalidArgument);
  EXPECT_THROW(make_schedule(10, 0.0, 0.2), InvalidArgument);
  EXPECT_THROW(make_schedule(10, 0.3, 0.2), InvalidArgument);
  EXPECT_THROW(make_schedule(10, 0.1, 1.0), InvalidArgument);
  EXPECT_THROW(make_schedule(10, 0.1, 0.2).require_step(11), InvalidArgument);
}

TEST(ForwardNoise, HandSquareRoots) {
  const NoiseSchedule s = make_schedule(2, 0.1, 0.2);  // alpha_bar_2 = 0.72
  Latent z = forward_noise(constant_latent(1.0), 2, Eigen::VectorXd::Zero(4), s);
  EXPECT_NEAR(z.values(0, 0), std::sqrt(0.72), 1e-15);
  EXPECT_NEAR(z.values(0, 0), 0.8485, 1e-4);
  EXPECT_EQ(z.t, 2);
  z = forward_noise(constant_latent(0.0), 2, Eigen::VectorXd::Ones(4), s);
  EXPECT_NEAR(z.values(1, 1), std::sqrt(0.28), 1e-15);
  EXPECT_NEAR(z.values(1, 1), 0.5292, 1e-4);
}

TEST(ForwardNoise, NoNoiseLimitAndErrors) {
  const NoiseSchedule s = make_schedule(10, 1e-8, 1e-8);
  const Latent z = forward_noise(constant_latent(0.3), 1, Eigen::VectorXd::Zero(4), s);
  EXPECT_NEAR(z.values(0, 0), 0.3, 1e-8);
  EXPECT_THROW(forward_noise(constant_latent(0.3), 0, Eigen::VectorXd::Zero(4), s), InvalidArgument);
  EXPECT_THROW(forward_noise(constant_latent(0.3), 1, Eigen::VectorXd::Zero(3), s), InvalidArgument);
}

TEST(ForwardNoise, IteratedStepsMatchClosedFormMoments) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const double z0 = 0.6;
  const int trials = 10000;
  Rng rng(123);
  for (int k : {10, 25, 50}) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < trials; ++i) {
      Latent z = constant_latent(z0, 1);
      for (int t = 1; t <= k; ++t) z = forward_step(z, rng.normal_vector(1), s);
      sum += z.values(0, 0);
      sq += z.values(0, 0) * z.values(0, 0);
    }
    const double mean = sum / trials;
    const double var = sq / trials - mean * mean;
    const double expected_var = 1.0 - s.alpha_bar(k);
    EXPECT_LT(std::abs(mean - std::sqrt(s.alpha_bar(k)) * z0), 3.0 * std::sqrt(expected_var / trials)) << k;
    EXPECT_LT(std::abs(var - expected_var), 0.05 * expected_var) << k;
  }
}

TEST(Embedding, SinusoidalLayout) {
  const Eigen::VectorXd e = timestep_embedding(3);
  ASSERT_EQ(e.size(), 8);
  EXPECT_DOUBLE_EQ(e[0], std::sin(3.0));
  EXPECT_DOUBLE_EQ(e[4], std::cos(3.0));
  EXPECT_NEAR(e[1], std::sin(3.0 * std::pow(1000.0, -0.25)), 1e-15);
  EXPECT_THROW(timestep_embedding(1, 3), InvalidArgument);
}

TEST(StepAction, SquashesIntoUnitBox) {
  const StepAction a = StepAction{2.0, -5.0, 0.3}.squashed();
  EXPECT_EQ(a.mean_shift, 1.0);
  EXPECT_EQ(a.log_scale, -1.0);
  EXPECT_EQ(a.stop_gate, 0.3);
  EXPECT_TRUE(a.stops());
  EXPECT_FALSE(StepAction{}.stops());
  EXPECT_THROW(StepAction::from_vector(Eigen::VectorXd::Zero(2)), InvalidArgument);
}

TEST(ReverseStep, ZeroActionIsTextbookDdpmBitForBit) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const Denoiser den = small_denoiser();
  Rng rng(4);
  for (int t : {1, 2, 17, 50}) {
    const Latent zt = Latent::from_flat(rng.normal_vector(4), 2, t);
    const Latent c = Latent::from_flat(rng.normal_vector(4), 2, 0);
    const Eigen::VectorXd xi = rng.normal_vector(4);
    const Eigen::VectorXd eps = den.predict_noise(zt.flat(), t, c.flat());
    Eigen::VectorXd textbook =
        (zt.flat() - (s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t))) * eps) / std::sqrt(s.alpha(t));
    if (t > 1) textbook += std::sqrt(s.beta(t)) * xi;
    const Latent next = reverse_step(zt, den, s, c, StepAction{}, xi);
    EXPECT_EQ(next.t, t - 1);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(next.flat()[i], textbook[i]) << "t=" << t;
  }
}

TEST(ReverseStep, LogScaleScalesNoise) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const Latent zt = constant_latent(0.2, 2, 20);
  const Eigen::VectorXd eps = Eigen::VectorXd::Constant(4, 0.1);
  const Eigen::VectorXd xi = Eigen::VectorXd::Ones(4);
  const Latent base = reverse_step_from_eps(zt, eps, s, StepAction{}, Eigen::VectorXd::Zero(4));
  const Latent plain = reverse_step_from_eps(zt, eps, s, StepAction{}, xi);
  const Latent damped = reverse_step_from_eps(zt, eps, s, StepAction{0.0, -1.0, 0.0}, xi);
  const double ratio = (damped.flat() - base.flat())[0] / (plain.flat() - base.flat())[0];
  EXPECT_NEAR(ratio, std::exp(-0.5), 1e-12);
  EXPECT_NEAR(ratio, 0.6065, 1e-4);

  const Latent shifted = reverse_step_from_eps(zt, eps, s, StepAction{1.0, 0.0, 0.0}, Eigen::VectorXd::Zero(4));
  EXPECT_NEAR((shifted.flat() - base.flat())[0], 0.5 * std::sqrt(s.beta(20)), 1e-15);
}

TEST(ReverseStep, FinalStepIsDeterministic) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const Latent z1 = constant_latent(0.4, 2, 1);
  const Eigen::VectorXd eps = Eigen::VectorXd::Constant(4, -0.3);
  const Latent a = reverse_step_from_eps(z1, eps, s, StepAction{0.0, 1.0, 0.0}, Eigen::VectorXd::Constant(4, 5.0));
  const Latent b = reverse_step_from_eps(z1, eps, s, StepAction{0.0, -1.0, 0.0}, Eigen::VectorXd::Zero(4));
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.t, 0);
}

TEST(ReverseStep, TrueNoiseInvertsForwardStepAtTimestepOne) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  Rng rng(8);
  const Latent z0 = Latent::from_flat(rng.normal_vector(4), 2, 0);
  const Eigen::VectorXd eps = rng.normal_vector(4);
  const Latent z1 = forward_step(z0, eps, s);
  const Latent back = reverse_step_from_eps(z1, eps, s, StepAction{}, rng.normal_vector(4));
  EXPECT_TRUE(back.values.isApprox(z0.values, 1e-13));
}

TEST(ReverseStep, TrueNoiseGivesExactCleanPrediction) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  Rng rng(9);
  const Latent z0 = Latent::from_flat(rng.normal_vector(4), 2, 0);
  for (int t : {1, 10, 50}) {
    const Eigen::VectorXd eps = rng.normal_vector(4);
    const Latent zt = forward_noise(z0, t, eps, s);
    EXPECT_TRUE(predict_clean_from_eps(zt, eps, s).values.isApprox(z0.values, 1e-12)) << t;
  }
}

TEST(ReverseStep, RejectsBadInputs) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const Denoiser den = small_denoiser();
  EXPECT_THROW(reverse_step(constant_latent(0.0, 2, 0), den, s, constant_latent(0.0), StepAction{},
                            Eigen::VectorXd::Zero(4)),
               InvalidArgument);
  EXPECT_THROW(reverse_step(constant_latent(0.0, 2, 3), den, s, constant_latent(0.0), StepAction{},
                            Eigen::VectorXd::Zero(3)),
               InvalidArgument);
}

TEST(Sampler, NoPolicyRunsAllSteps) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const Denoiser den = small_denoiser();
  const SampleResult r = sample(constant_latent(0.1), den, s, nullptr, 3);
  EXPECT_EQ(r.steps_used, 50);
  EXPECT_EQ(r.latent.t, 0);
  const SampleResult again = sample(constant_latent(0.1), den, s, nullptr, 3);
  EXPECT_EQ(r.latent.values, again.latent.values);
}

TEST(Sampler, ImmediateStopUsesOneStepAndCleanPrediction) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const Denoiser den = small_denoiser();
  const Latent c = constant_latent(0.1);
  auto stop = [](const Latent&, const Latent&) { return StepAction{0.0, 0.0, 1.0}; };
  const SampleResult r = sample(c, den, s, stop, 3);
  EXPECT_EQ(r.steps_used, 1);
  ReverseSampler probe(den, s, c, 3);
  EXPECT_EQ(r.latent.values, predict_clean(probe.state(), den, s, c).values);
}

TEST(Sampler, ZeroPolicyMatchesPlainSampler) {
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const Denoiser den = small_denoiser();
  auto zero = [](const Latent&, const Latent&) { return StepAction{}; };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_EQ(sample(constant_latent(-0.2), den, s, zero, seed).latent.values,
              sample(constant_latent(-0.2), den, s, nullptr, seed).latent.values);
  }
}

TEST(Sampler, ProtocolErrorAfterDone) {
  const NoiseSchedule s = make_schedule(2, 0.1, 0.2);
  const Denoiser den = small_denoiser();
  ReverseSampler sampler(den, s, constant_latent(0.0), 1);
  sampler.advance({});
  sampler.advance({});
  EXPECT_TRUE(sampler.done());
  EXPECT_THROW(sampler.advance({}), ProtocolError);
}

TEST(Denoiser, ParamsRoundTrip) {
  const Denoiser den = small_denoiser(5);
  const Denoiser back = Denoiser::from_params(den.to_params());
  EXPECT_EQ(back.latent_side(), 2);
  EXPECT_EQ(back.net().params(), den.net().params());
  EXPECT_THROW(Denoiser::from_params(NetParams{}), InvalidArgument);
}

TEST(Denoiser, InputLayout) {
  const Denoiser den = small_denoiser();
  Eigen::VectorXd col(den.net().input_size());
  den.assemble_input(Eigen::VectorXd::Constant(4, 1.0), 7, Eigen::VectorXd::Constant(4, 2.0), col);
  EXPECT_EQ(col.head(4), Eigen::VectorXd::Constant(4, 1.0));
  EXPECT_EQ(col.segment(4, 8), timestep_embedding(7));
  EXPECT_EQ(col.tail(4), Eigen::VectorXd::Constant(4, 2.0));
}

namespace {

std::vector<ImagePair> tiny_dataset() {
  std::vector<ImagePair> data;
  for (SceneCategory cat : kAllCategories) {
    for (int i = 0; i < 4; ++i) {
      const Image hr = generate_scene(cat, 100 + static_cast<std::uint64_t>(i), 16);
      data.push_back({hr, degrade(hr, 4, 0.02, static_cast<std::uint64_t>(i))});
    }
  }
  return data;
}

}  // namespace

TEST(TrainDenoiser, UntrainedLossNearOneAndTrainingReducesIt) {
  const auto data = tiny_dataset();
  DenoiserTrainConfig cfg;
  cfg.head = DenoiserHead::epsilon;
  cfg.latent_side = 4;
  cfg.hidden = {64, 64};
  cfg.steps = 400;
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const DenoiserTrainResult r = train_denoiser(data, s, cfg);
  ASSERT_EQ(r.loss_history.size(), 400u);
  double first = 0.0;
  for (int i = 0; i < 10; ++i) first += r.loss_history[static_cast<std::size_t>(i)] / 10;
  EXPECT_NEAR(first, 1.0, 0.35);
  EXPECT_LT(r.smoothed_final_loss(), 0.8);
}

TEST(TrainDenoiser, ResidualHeadStartsBelowPredictZero) {
  const auto data = tiny_dataset();
  DenoiserTrainConfig cfg;
  cfg.latent_side = 4;
  cfg.hidden = {64, 64};
  cfg.steps = 400;
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const DenoiserTrainResult r = train_denoiser(data, s, cfg);
  EXPECT_EQ(r.denoiser.head().kind, DenoiserHead::residual);
  EXPECT_GT(r.denoiser.head().prior_scale, 0.0);
  double first = 0.0;
  for (int i = 0; i < 10; ++i) first += r.loss_history[static_cast<std::size_t>(i)] / 10;
  EXPECT_LT(first, 0.8);
  EXPECT_LT(r.smoothed_final_loss(), first);
}

TEST(TrainDenoiser, FixedSeedIsBitReproducible) {
  const auto data = tiny_dataset();
  DenoiserTrainConfig cfg;
  cfg.latent_side = 4;
  cfg.hidden = {16};
  cfg.steps = 50;
  const NoiseSchedule s = make_schedule(50, 1e-3, 0.12);
  const DenoiserTrainResult a = train_denoiser(data, s, cfg);
  const DenoiserTrainResult b = train_denoiser(data, s, cfg);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(a.denoiser.net().params(), b.denoiser.net().params());
}

TEST(TrainDenoiser, RejectsEmptyDataset) {
  EXPECT_THROW(train_denoiser({}, make_schedule(50, 1e-3, 0.12), DenoiserTrainConfig{}), InvalidArgument);
}
