#include "orl/metrics.hpp"

#include "orl/random.hpp"

#include <algorithm>

namespace orl {

namespace {

ConvLayer random_layer(int in_channels, int out_channels, Rng& rng) {
  constexpr int k = 3;
  const double limit = std::sqrt(6.0 / (in_channels * k * k + out_channels * k * k));
  ConvLayer layer;
  layer.weights.assign(out_channels, std::vector<Eigen::MatrixXd>(in_channels));
  for (auto& per_out : layer.weights) {
    for (auto& kernel : per_out) {
      kernel.resize(k, k);
      for (Eigen::Index i = 0; i < kernel.size(); ++i) kernel.data()[i] = rng.uniform(-limit, limit);
    }
  }
  layer.bias = Eigen::VectorXd::Zero(out_channels);
  return layer;
}

FeatureMaps unit_normalized(const FeatureMaps& maps) {
  FeatureMaps out = maps;
  const Eigen::Index rows = maps.front().rows();
  const Eigen::Index cols = maps.front().cols();
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      double norm2 = 0.0;
      for (const auto& m : maps) norm2 += m(y, x) * m(y, x);
      const double inv = 1.0 / (std::sqrt(norm2) + 1e-10);
      for (auto& m : out) m(y, x) *= inv;
    }
  }
  return out;
}

}  // namespace

PerceptualProxy::PerceptualProxy() {
  Rng rng(kKernelSeed);
  layer1_ = random_layer(1, kChannels, rng);
  layer2_ = random_layer(kChannels, kChannels, rng);
}

const PerceptualProxy& PerceptualProxy::instance() {
  static const PerceptualProxy proxy;
  return proxy;
}

std::vector<FeatureMaps> PerceptualProxy::features(const Image& img) const {
  FeatureMaps input{(img.array() * 2.0 - 1.0).matrix()};
  FeatureMaps f1 = conv2d_valid(input, layer1_);
  relu_inplace(f1);
  FeatureMaps f2 = conv2d_valid(f1, layer2_);
  relu_inplace(f2);
  return {unit_normalized(f1), unit_normalized(f2)};
}

double PerceptualProxy::distance(const std::vector<FeatureMaps>& fa, const std::vector<FeatureMaps>& fb) {
  if (fa.size() != fb.size()) throw InvalidArgument("perceptual features come from different extractors");
  double total = 0.0;
  for (std::size_t l = 0; l < fa.size(); ++l) {
    if (fa[l].size() != fb[l].size() || fa[l].front().rows() != fb[l].front().rows() ||
        fa[l].front().cols() != fb[l].front().cols()) {
      throw InvalidArgument("perceptual feature shapes differ");
    }
    double layer_sum = 0.0;
    for (std::size_t c = 0; c < fa[l].size(); ++c) layer_sum += (fa[l][c] - fb[l][c]).squaredNorm();
    total += layer_sum / static_cast<double>(fa[l].front().size());
  }
  return total / static_cast<double>(fa.size());
}

double PerceptualProxy::distance(const Image& a, const Image& b) const {
  require_same_shape(a, b, "perceptual_distance");
  if (a.rows() < 5 || a.cols() < 5) throw InvalidArgument("perceptual_distance: image smaller than 5x5");
  return distance(features(a), features(b));
}

double perceptual_distance(const Image& a, const Image& b) { return PerceptualProxy::instance().distance(a, b); }

RewardBreakdown composite_reward(double psnr_db, double ssim_value, double perceptual, int steps_used,
                                 int total_steps, const RewardNormalization& norm) {
  if (total_steps < 1 || steps_used < 1 || steps_used > total_steps) {
    throw InvalidArgument("composite_reward: steps_used " + std::to_string(steps_used) + " outside [1, " +
                          std::to_string(total_steps) + "]");
  }
  if (!(norm.psnr_scale_db > 0.0) || !(norm.perceptual_scale > 0.0)) {
    throw InvalidArgument("composite_reward: normalization scales must be positive");
  }
  RewardBreakdown r;
  r.psnr_db = psnr_db;
  r.ssim = ssim_value;
  r.perceptual = perceptual;
  r.efficiency = 1.0 - static_cast<double>(steps_used) / static_cast<double>(total_steps);
  const double n_psnr = std::clamp(psnr_db / norm.psnr_scale_db, 0.0, 1.0);
  const double n_ssim = std::clamp(ssim_value, 0.0, 1.0);
  const double n_perc = std::clamp(perceptual / norm.perceptual_scale, 0.0, 1.0);
  r.composite = RewardWeights::psnr * n_psnr + RewardWeights::ssim * n_ssim +
                RewardWeights::perceptual * (1.0 - n_perc) + RewardWeights::efficiency * r.efficiency;
  return r;
}

}  // namespace orl
