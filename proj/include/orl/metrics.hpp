#pragma once

#include "orl/conv.hpp"
#include "orl/image.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

namespace orl {

inline constexpr double kPsnrCapDb = 100.0;

inline double psnr_from_mse(double mse) {
  if (mse < 1e-10) return kPsnrCapDb;
  return -10.0 * std::log10(mse);
}

template <typename DerivedA, typename DerivedB>
double mean_squared_error(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  require_same_shape(a, b, "mean_squared_error");
  if (a.size() == 0) throw InvalidArgument("mean_squared_error: empty images");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

/// PSNR in dB for unit peak value, capped at kPsnrCapDb.
template <typename DerivedA, typename DerivedB>
double psnr(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  return psnr_from_mse(mean_squared_error(a, b));
}

inline constexpr int kSsimWindow = 7;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over every 7x7 uniform window (stride 1, no padding), dynamic
/// range 1. Window moments use population normalization.
template <typename DerivedA, typename DerivedB>
double ssim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  require_same_shape(a, b, "ssim");
  if (a.rows() < kSsimWindow || a.cols() < kSsimWindow) throw InvalidArgument("ssim: image smaller than 7x7");
  const double n = kSsimWindow * kSsimWindow;
  double total = 0.0;
  Eigen::Index windows = 0;
  for (Eigen::Index r = 0; r + kSsimWindow <= a.rows(); ++r) {
    for (Eigen::Index c = 0; c + kSsimWindow <= a.cols(); ++c) {
      const auto wa = a.block(r, c, kSsimWindow, kSsimWindow).array();
      const auto wb = b.block(r, c, kSsimWindow, kSsimWindow).array();
      const double mu_a = wa.sum() / n;
      const double mu_b = wb.sum() / n;
      const double var_a = (wa - mu_a).square().sum() / n;
      const double var_b = (wb - mu_b).square().sum() / n;
      const double cov = ((wa - mu_a) * (wb - mu_b)).sum() / n;
      total += ((2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

/// Stand-in for LPIPS: two fixed random 3x3 conv layers (1->8->8 channels,
/// ReLU). Features are unit-normalized across channels at every position;
/// a layer's distance is the mean over positions of the squared Euclidean
/// difference, and the result averages the two layers.
class PerceptualProxy {
 public:
  static constexpr int kChannels = 8;
  static constexpr std::uint64_t kKernelSeed = 0x4c50495053ULL;

  PerceptualProxy();

  // Shared instance with the fixed kernels.
  static const PerceptualProxy& instance();

  // Normalized feature maps of both layers, reusable across comparisons.
  std::vector<FeatureMaps> features(const Image& img) const;

  double distance(const Image& a, const Image& b) const;
  static double distance(const std::vector<FeatureMaps>& fa, const std::vector<FeatureMaps>& fb);

 private:
  ConvLayer layer1_;
  ConvLayer layer2_;
};

double perceptual_distance(const Image& a, const Image& b);

/// Weights of the composite reward. total() pairs the terms so the double sum
/// is exactly 1; plain left-to-right addition lands one ulp below.
struct RewardWeights {
  static constexpr double psnr = 0.4;
  static constexpr double ssim = 0.3;
  static constexpr double perceptual = 0.2;
  static constexpr double efficiency = 0.1;

  static constexpr double total() { return (psnr + ssim) + (perceptual + efficiency); }
};

struct RewardNormalization {
  double psnr_scale_db = 50.0;
  double perceptual_scale = 0.5;
};

struct RewardBreakdown {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double perceptual = 0.0;
  double efficiency = 0.0;
  double composite = 0.0;
};

/// composite = 0.4 n_psnr + 0.3 n_ssim + 0.2 (1 - n_perc) + 0.1 efficiency,
/// n_psnr = clamp(psnr/psnr_scale), n_ssim = clamp(ssim), n_perc = clamp(perc/perc_scale),
/// efficiency = 1 - steps_used / total_steps.
RewardBreakdown composite_reward(double psnr_db, double ssim_value, double perceptual, int steps_used,
                                 int total_steps, const RewardNormalization& norm = {});

}  // namespace orl
