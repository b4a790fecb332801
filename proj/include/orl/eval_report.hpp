#pragma once

#include "orl/diffusion.hpp"
#include "orl/metrics.hpp"
#include "orl/ppo.hpp"
#include "orl/scenes.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace orl {

enum class EvalMode { baseline, rl };

std::string_view mode_name(EvalMode mode);

struct EvalConfig {
  int image_side = 32;
  int latent_side = 8;
  RewardNormalization reward_norm;
  std::uint64_t seed = 42;
  int threads = 1;
};

/// Per-image outcome of one evaluation run.
struct ImageResult {
  SceneCategory category{};
  std::uint64_t scene_seed = 0;
  RewardBreakdown metrics;
  int steps_used = 0;
};

struct CategoryResult {
  SceneCategory category{};
  EvalMode mode = EvalMode::baseline;
  int n_images = 0;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
  double mean_lpips_proxy = 0.0;
  double mean_steps_used = 0.0;
  double mean_composite = 0.0;
};

struct EvalResult {
  EvalMode mode = EvalMode::baseline;
  std::vector<ImageResult> images;       // sorted by (category, scene seed)
  std::vector<CategoryResult> categories;  // categories present, in table order

  double mean_composite() const;
};

/// Samples every test pair (zero actions without a policy, the policy's
/// deterministic action otherwise), decodes and scores it against the HR
/// image. Image i uses sampler seed mix_seed(cfg.seed, pair.seed), so the
/// result does not depend on the order of `test`.
EvalResult evaluate(const Denoiser& den, const NoiseSchedule& sched, const GaussianPolicy* policy,
                    std::span<const ScenePair> test, const EvalConfig& cfg);

/// Means over images of one category; summation runs in scene-seed order.
std::vector<CategoryResult> aggregate(std::vector<ImageResult>& images, EvalMode mode);

struct CategoryDelta {
  SceneCategory category{};
  double delta_psnr_db = 0.0;
  double delta_ssim = 0.0;
  double delta_lpips_proxy = 0.0;
};

struct DeltaTable {
  std::vector<CategoryDelta> rows;
  int psnr_wins = 0;  // categories with delta_psnr_db > 0
};

/// rl - baseline per category.
DeltaTable compare(std::span<const CategoryResult> baseline, std::span<const CategoryResult> rl);

/// Fixed-point with 4 decimals; "-0.0000" is written as "0.0000".
std::string format_fixed4(double value);

struct ReportFiles {
  std::filesystem::path table;
  std::filesystem::path deltas;  // empty when there is no RL result
  std::filesystem::path curve;
  std::filesystem::path summary;
};

/// Writes table2_analog.csv, deltas.csv (when rl is given), reward_curve.csv
/// and summary.csv into out_dir.
ReportFiles write_reports(const EvalResult& baseline, const EvalResult* rl, std::span<const CurvePoint> curve,
                          const std::filesystem::path& out_dir);

void write_reward_curve(std::span<const CurvePoint> curve, const std::filesystem::path& path);
std::vector<CurvePoint> read_reward_curve(const std::filesystem::path& path);

}  // namespace orl
