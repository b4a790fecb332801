#pragma once

#include "orl/diffusion.hpp"
#include "orl/eval_report.hpp"
#include "orl/metrics.hpp"
#include "orl/ppo.hpp"
#include "orl/scenes.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orl {

/// Every tunable of the four pipeline stages.
struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "out";
  int threads = 1;

  int n_per_category = 25;
  CorpusConfig corpus;
  int latent_side = 8;

  int diffusion_steps = 50;
  double beta_min = 1e-3;
  double beta_max = 0.12;

  DenoiserTrainConfig denoiser;
  PpoConfig ppo;
  RewardNormalization reward_norm;

  // Applies one `key = value` setting; unknown keys and bad values throw ConfigError.
  void set(std::string_view key, std::string_view value);
  // Propagates shared fields (seed, latent side) into the per-stage configs.
  void sync();

  NoiseSchedule schedule() const;
  EnvConfig env_config() const;
  EvalConfig eval_config() const;

  // One `key = value` line per setting, in a fixed order.
  std::string render() const;
  static std::vector<std::string> keys();
};

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

struct StagePaths {
  std::filesystem::path corpus;
  std::filesystem::path denoiser;
  std::filesystem::path rl;
  std::filesystem::path eval;

  explicit StagePaths(const std::filesystem::path& out);
  std::filesystem::path denoiser_checkpoint() const { return denoiser / "denoiser.orlm"; }
  std::filesystem::path policy_checkpoint() const { return rl / "policy.orlm"; }
};

struct PretrainOutcome {
  std::vector<double> loss_history;
  double smoothed_final_loss = 0.0;
};

struct TrainRlOutcome {
  std::vector<CurvePoint> curve;
};

struct EvaluateOutcome {
  EvalResult baseline;
  std::optional<EvalResult> rl;
  std::optional<DeltaTable> deltas;
};

void cmd_gen_data(const RunConfig& cfg, bool overwrite);
PretrainOutcome cmd_pretrain(const RunConfig& cfg, bool overwrite);
TrainRlOutcome cmd_train_rl(const RunConfig& cfg, bool overwrite);
// Writes into <out>/eval. With a policy, the reward curve next to it is copied into the report.
EvaluateOutcome cmd_evaluate(const RunConfig& cfg, const std::optional<std::filesystem::path>& policy,
                             bool overwrite);

Denoiser load_denoiser(const std::filesystem::path& path);
PpoAgent load_agent(const std::filesystem::path& path, const PpoConfig& cfg);

}  // namespace orl
