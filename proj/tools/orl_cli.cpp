#include "orl/errors.hpp"
#include "orl/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> threads;
  std::vector<std::string> overrides;
  bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value config file");
  cmd->add_option("--seed", flags.seed, "master seed (overrides config and ORL_SEED)");
  cmd->add_option("--out", flags.out_dir, "output root directory");
  cmd->add_option("--threads", flags.threads, "worker cap for evaluation");
  cmd->add_option("--set", flags.overrides, "extra key=value override, repeatable");
  cmd->add_flag("--overwrite", flags.overwrite, "replace existing outputs");
}

orl::RunConfig resolve(const CommonFlags& flags) {
  orl::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = orl::load_config(flags.config_path);
  if (const char* env = std::getenv("ORL_SEED"); env && *env) cfg.set("seed", env);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw orl::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.threads) cfg.set("threads", std::to_string(*flags.threads));
  cfg.sync();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RL-guided latent diffusion super-resolution pipeline"};
  app.require_subcommand(1);

  CommonFlags gen_flags, pre_flags, rl_flags, eval_flags;
  std::string policy_path;

  auto* gen = app.add_subcommand("gen-data", "build the synthetic scene corpus");
  add_common(gen, gen_flags);
  auto* pre = app.add_subcommand("pretrain", "train the conditional denoiser");
  add_common(pre, pre_flags);
  auto* rl = app.add_subcommand("train-rl", "train the step-modulation policy with PPO");
  add_common(rl, rl_flags);
  auto* ev = app.add_subcommand("evaluate", "score baseline and policy-guided sampling on the test split");
  add_common(ev, eval_flags);
  ev->add_option("--policy", policy_path, "policy checkpoint; omit for a baseline-only table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto cfg = resolve(gen_flags);
      orl::cmd_gen_data(cfg, gen_flags.overwrite);
      std::cout << "corpus written to " << orl::StagePaths(cfg.out_dir).corpus.string() << "\n";
    } else if (*pre) {
      const auto cfg = resolve(pre_flags);
      const auto outcome = orl::cmd_pretrain(cfg, pre_flags.overwrite);
      std::cout << "denoiser trained, smoothed final loss " << orl::format_fixed4(outcome.smoothed_final_loss)
                << "\n";
    } else if (*rl) {
      const auto cfg = resolve(rl_flags);
      const auto outcome = orl::cmd_train_rl(cfg, rl_flags.overwrite);
      if (!outcome.curve.empty()) {
        std::cout << "policy trained, smoothed reward " << orl::format_fixed4(outcome.curve.front().mean_reward)
                  << " -> " << orl::format_fixed4(outcome.curve.back().mean_reward) << "\n";
      } else {
        std::cout << "untrained policy written\n";
      }
    } else if (*ev) {
      const auto cfg = resolve(eval_flags);
      std::optional<std::filesystem::path> policy;
      if (!policy_path.empty()) policy = policy_path;
      const auto outcome = orl::cmd_evaluate(cfg, policy, eval_flags.overwrite);
      std::cout << "baseline mean composite " << orl::format_fixed4(outcome.baseline.mean_composite()) << "\n";
      if (outcome.rl) {
        std::cout << "rl mean composite " << orl::format_fixed4(outcome.rl->mean_composite()) << ", psnr wins "
                  << outcome.deltas->psnr_wins << "/" << outcome.deltas->rows.size() << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
