#include "orl/pipeline.hpp"

#include "orl/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace orl {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                    std::string(expected));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
  std::vector<int> out;
  if (value.empty()) return out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    const std::string item = trim(value.substr(start, comma == std::string_view::npos ? value.npos : comma - start));
    const int v = parse_number<int>(key, item);
    if (v <= 0) bad_value(key, value, "a list of positive integers");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  if (value.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = value.find(',', start);
    out.push_back(parse_number<double>(key, trim(value.substr(start, comma == std::string_view::npos
                                                                          ? value.npos
                                                                          : comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

struct Field {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number_field(std::string name, T RunConfig::*member) {
  return {name,
          [name, member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(name, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename T, typename Sub>
Field nested_field(std::string name, Sub RunConfig::*sub, T Sub::*member) {
  return {name,
          [name, sub, member](RunConfig& c, std::string_view v) { (c.*sub).*member = parse_number<T>(name, v); },
          [sub, member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double((c.*sub).*member);
            else return std::to_string((c.*sub).*member);
          }};
}

template <typename Sub>
Field list_field(std::string name, Sub RunConfig::*sub, std::vector<int> Sub::*member) {
  return {name, [name, sub, member](RunConfig& c, std::string_view v) { (c.*sub).*member = parse_int_list(name, v); },
          [sub, member](const RunConfig& c) { return format_list((c.*sub).*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number_field("seed", &RunConfig::seed),
      {"out_dir", [](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); },
       [](const RunConfig& c) { return c.out_dir.generic_string(); }},
      number_field("threads", &RunConfig::threads),
      number_field("n_per_category", &RunConfig::n_per_category),
      nested_field("image_side", &RunConfig::corpus, &CorpusConfig::image_side),
      nested_field("degrade_factor", &RunConfig::corpus, &CorpusConfig::degrade_factor),
      nested_field("noise_sigma", &RunConfig::corpus, &CorpusConfig::noise_sigma),
      number_field("latent_side", &RunConfig::latent_side),
      number_field("diffusion_steps", &RunConfig::diffusion_steps),
      number_field("beta_min", &RunConfig::beta_min),
      number_field("beta_max", &RunConfig::beta_max),
      list_field("denoiser_hidden", &RunConfig::denoiser, &DenoiserTrainConfig::hidden),
      {"denoiser_activation",
       [](RunConfig& c, std::string_view v) {
         try {
           c.denoiser.activation = parse_activation(std::string(v));
         } catch (const InvalidArgument&) {
           bad_value("denoiser_activation", v, "tanh or relu");
         }
       },
       [](const RunConfig& c) { return to_string(c.denoiser.activation); }},
      {"denoiser_head",
       [](RunConfig& c, std::string_view v) {
         try {
           c.denoiser.head = parse_denoiser_head(std::string(v));
         } catch (const InvalidArgument&) {
           bad_value("denoiser_head", v, "epsilon or velocity");
         }
       },
       [](const RunConfig& c) { return to_string(c.denoiser.head); }},
      nested_field("denoiser_steps", &RunConfig::denoiser, &DenoiserTrainConfig::steps),
      nested_field("denoiser_batch_size", &RunConfig::denoiser, &DenoiserTrainConfig::batch_size),
      nested_field("denoiser_learning_rate", &RunConfig::denoiser, &DenoiserTrainConfig::learning_rate),
      nested_field("learning_rate", &RunConfig::ppo, &PpoConfig::learning_rate),
      nested_field("gamma", &RunConfig::ppo, &PpoConfig::gamma),
      nested_field("gae_lambda", &RunConfig::ppo, &PpoConfig::gae_lambda),
      nested_field("clip", &RunConfig::ppo, &PpoConfig::clip),
      nested_field("value_coef", &RunConfig::ppo, &PpoConfig::value_coef),
      nested_field("update_epochs", &RunConfig::ppo, &PpoConfig::update_epochs),
      nested_field("batch_size", &RunConfig::ppo, &PpoConfig::batch_size),
      nested_field("train_epochs", &RunConfig::ppo, &PpoConfig::train_epochs),
      nested_field("steps_per_epoch", &RunConfig::ppo, &PpoConfig::steps_per_epoch),
      nested_field("entropy_coef", &RunConfig::ppo, &PpoConfig::entropy_coef),
      list_field("policy_hidden", &RunConfig::ppo, &PpoConfig::policy_hidden),
      list_field("value_hidden", &RunConfig::ppo, &PpoConfig::value_hidden),
      nested_field("initial_log_std", &RunConfig::ppo, &PpoConfig::initial_log_std),
      {"initial_action_mean",
       [](RunConfig& c, std::string_view v) { c.ppo.initial_action_mean = parse_double_list("initial_action_mean", v); },
       [](const RunConfig& c) { return format_list(c.ppo.initial_action_mean); }},
      nested_field("reward_smoothing_window", &RunConfig::ppo, &PpoConfig::reward_smoothing_window),
      nested_field("psnr_scale_db", &RunConfig::reward_norm, &RewardNormalization::psnr_scale_db),
      nested_field("perceptual_scale", &RunConfig::reward_norm, &RewardNormalization::perceptual_scale),
  };
  return table;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

void prepare_stage(const std::filesystem::path& dir, const std::filesystem::path& marker, bool overwrite) {
  if (std::filesystem::exists(marker) && !overwrite) {
    throw ConfigError("refusing to overwrite " + marker.string() + " (pass --overwrite)");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
}

std::vector<ScenePair> load_split(const StagePaths& paths, Split split) {
  return select_split(read_corpus(paths.corpus), split);
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.name == key) {
      f.set(*this, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void RunConfig::sync() {
  denoiser.seed = seed;
  denoiser.latent_side = latent_side;
  ppo.seed = seed;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.name);
  return out;
}

std::string RunConfig::render() const {
  RunConfig copy = *this;
  copy.sync();
  std::string out;
  for (const auto& f : fields()) out += f.name + " = " + f.get(copy) + "\n";
  return out;
}

NoiseSchedule RunConfig::schedule() const { return make_schedule(diffusion_steps, beta_min, beta_max); }

EnvConfig RunConfig::env_config() const {
  EnvConfig env;
  env.image_side = corpus.image_side;
  env.latent_side = latent_side;
  env.gamma = ppo.gamma;
  env.seed = seed;
  env.reward_norm = reward_norm;
  return env;
}

EvalConfig RunConfig::eval_config() const {
  return {corpus.image_side, latent_side, reward_norm, seed, threads};
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    base.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
  }
  base.sync();
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::move(base));
}

StagePaths::StagePaths(const std::filesystem::path& out)
    : corpus(out / "corpus"), denoiser(out / "denoiser"), rl(out / "rl"), eval(out / "eval") {}

Denoiser load_denoiser(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("denoiser checkpoint not found: " + path.string());
  return Denoiser::from_params(load_checkpoint(path));
}

PpoAgent load_agent(const std::filesystem::path& path, const PpoConfig& cfg) {
  if (!std::filesystem::exists(path)) throw ConfigError("policy checkpoint not found: " + path.string());
  return PpoAgent::from_params(load_checkpoint(path), cfg);
}

void cmd_gen_data(const RunConfig& cfg, bool overwrite) {
  const StagePaths paths(cfg.out_dir);
  prepare_stage(paths.corpus, paths.corpus / "manifest.csv", overwrite);
  write_corpus(build_corpus(cfg.n_per_category, cfg.seed, cfg.corpus), paths.corpus);
  write_text(paths.corpus / "config_resolved.txt", cfg.render());
}

PretrainOutcome cmd_pretrain(const RunConfig& cfg, bool overwrite) {
  const StagePaths paths(cfg.out_dir);
  const std::vector<ScenePair> train_split = load_split(paths, Split::train);
  prepare_stage(paths.denoiser, paths.denoiser_checkpoint(), overwrite);

  RunConfig c = cfg;
  c.sync();
  const std::vector<ImagePair> data = image_pairs(train_split);
  DenoiserTrainResult trained = train_denoiser(data, c.schedule(), c.denoiser);

  PretrainOutcome outcome;
  outcome.loss_history = trained.loss_history;
  outcome.smoothed_final_loss = trained.smoothed_final_loss();

  std::ostringstream csv;
  csv << "step,loss,smoothed_loss\n";
  double window_sum = 0.0;
  constexpr std::size_t kWindow = 100;
  for (std::size_t i = 0; i < trained.loss_history.size(); ++i) {
    window_sum += trained.loss_history[i];
    if (i >= kWindow) window_sum -= trained.loss_history[i - kWindow];
    const double smoothed = window_sum / static_cast<double>(std::min(i + 1, kWindow));
    csv << i + 1 << ',' << format_fixed4(trained.loss_history[i]) << ',' << format_fixed4(smoothed) << '\n';
  }
  save_checkpoint(trained.denoiser.to_params(), paths.denoiser_checkpoint());
  write_text(paths.denoiser / "pretrain_loss.csv", csv.str());
  write_text(paths.denoiser / "config_resolved.txt", c.render());
  return outcome;
}

TrainRlOutcome cmd_train_rl(const RunConfig& cfg, bool overwrite) {
  const StagePaths paths(cfg.out_dir);
  RunConfig c = cfg;
  c.sync();
  auto den = std::make_shared<const Denoiser>(load_denoiser(paths.denoiser_checkpoint()));
  std::vector<ScenePair> train_split = load_split(paths, Split::train);
  prepare_stage(paths.rl, paths.policy_checkpoint(), overwrite);

  SuperResolutionEnv env(c.env_config(), den, c.schedule(), std::move(train_split));
  TrainResult trained = train(env, c.ppo);

  save_checkpoint(trained.agent.to_params(), paths.policy_checkpoint());
  write_reward_curve(trained.curve, paths.rl / "reward_curve.csv");
  write_text(paths.rl / "config_resolved.txt", c.render());
  return {std::move(trained.curve)};
}

EvaluateOutcome cmd_evaluate(const RunConfig& cfg, const std::optional<std::filesystem::path>& policy,
                             bool overwrite) {
  const StagePaths paths(cfg.out_dir);
  RunConfig c = cfg;
  c.sync();
  const Denoiser den = load_denoiser(paths.denoiser_checkpoint());
  std::optional<PpoAgent> agent;
  std::vector<CurvePoint> curve;
  if (policy) {
    agent = load_agent(*policy, c.ppo);
    const auto curve_path = policy->parent_path() / "reward_curve.csv";
    if (std::filesystem::exists(curve_path)) curve = read_reward_curve(curve_path);
  }
  const std::vector<ScenePair> test_split = load_split(paths, Split::test);
  prepare_stage(paths.eval, paths.eval / "table2_analog.csv", overwrite);

  const NoiseSchedule sched = c.schedule();
  EvaluateOutcome outcome;
  outcome.baseline = evaluate(den, sched, nullptr, test_split, c.eval_config());
  if (agent) {
    outcome.rl = evaluate(den, sched, &agent->policy(), test_split, c.eval_config());
    outcome.deltas = compare(outcome.baseline.categories, outcome.rl->categories);
  }
  if (!agent) std::filesystem::remove(paths.eval / "deltas.csv");  // stale from an earlier RL evaluation
  write_reports(outcome.baseline, outcome.rl ? &*outcome.rl : nullptr, curve, paths.eval);
  write_text(paths.eval / "config_resolved.txt", c.render());
  return outcome;
}

}  // namespace orl
