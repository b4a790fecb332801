#include "orl/eval_report.hpp"

#include "orl/rl_env.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace orl {

std::string_view mode_name(EvalMode mode) { return mode == EvalMode::baseline ? "baseline" : "rl"; }

double EvalResult::mean_composite() const {
  if (images.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& im : images) sum += im.metrics.composite;
  return sum / static_cast<double>(images.size());
}

namespace {

ImageResult evaluate_one(const Denoiser& den, const NoiseSchedule& sched, const GaussianPolicy* policy,
                         const ScenePair& pair, const EvalConfig& cfg) {
  ActionPolicy act = [](const Latent&, const Latent&) { return StepAction{}; };
  if (policy) {
    act = [policy](const Latent& z, const Latent& c) {
      return StepAction::from_vector(policy->deterministic_action(state_features(z, c)));
    };
  }
  const SampleResult s = sample(encode(pair.lr, cfg.latent_side), den, sched, act, mix_seed(cfg.seed, pair.seed));
  ImageResult r;
  r.category = pair.category;
  r.scene_seed = pair.seed;
  r.steps_used = s.steps_used;
  r.metrics = score_latent(pair.hr, s.latent, s.steps_used, sched.steps, cfg.image_side, cfg.reward_norm);
  return r;
}

}  // namespace

EvalResult evaluate(const Denoiser& den, const NoiseSchedule& sched, const GaussianPolicy* policy,
                    std::span<const ScenePair> test, const EvalConfig& cfg) {
  if (test.empty()) throw ConfigError("evaluation split is empty");
  if (den.latent_side() != cfg.latent_side) throw ConfigError("denoiser latent side does not match the config");

  EvalResult result;
  result.mode = policy ? EvalMode::rl : EvalMode::baseline;
  result.images.resize(test.size());

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.threads, 1)), 1,
                                                      test.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < test.size(); ++i) result.images[i] = evaluate_one(den, sched, policy, test[i], cfg);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < test.size(); i = next++) {
          try {
            result.images[i] = evaluate_one(den, sched, policy, test[i], cfg);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  result.categories = aggregate(result.images, result.mode);
  return result;
}

std::vector<CategoryResult> aggregate(std::vector<ImageResult>& images, EvalMode mode) {
  std::sort(images.begin(), images.end(), [](const ImageResult& a, const ImageResult& b) {
    if (a.category != b.category) return a.category < b.category;
    return a.scene_seed < b.scene_seed;
  });
  std::vector<CategoryResult> out;
  for (SceneCategory cat : kAllCategories) {
    CategoryResult c;
    c.category = cat;
    c.mode = mode;
    for (const auto& im : images) {
      if (im.category != cat) continue;
      ++c.n_images;
      c.mean_psnr_db += im.metrics.psnr_db;
      c.mean_ssim += im.metrics.ssim;
      c.mean_lpips_proxy += im.metrics.perceptual;
      c.mean_steps_used += im.steps_used;
      c.mean_composite += im.metrics.composite;
    }
    if (c.n_images == 0) continue;
    const double n = c.n_images;
    c.mean_psnr_db /= n;
    c.mean_ssim /= n;
    c.mean_lpips_proxy /= n;
    c.mean_steps_used /= n;
    c.mean_composite /= n;
    out.push_back(c);
  }
  return out;
}

DeltaTable compare(std::span<const CategoryResult> baseline, std::span<const CategoryResult> rl) {
  if (baseline.size() != rl.size()) throw InvalidArgument("compare: baseline and rl cover different categories");
  DeltaTable table;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (baseline[i].category != rl[i].category) {
      throw InvalidArgument("compare: category mismatch at row " + std::to_string(i));
    }
    CategoryDelta d;
    d.category = baseline[i].category;
    d.delta_psnr_db = rl[i].mean_psnr_db - baseline[i].mean_psnr_db;
    d.delta_ssim = rl[i].mean_ssim - baseline[i].mean_ssim;
    d.delta_lpips_proxy = rl[i].mean_lpips_proxy - baseline[i].mean_lpips_proxy;
    if (d.delta_psnr_db > 0.0) ++table.psnr_wins;
    table.rows.push_back(d);
  }
  return table;
}

std::string format_fixed4(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  std::string s(buf);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

void append_rows(std::ostringstream& os, const EvalResult& r) {
  for (const auto& c : r.categories) {
    os << mode_name(c.mode) << ',' << category_name(c.category) << ',' << format_fixed4(c.mean_psnr_db) << ','
       << format_fixed4(c.mean_ssim) << ',' << format_fixed4(c.mean_lpips_proxy) << ','
       << format_fixed4(c.mean_steps_used) << '\n';
  }
}

}  // namespace

void write_reward_curve(std::span<const CurvePoint> curve, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "epoch,mean_reward,policy_loss,value_loss,clip_fraction\n";
  for (const auto& p : curve) {
    os << p.epoch << ',' << format_fixed4(p.mean_reward) << ',' << format_fixed4(p.policy_loss) << ','
       << format_fixed4(p.value_loss) << ',' << format_fixed4(p.clip_fraction) << '\n';
  }
  write_text(path, os.str());
}

std::vector<CurvePoint> read_reward_curve(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != "epoch,mean_reward,policy_loss,value_loss,clip_fraction") {
    throw IoError(path.string(), "missing reward curve header");
  }
  std::vector<CurvePoint> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    CurvePoint p;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf%c", &p.epoch, &p.mean_reward, &p.policy_loss, &p.value_loss,
                    &p.clip_fraction, &tail) != 5) {
      throw IoError(path.string(), "malformed row at line " + std::to_string(lineno));
    }
    p.raw_mean_reward = p.mean_reward;
    out.push_back(p);
  }
  return out;
}

ReportFiles write_reports(const EvalResult& baseline, const EvalResult* rl, std::span<const CurvePoint> curve,
                          const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir.string(), "cannot create directory: " + ec.message());

  ReportFiles files;
  files.table = out_dir / "table2_analog.csv";
  std::ostringstream table;
  table << "mode,category,psnr_db,ssim,lpips_proxy,steps_used\n";
  append_rows(table, baseline);
  if (rl) append_rows(table, *rl);
  write_text(files.table, table.str());

  if (rl) {
    files.deltas = out_dir / "deltas.csv";
    const DeltaTable d = compare(baseline.categories, rl->categories);
    std::ostringstream os;
    os << "category,delta_psnr_db,delta_ssim,delta_lpips_proxy,psnr_win\n";
    for (const auto& row : d.rows) {
      os << category_name(row.category) << ',' << format_fixed4(row.delta_psnr_db) << ','
         << format_fixed4(row.delta_ssim) << ',' << format_fixed4(row.delta_lpips_proxy) << ','
         << (row.delta_psnr_db > 0.0 ? 1 : 0) << '\n';
    }
    write_text(files.deltas, os.str());
  }

  files.curve = out_dir / "reward_curve.csv";
  write_reward_curve(curve, files.curve);

  files.summary = out_dir / "summary.csv";
  std::ostringstream os;
  os << "mode,n_images,mean_composite\n";
  os << "baseline," << baseline.images.size() << ',' << format_fixed4(baseline.mean_composite()) << '\n';
  if (rl) os << "rl," << rl->images.size() << ',' << format_fixed4(rl->mean_composite()) << '\n';
  write_text(files.summary, os.str());
  return files;
}

}  // namespace orl
