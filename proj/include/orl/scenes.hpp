#pragma once

#include "orl/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace orl {

/// Scene categories, in report order.
enum class SceneCategory {
  business_district,
  dense_residential,
  desert,
  forest,
  industrial,
  train_station,
  river,
  runway,
};

inline constexpr std::array<SceneCategory, 8> kAllCategories = {
    SceneCategory::business_district, SceneCategory::dense_residential, SceneCategory::desert,
    SceneCategory::forest,            SceneCategory::industrial,        SceneCategory::train_station,
    SceneCategory::river,             SceneCategory::runway,
};

std::string_view category_name(SceneCategory cat);
SceneCategory parse_category(std::string_view name);

enum class Split { train, test };
std::string_view split_name(Split split);
Split parse_split(std::string_view name);

/// Deterministic procedural scene, values in [0, 1]. Requires side >= 16.
Image generate_scene(SceneCategory cat, std::uint64_t seed, int side = 32);

/// Block-mean by `factor`, plus seeded N(0, noise_sigma^2), clamped to [0, 1].
Image degrade(const Image& hr, int factor, double noise_sigma, std::uint64_t seed);

struct CorpusConfig {
  int image_side = 32;
  int degrade_factor = 4;
  double noise_sigma = 0.02;
};

struct ScenePair {
  SceneCategory category = SceneCategory::business_district;
  std::uint64_t seed = 0;
  Split split = Split::train;
  Image hr;
  Image lr;
};

std::uint64_t scene_seed(std::uint64_t corpus_seed, SceneCategory cat, int index);
std::uint64_t degrade_seed(std::uint64_t scene_seed);

/// n_per_category pairs per category; the first 80% of each category (at
/// least one, leaving at least one) are train, the rest test.
std::vector<ScenePair> build_corpus(int n_per_category, std::uint64_t seed, const CorpusConfig& cfg = {});

std::vector<ScenePair> select_split(std::span<const ScenePair> corpus, Split split);
std::vector<ImagePair> image_pairs(std::span<const ScenePair> corpus);

// --- PGM (P5, maxval 255) --------------------------------------------------

Image parse_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const Image& img);
Image load_pgm(const std::filesystem::path& path);
void save_pgm(const Image& img, const std::filesystem::path& path);

// --- Corpus on disk ----------------------------------------------------------

inline constexpr std::string_view kManifestHeader = "category,seed,split,hr_path,lr_path";

/// Writes <dir>/<category>_<seed>_{hr,lr}.pgm plus <dir>/manifest.csv with
/// paths relative to `dir`.
void write_corpus(std::span<const ScenePair> corpus, const std::filesystem::path& dir);

/// Reads manifest.csv and the images it lists. Throws ConfigError if the
/// manifest is missing.
std::vector<ScenePair> read_corpus(const std::filesystem::path& dir);

}  // namespace orl
