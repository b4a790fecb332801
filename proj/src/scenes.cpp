#include "orl/scenes.hpp"

#include "orl/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

namespace orl {

std::string_view category_name(SceneCategory cat) {
  switch (cat) {
    case SceneCategory::business_district: return "business_district";
    case SceneCategory::dense_residential: return "dense_residential";
    case SceneCategory::desert: return "desert";
    case SceneCategory::forest: return "forest";
    case SceneCategory::industrial: return "industrial";
    case SceneCategory::train_station: return "train_station";
    case SceneCategory::river: return "river";
    case SceneCategory::runway: return "runway";
  }
  return "unknown";
}

SceneCategory parse_category(std::string_view name) {
  for (SceneCategory cat : kAllCategories) {
    if (category_name(cat) == name) return cat;
  }
  throw InvalidArgument("unknown scene category '" + std::string(name) + "'");
}

std::string_view split_name(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw InvalidArgument("unknown split '" + std::string(name) + "'");
}

// --- Procedural generators ----------------------------------------------------

namespace {

int scaled(double px, int side) { return std::max(1, static_cast<int>(std::lround(px * side / 32.0))); }

Image value_noise(Rng& rng, int side, int grid) {
  Image coarse(grid, grid);
  for (Eigen::Index i = 0; i < coarse.size(); ++i) coarse.data()[i] = rng.uniform();
  return bilinear_resize(coarse, side, side);
}

Image white_noise(Rng& rng, int side) {
  Image n(side, side);
  for (Eigen::Index i = 0; i < n.size(); ++i) n.data()[i] = rng.normal();
  return n;
}

Image box_blur(const Image& img, int radius) {
  Image out(img.rows(), img.cols());
  const Eigen::Index last_r = img.rows() - 1;
  const Eigen::Index last_c = img.cols() - 1;
  for (Eigen::Index r = 0; r <= last_r; ++r) {
    for (Eigen::Index c = 0; c <= last_c; ++c) {
      double acc = 0.0;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          acc += img(std::clamp<Eigen::Index>(r + dr, 0, last_r), std::clamp<Eigen::Index>(c + dc, 0, last_c));
        }
      }
      out(r, c) = acc / ((2 * radius + 1) * (2 * radius + 1));
    }
  }
  return out;
}

void fill_rect(Image& img, int r0, int c0, int h, int w, double value) {
  const int r1 = std::min<int>(static_cast<int>(img.rows()), r0 + h);
  const int c1 = std::min<int>(static_cast<int>(img.cols()), c0 + w);
  for (int r = std::max(0, r0); r < r1; ++r) {
    for (int c = std::max(0, c0); c < c1; ++c) img(r, c) = value;
  }
}

double smoothstep(double e0, double e1, double x) {
  const double u = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

int rand_int(Rng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Image business_district(Rng& rng, int side) {
  Image img = (0.30 + 0.06 * (value_noise(rng, side, 4).array() - 0.5)).matrix();
  const int count = rand_int(rng, 10, 14);
  for (int i = 0; i < count; ++i) {
    const int h = scaled(rand_int(rng, 3, 10), side);
    const int w = scaled(rand_int(rng, 3, 10), side);
    const int r = rand_int(rng, 0, side - h);
    const int c = rand_int(rng, 0, side - w);
    const double v = rng.uniform(0.45, 0.95);
    fill_rect(img, r + 1, c + 1, h, w, 0.12);
    fill_rect(img, r, c, h, w, v);
  }
  img += 0.02 * white_noise(rng, side);
  return img;
}

Image dense_residential(Rng& rng, int side) {
  Image img = Image::Constant(side, side, 0.28);
  const int cell = scaled(4, side);
  for (int r = 0; r + cell <= side; r += cell) {
    for (int c = 0; c + cell <= side; c += cell) {
      const int size = cell - rand_int(rng, 1, 2);
      const int dr = rand_int(rng, 0, cell - size - 1);
      const int dc = rand_int(rng, 0, cell - size - 1);
      const double v = rng.uniform() < 0.15 ? 0.35 : rng.uniform(0.55, 0.9);
      fill_rect(img, r + dr, c + dc, size, size, v);
    }
  }
  img += 0.02 * white_noise(rng, side);
  return img;
}

Image desert(Rng& rng, int side) {
  Image img = (0.62 + 0.3 * (value_noise(rng, side, 3).array() - 0.5)).matrix();
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double period = side * rng.uniform(0.5, 1.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double u = c * std::cos(theta) + r * std::sin(theta);
      img(r, c) += 0.06 * std::sin(2.0 * std::numbers::pi * u / period + phase);
    }
  }
  img += 0.01 * white_noise(rng, side);
  return img;
}

Image forest(Rng& rng, int side) {
  const Image noise = white_noise(rng, side);
  Image band = box_blur(noise, 1) - box_blur(noise, 3);
  const double mean = band.mean();
  const double sd = std::sqrt((band.array() - mean).square().mean());
  band = ((band.array() - mean) / (sd + 1e-12)).matrix();
  return (0.32 + 0.12 * band.array() + 0.1 * (value_noise(rng, side, 3).array() - 0.5)).matrix();
}

Image industrial(Rng& rng, int side) {
  Image img = (0.38 + 0.06 * (value_noise(rng, side, 3).array() - 0.5)).matrix();
  const int spacing = scaled(10, side);
  const int off_r = rand_int(rng, 0, spacing / 2);
  const int off_c = rand_int(rng, 0, spacing / 2);
  for (int r = off_r; r < side; r += spacing) {
    for (int c = off_c; c < side; c += spacing) {
      const int h = spacing - rand_int(rng, 2, 3);
      const int w = spacing - rand_int(rng, 2, 3);
      const double v = rng.uniform() < 0.25 ? rng.uniform(0.5, 0.6) : rng.uniform(0.72, 0.92);
      fill_rect(img, r + 1, c + 1, h, w, 0.15);
      fill_rect(img, r, c, h, w, v);
    }
  }
  img += 0.015 * white_noise(rng, side);
  return img;
}

Image train_station(Rng& rng, int side) {
  Image img = (0.5 + 0.03 * white_noise(rng, side).array()).matrix();
  const int spacing = scaled(3, side);
  const int tracks = rand_int(rng, 5, 7);
  const int start = rand_int(rng, 0, std::max(0, side - tracks * spacing));
  for (int k = 0; k < tracks; ++k) fill_rect(img, 0, start + k * spacing, side, 1, 0.15);
  const int blobs = rand_int(rng, 2, 4);
  for (int b = 0; b < blobs; ++b) {
    const double cr = rng.uniform(0.0, side);
    const double cc = rng.uniform(0.0, side);
    const double radius = rng.uniform(2.0, 4.0) * side / 32.0;
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
        img(r, c) += 0.35 * std::exp(-d2 / (2.0 * radius * radius));
      }
    }
  }
  return img;
}

Image river(Rng& rng, int side) {
  Image img = (0.45 + 0.12 * (value_noise(rng, side, 5).array() - 0.5) +
               0.015 * white_noise(rng, side).array())
                  .matrix();
  const double period = side * rng.uniform(0.8, 1.6);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amplitude = side * rng.uniform(0.1, 0.2);
  const double half_width = 0.5 * side * rng.uniform(0.15, 0.25);
  for (int r = 0; r < side; ++r) {
    const double center = 0.5 * side + amplitude * std::sin(2.0 * std::numbers::pi * r / period + phase);
    for (int c = 0; c < side; ++c) {
      const double w = 1.0 - smoothstep(half_width - 1.5, half_width + 1.5, std::abs(c + 0.5 - center));
      img(r, c) = img(r, c) * (1.0 - w) + 0.18 * w;
    }
  }
  return img;
}

Image runway(Rng& rng, int side) {
  Image img = (0.42 + 0.05 * (value_noise(rng, side, 4).array() - 0.5) +
               0.015 * white_noise(rng, side).array())
                  .matrix();
  const int width = std::max(6, static_cast<int>(std::lround(side * rng.uniform(0.35, 0.45))));
  const int left = rand_int(rng, 1, side - width - 1);
  fill_rect(img, 0, left, side, width, 0.22);
  fill_rect(img, 0, left, side, 1, 0.92);
  fill_rect(img, 0, left + width - 1, side, 1, 0.92);
  const int center = left + width / 2;
  const int dash = scaled(3, side);
  for (int r = 0; r < side; r += 2 * dash) fill_rect(img, r, center, dash, 1, 0.95);
  // Threshold markings: parallel bars across the strip at one end.
  const int bar_len = scaled(4, side);
  const int bar_row = rng.uniform() < 0.5 ? 1 : side - 1 - bar_len;
  for (int c = left + 2; c < left + width - 2; c += 2) fill_rect(img, bar_row, c, bar_len, 1, 0.95);
  return img;
}

}  // namespace

Image generate_scene(SceneCategory cat, std::uint64_t seed, int side) {
  if (side < 16) throw InvalidArgument("generate_scene: side must be at least 16");
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cat) + 101));
  Image img;
  switch (cat) {
    case SceneCategory::business_district: img = business_district(rng, side); break;
    case SceneCategory::dense_residential: img = dense_residential(rng, side); break;
    case SceneCategory::desert: img = desert(rng, side); break;
    case SceneCategory::forest: img = forest(rng, side); break;
    case SceneCategory::industrial: img = industrial(rng, side); break;
    case SceneCategory::train_station: img = train_station(rng, side); break;
    case SceneCategory::river: img = river(rng, side); break;
    case SceneCategory::runway: img = runway(rng, side); break;
  }
  return img.cwiseMax(0.0).cwiseMin(1.0);
}

Image degrade(const Image& hr, int factor, double noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0.0) throw InvalidArgument("degrade: noise sigma must be non-negative");
  Image lr = block_mean(hr, factor);
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < lr.size(); ++i) lr.data()[i] += noise_sigma * rng.normal();
  }
  return lr.cwiseMax(0.0).cwiseMin(1.0);
}

std::uint64_t scene_seed(std::uint64_t corpus_seed, SceneCategory cat, int index) {
  return mix_seed(mix_seed(corpus_seed, static_cast<std::uint64_t>(cat)), static_cast<std::uint64_t>(index));
}

std::uint64_t degrade_seed(std::uint64_t seed) { return mix_seed(seed, 0xde9ade); }

std::vector<ScenePair> build_corpus(int n_per_category, std::uint64_t seed, const CorpusConfig& cfg) {
  if (n_per_category < 2) throw InvalidArgument("build_corpus: need at least 2 scenes per category for a split");
  const int n_train = std::clamp(static_cast<int>(std::floor(0.8 * n_per_category)), 1, n_per_category - 1);
  std::vector<ScenePair> corpus;
  corpus.reserve(kAllCategories.size() * static_cast<std::size_t>(n_per_category));
  for (SceneCategory cat : kAllCategories) {
    for (int i = 0; i < n_per_category; ++i) {
      ScenePair pair;
      pair.category = cat;
      pair.seed = scene_seed(seed, cat, i);
      pair.split = i < n_train ? Split::train : Split::test;
      pair.hr = generate_scene(cat, pair.seed, cfg.image_side);
      pair.lr = degrade(pair.hr, cfg.degrade_factor, cfg.noise_sigma, degrade_seed(pair.seed));
      corpus.push_back(std::move(pair));
    }
  }
  return corpus;
}

std::vector<ScenePair> select_split(std::span<const ScenePair> corpus, Split split) {
  std::vector<ScenePair> out;
  std::copy_if(corpus.begin(), corpus.end(), std::back_inserter(out),
               [split](const ScenePair& p) { return p.split == split; });
  return out;
}

std::vector<ImagePair> image_pairs(std::span<const ScenePair> corpus) {
  std::vector<ImagePair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) out.push_back({p.hr, p.lr});
  return out;
}

// --- PGM ---------------------------------------------------------------------

namespace {

class PgmCursor {
 public:
  explicit PgmCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(ch)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw ParseError(start, std::string(what) + " too large");
      ++pos_;
    }
    if (pos_ == start) throw ParseError(pos_, std::string("expected ") + what);
    return value;
  }

  std::size_t pos_ = 0;
  std::span<const std::uint8_t> bytes_;
};

}  // namespace

Image parse_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw ParseError(0, "empty PGM file");
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError(0, "missing P5 magic");
  PgmCursor cur(bytes);
  cur.pos_ = 2;
  const long width = cur.read_uint("width");
  const long height = cur.read_uint("height");
  const std::size_t maxval_at = cur.pos_;
  const long maxval = cur.read_uint("maxval");
  if (width <= 0 || height <= 0) throw ParseError(maxval_at, "PGM dimensions must be positive");
  if (maxval != 255) throw UnsupportedFormat(maxval_at, "only maxval 255 is supported, got " + std::to_string(maxval));
  if (cur.pos_ >= bytes.size() || !std::isspace(bytes[cur.pos_])) {
    throw ParseError(cur.pos_, "expected whitespace after maxval");
  }
  ++cur.pos_;
  const auto count = static_cast<std::size_t>(width * height);
  if (bytes.size() - cur.pos_ < count) {
    throw ParseError(bytes.size(), "truncated pixel data: need " + std::to_string(count) + " bytes, have " +
                                       std::to_string(bytes.size() - cur.pos_));
  }
  Image img(height, width);
  for (std::size_t i = 0; i < count; ++i) img.data()[i] = bytes[cur.pos_ + i] / 255.0;
  return img;
}

std::vector<std::uint8_t> encode_pgm(const Image& img) {
  if (img.size() == 0) throw InvalidArgument("encode_pgm: empty image");
  const std::string header = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(img.size()));
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const double v = std::floor(img.data()[i] * 255.0 + 0.5);
    out.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)));
  }
  return out;
}

Image load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open PGM file");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pgm(bytes);
}

void save_pgm(const Image& img, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

// --- Corpus on disk ----------------------------------------------------------

void write_corpus(std::span<const ScenePair> corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  std::ostringstream manifest;
  manifest << kManifestHeader << '\n';
  for (const auto& p : corpus) {
    const std::string stem = std::string(category_name(p.category)) + "_" + std::to_string(p.seed);
    const std::string hr_name = stem + "_hr.pgm";
    const std::string lr_name = stem + "_lr.pgm";
    save_pgm(p.hr, dir / hr_name);
    save_pgm(p.lr, dir / lr_name);
    manifest << category_name(p.category) << ',' << p.seed << ',' << split_name(p.split) << ',' << hr_name << ','
             << lr_name << '\n';
  }
  const auto path = dir / "manifest.csv";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << manifest.str();
  if (!out) throw IoError(path.string(), "write failed");
}

std::vector<ScenePair> read_corpus(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.csv";
  std::ifstream in(path);
  if (!in) throw ConfigError("corpus manifest not found: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw ConfigError(path.string() + ": unexpected manifest header");
  }
  std::vector<ScenePair> corpus;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    ScenePair p;
    p.category = parse_category(fields[0]);
    p.seed = std::stoull(fields[1]);
    p.split = parse_split(fields[2]);
    p.hr = load_pgm(dir / fields[3]);
    p.lr = load_pgm(dir / fields[4]);
    corpus.push_back(std::move(p));
  }
  if (corpus.empty()) throw ConfigError(path.string() + ": manifest lists no scenes");
  return corpus;
}

}  // namespace orl
