#include "orl/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>

namespace orl {

namespace {

constexpr std::uint8_t kMagic[4] = {'O', 'R', 'L', 'M'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw ParseError(pos_, std::string("truncated checkpoint reading ") + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NetParams& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(out, kCheckpointVersion);
  for (const auto& [name, value] : params) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidArgument("parameter name too long for checkpoint: " + name);
    }
    if (value.rank() > std::numeric_limits<std::uint8_t>::max()) {
      throw InvalidArgument("too many dimensions for checkpoint: " + name);
    }
    if (!value.all_finite()) throw InvalidArgument("refusing to checkpoint non-finite values in " + name);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(value.rank()));
    for (std::size_t d : value.shape()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("dimension too large: " + name);
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(value.data()[i]));
    }
  }
  return out;
}

NetParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw ParseError(0, "bad magic, not an ORLM checkpoint");
  }
  const auto version = in.get_le<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw UnsupportedFormat(4, "unsupported checkpoint version " + std::to_string(version));
  }
  NetParams params;
  while (!in.at_end()) {
    const std::size_t frame_start = in.offset();
    const auto name_len = in.get_le<std::uint16_t>("name length");
    const auto name_bytes = in.take(name_len, "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto ndims = in.get_le<std::uint8_t>("rank");
    Shape shape(ndims);
    for (auto& d : shape) {
      d = in.get_le<std::uint32_t>("dimension");
      if (d == 0) throw ParseError(in.offset() - 4, "zero dimension in " + name);
    }
    const std::size_t count = shape_size(shape);
    if (count > in.remaining() / sizeof(double)) throw ParseError(in.offset(), "truncated checkpoint data in " + name);
    RealArray::Vector data(static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      data[i] = std::bit_cast<double>(in.get_le<std::uint64_t>("data"));
    }
    if (params.contains(name)) throw ParseError(frame_start, "duplicate frame '" + name + "'");
    params.add(std::move(name), RealArray(std::move(shape), std::move(data)));
  }
  return params;
}

void save_checkpoint(const NetParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

NetParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open checkpoint");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace orl
