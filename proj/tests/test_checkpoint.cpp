#include "orl/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace orl;

namespace {

NetParams sample_params() {
  NetParams p;
  Eigen::VectorXd w(6);
  w << 1.5, -2.25, 0.0, 1e-300, -0.0, 3.141592653589793;
  p.add("layer0.weight", RealArray({2, 3}, w));
  Eigen::VectorXd b(2);
  b << std::numeric_limits<double>::min(), -7.0;
  p.add("layer0.bias", RealArray({2}, b));
  return p;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("orl_test_" + name);
}

}  // namespace

TEST(Checkpoint, HandAssembledBytes) {
  NetParams p;
  Eigen::VectorXd v(1);
  v << 1.0;
  p.add("ab", RealArray({1}, v));
  const std::vector<std::uint8_t> expected = {
      'O', 'R', 'L', 'M', 1, 0,               // magic, version 1
      2, 0, 'a', 'b',                         // name
      1,                                      // ndims
      1, 0, 0, 0,                             // dim
      0, 0, 0, 0, 0, 0, 0xf0, 0x3f,           // 1.0 as f64 LE
  };
  EXPECT_EQ(encode_checkpoint(p), expected);
  EXPECT_EQ(decode_checkpoint(expected), p);
}

TEST(Checkpoint, BitExactRoundTrip) {
  const NetParams p = sample_params();
  const NetParams q = decode_checkpoint(encode_checkpoint(p));
  ASSERT_EQ(q.size(), p.size());
  for (std::size_t e = 0; e < p.size(); ++e) {
    EXPECT_EQ(q[e].first, p[e].first);
    EXPECT_EQ(q[e].second.shape(), p[e].second.shape());
    EXPECT_EQ(std::memcmp(q[e].second.data().data(), p[e].second.data().data(),
                          sizeof(double) * static_cast<std::size_t>(p[e].second.size())),
              0);
  }
}

TEST(Checkpoint, EmptyParamsRoundTrip) {
  const auto bytes = encode_checkpoint(NetParams{});
  EXPECT_EQ(bytes.size(), 6u);
  EXPECT_EQ(decode_checkpoint(bytes).size(), 0u);
}

TEST(Checkpoint, BadMagicReportsOffsetZero) {
  auto bytes = encode_checkpoint(sample_params());
  bytes[0] = 'X';
  try {
    decode_checkpoint(bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(Checkpoint, UnknownVersionIsUnsupported) {
  auto bytes = encode_checkpoint(sample_params());
  bytes[4] = 2;
  EXPECT_THROW(decode_checkpoint(bytes), UnsupportedFormat);
}

TEST(Checkpoint, TruncationReportsWhereParsingStopped) {
  const auto bytes = encode_checkpoint(sample_params());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{5}, std::size_t{9}, bytes.size() - 1}) {
    std::vector<std::uint8_t> head(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      decode_checkpoint(head);
      FAIL() << "expected ParseError at cut " << cut;
    } catch (const ParseError& e) {
      EXPECT_LE(e.offset(), cut);
    }
  }
}

TEST(Checkpoint, RejectsZeroDimensionAndDuplicates) {
  NetParams p;
  p.add("x", RealArray({1}));
  auto bytes = encode_checkpoint(p);
  auto zero = bytes;
  zero[6 + 2 + 1 + 1] = 0;  // first dimension byte of frame "x"
  EXPECT_THROW(decode_checkpoint(zero), ParseError);

  auto dup = bytes;
  dup.insert(dup.end(), bytes.begin() + 6, bytes.end());
  try {
    decode_checkpoint(dup);
    FAIL() << "expected duplicate frame error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), bytes.size());
  }
}

TEST(Checkpoint, HugeDeclaredShapeIsTruncationNotAllocation) {
  std::vector<std::uint8_t> bytes = {'O', 'R', 'L', 'M', 1, 0, 1, 0, 'x', 2, 0xff, 0xff, 0xff, 0xff,
                                     0xff, 0xff, 0xff, 0xff};
  EXPECT_THROW(decode_checkpoint(bytes), ParseError);
}

TEST(Checkpoint, FileRoundTripAndMissingFile) {
  const auto path = temp_file("ckpt.orlm");
  save_checkpoint(sample_params(), path);
  EXPECT_EQ(load_checkpoint(path), sample_params());
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, CorruptFileIsParseError) {
  const auto path = temp_file("corrupt.orlm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "ORLM";
  }
  EXPECT_THROW(load_checkpoint(path), ParseError);
  std::filesystem::remove(path);
}
