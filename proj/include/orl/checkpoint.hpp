#pragma once

#include "orl/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace orl {

// Framed binary layout, all integers little-endian:
//   "ORLM" | version u16 | frames...
//   frame = name_len u16 | name bytes | ndims u8 | dims u32 x ndims | f64 x product(dims)
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const NetParams& params);
NetParams decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const NetParams& params, const std::filesystem::path& path);
NetParams load_checkpoint(const std::filesystem::path& path);

}  // namespace orl
