// SPDX-License-Identifier: Apache-2.0
/**
 * @file   binio.hpp
 * @brief  Versioned little-endian float64 container shared by replay
 *         snapshots and agent checkpoints.
 *
 * Layout: magic[4] | version u32 | ndims u32 | dims u64[ndims] | count u64 |
 *         body_len u64 | body f64[body_len]. All integers and doubles are
 *         little-endian regardless of host byte order.
 */
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pebble::binio {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Container {
  std::array<char, 4> magic{};
  std::uint32_t version = kFormatVersion;
  std::vector<std::uint64_t> dims;
  std::uint64_t count = 0;
  std::vector<double> body;
};

void write_container(const std::filesystem::path& path, const Container& c);

// Throws std::runtime_error on I/O failure, wrong magic, unsupported
// version or a truncated body.
Container read_container(const std::filesystem::path& path,
                         const std::array<char, 4>& expected_magic);

}  // namespace pebble::binio
