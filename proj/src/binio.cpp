// SPDX-License-Identifier: Apache-2.0

#include "pebble/binio.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

namespace pebble::binio {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

std::uint64_t get_u(std::istream& is, int bytes) {
  unsigned char b[8] = {};
  is.read(reinterpret_cast<char*>(b), bytes);
  if (!is) throw std::runtime_error("binio: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("binio: cannot open for writing: " + path.string());
  os.write(c.magic.data(), 4);
  put_u32(os, c.version);
  put_u32(os, static_cast<std::uint32_t>(c.dims.size()));
  for (std::uint64_t d : c.dims) put_u64(os, d);
  put_u64(os, c.count);
  put_u64(os, c.body.size());
  for (double v : c.body) put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw std::runtime_error("binio: write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path,
                         const std::array<char, 4>& expected_magic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("binio: cannot open: " + path.string());
  Container c;
  is.read(c.magic.data(), 4);
  if (!is || c.magic != expected_magic) {
    throw std::runtime_error("binio: bad magic in " + path.string());
  }
  c.version = static_cast<std::uint32_t>(get_u(is, 4));
  if (c.version != kFormatVersion) {
    throw std::runtime_error("binio: unsupported version " + std::to_string(c.version));
  }
  const auto ndims = get_u(is, 4);
  for (std::uint64_t i = 0; i < ndims; ++i) c.dims.push_back(get_u(is, 8));
  c.count = get_u(is, 8);
  const auto body_len = get_u(is, 8);
  c.body.resize(body_len);
  for (std::uint64_t i = 0; i < body_len; ++i) {
    c.body[i] = std::bit_cast<double>(get_u(is, 8));
  }
  return c;
}

}  // namespace pebble::binio
