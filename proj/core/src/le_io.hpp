#pragma once

// Little-endian binary helpers shared by the file formats.

#include "slim/types.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace slim::detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (std::size_t i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(bytes.data(), 8);
}

inline void put_f64(std::ostream& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

inline std::uint64_t get_u64(std::istream& in, const std::string& what) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!in) throw StreamError(what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

inline void read_f64s(std::istream& in, double* dst, std::size_t count, const std::string& what) {
  std::vector<unsigned char> raw(count * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw StreamError(what);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(raw[8 * k + i]) << (8 * i);
    dst[k] = std::bit_cast<double>(v);
  }
}

}  // namespace slim::detail
