#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

// Little-endian primitives shared by the feature and checkpoint formats.
namespace procap::io {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  std::uint32_t lo = 0, hi = 0;
  if (!get_u32(is, lo) || !get_u32(is, hi)) return false;
  v = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return true;
}

inline void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline bool get_f32(std::istream& is, float& f) {
  std::uint32_t u = 0;
  if (!get_u32(is, u)) return false;
  f = std::bit_cast<float>(u);
  return true;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline bool get_string(std::istream& is, std::string& s) {
  std::uint32_t n = 0;
  if (!get_u32(is, n)) return false;
  s.assign(n, '\0');
  return static_cast<bool>(is.read(s.data(), n));
}

}  // namespace procap::io
