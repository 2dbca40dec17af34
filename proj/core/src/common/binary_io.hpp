#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string_view>

#include "vevo/common/error.hpp"

namespace vevo::io {

// Explicit little-endian encoding regardless of host order.

template <typename U>
void write_le(std::ostream& out, U value) {
  static_assert(std::is_integral_v<U>);
  using Unsigned = std::make_unsigned_t<U>;
  auto u = static_cast<Unsigned>(value);
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((u >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U read_le(std::istream& in) {
  static_assert(std::is_integral_v<U>);
  using Unsigned = std::make_unsigned_t<U>;
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError("unexpected end of stream");
  Unsigned u = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<Unsigned>(bytes[i]) << (8 * i);
  return static_cast<U>(u);
}

inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& in) { return std::bit_cast<float>(read_le<std::uint32_t>(in)); }

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
  std::array<char, 16> buf{};
  in.read(buf.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || std::string_view(buf.data(), magic.size()) != magic) {
    throw FormatError(std::string(what) + ": bad magic");
  }
}

}  // namespace vevo::io
