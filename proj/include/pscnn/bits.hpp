#pragma once

#include <bitset>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pscnn {

inline constexpr std::size_t kWordBits = 128;
inline constexpr std::size_t kRowBits = 1024;

/// One feature-SRAM word; also the width of one sense-amplifier readout.
using Word128 = std::bitset<kWordBits>;
/// One macro wordline image, or the line-buffer contents.
using Row1024 = std::bitset<kRowBits>;

/// Bits [lo, lo+count) set.
template <std::size_t N>
std::bitset<N> bit_range_mask(std::size_t lo, std::size_t count) {
  if (count == 0) return {};
  std::bitset<N> m;
  m.set();
  m >>= (N - count);
  m <<= lo;
  return m;
}

/// Packs bits MSB-first: bit 0 of the sequence lands in bit 7 of byte 0.
std::vector<std::uint8_t> pack_msb_first(const std::vector<bool>& bits);
std::vector<bool> unpack_msb_first(const std::vector<std::uint8_t>& bytes, std::size_t nbits);

/// 32 hex digits, bit 127 first.
std::string to_hex(const Word128& w);
Word128 word_from_hex(const std::string& hex);

}  // namespace pscnn
