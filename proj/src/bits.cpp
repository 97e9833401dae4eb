#include "pscnn/bits.hpp"

#include "pscnn/error.hpp"

namespace pscnn {

std::vector<std::uint8_t> pack_msb_first(const std::vector<bool>& bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  return out;
}

std::vector<bool> unpack_msb_first(const std::vector<std::uint8_t>& bytes, std::size_t nbits) {
  if (bytes.size() * 8 < nbits)
    throw FormatError("bit stream too short: need " + std::to_string(nbits) + " bits, have " +
                      std::to_string(bytes.size() * 8));
  std::vector<bool> out(nbits);
  for (std::size_t i = 0; i < nbits; ++i) out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  return out;
}

std::string to_hex(const Word128& w) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(32, '0');
  for (std::size_t nib = 0; nib < 32; ++nib) {
    unsigned v = 0;
    for (std::size_t b = 0; b < 4; ++b) v |= static_cast<unsigned>(w[nib * 4 + b]) << b;
    s[31 - nib] = kDigits[v];
  }
  return s;
}

Word128 word_from_hex(const std::string& hex) {
  if (hex.size() != 32) throw FormatError("expected 32 hex digits, got '" + hex + "'");
  Word128 w;
  for (std::size_t i = 0; i < 32; ++i) {
    char c = hex[31 - i];
    unsigned v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      v = c - 'A' + 10;
    else
      throw FormatError("bad hex digit in '" + hex + "'");
    for (std::size_t b = 0; b < 4; ++b) w[i * 4 + b] = (v >> b) & 1u;
  }
  return w;
}

}  // namespace pscnn
