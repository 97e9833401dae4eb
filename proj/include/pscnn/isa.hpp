#pragma once

// 32-bit instruction word: encoding, decoding and a line-oriented assembly syntax.
//
//   bits[31:29]  opcode   000 MAC | 001 WREP | 010 PTR | 111 HALT
//
//   MAC   [28:27] mode  [26:17] n_out-1  [16:7] wl_count-1  [6:5] col_groups-1
//         [4:3] log2(pool_window)  [2:1] log2(stride)  [0] 0
//   WREP  [28:19] cim_row_base  [18:9] row_count-1  [8:0] wsram_row
//   PTR   [28:27] ifm_bank  [26:18] ifm_word  [17:16] ofm_bank  [15:7] ofm_word
//         [6] ifm_span  [5] ofm_span  [4:0] 0
//   HALT  [28:0] 0

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pscnn::isa {

enum class Opcode : std::uint8_t { Mac = 0b000, WeightReplace = 0b001, Pointer = 0b010, Halt = 0b111 };

enum class MacMode : std::uint8_t {
  ConvOnly = 0,       // macro output written as-is
  ConvFusedPool = 1,  // macro output max-pooled by the PWB before write-back
  PoolBypass = 2,     // macro bypassed, PWB pools an IFM stream
};

struct Mac {
  MacMode mode = MacMode::ConvOnly;
  std::uint32_t n_out = 1;        // output positions, 1..1024
  std::uint32_t wl_count = 1;     // active wordlines per step, 1..1024
  std::uint32_t col_groups = 1;   // 128-pair sense groups read per step, 1..4
  std::uint32_t pool_window = 1;  // 1, 2, 4 or 8
  std::uint32_t stride = 1;       // 1, 2, 4 or 8
  friend bool operator==(const Mac&, const Mac&) = default;
};

struct WeightReplace {
  std::uint32_t cim_row_base = 0;  // 0..1023
  std::uint32_t row_count = 1;     // 1..1024
  std::uint32_t wsram_row = 0;     // 0..511
  friend bool operator==(const WeightReplace&, const WeightReplace&) = default;
};

struct Pointer {
  std::uint32_t ifm_bank = 0;  // 0..3
  std::uint32_t ifm_word = 0;  // 0..511
  std::uint32_t ofm_bank = 0;
  std::uint32_t ofm_word = 0;
  bool ifm_span = false;  // IFM may continue into bank ifm_bank+1
  bool ofm_span = false;
  friend bool operator==(const Pointer&, const Pointer&) = default;
};

struct Halt {
  friend bool operator==(const Halt&, const Halt&) = default;
};

using Instruction = std::variant<Mac, WeightReplace, Pointer, Halt>;

inline constexpr std::uint32_t kHaltWord = 0xE000'0000u;

/// Throws EncodingError naming the first offending field.
std::uint32_t encode(const Instruction& instr);

/// Throws IllegalOpcode for opcodes 011..110 and DecodeError for words whose
/// payload violates an instruction invariant or sets a reserved bit.
Instruction decode(std::uint32_t word);

/// Checks every field invariant; same errors as encode.
void check(const Instruction& instr);

/// Canonical one-line text form, accepted back by assemble.
std::string disassemble(const Instruction& instr);
std::string disassemble_program(std::span<const std::uint32_t> words);

struct AssembleResult {
  std::vector<std::uint32_t> words;
  std::vector<std::string> warnings;
};

/// One instruction per line: MAC/WREP/PTR/HALT followed by key=value operands.
/// '#' starts a comment, everything is case-insensitive. A HALT is appended
/// (with a warning) when the source does not end in one.
AssembleResult assemble(std::string_view source);

/// Little-endian 32-bit words, no header.
std::vector<std::uint8_t> to_binary(std::span<const std::uint32_t> words);
std::vector<std::uint32_t> from_binary(std::span<const std::uint8_t> bytes);

std::string mode_name(MacMode mode);

}  // namespace pscnn::isa
