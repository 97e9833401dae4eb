#include "pscnn/isa.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

#include "pscnn/error.hpp"

namespace pscnn {

DecodeError::DecodeError(std::uint32_t word, const std::string& what)
    : Error([&] {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08X", word);
        return "decode error: word " + std::string(buf) + ": " + what;
      }()),
      word_(word) {}

IllegalOpcode::IllegalOpcode(std::uint32_t word)
    : DecodeError(word, "illegal opcode " + std::to_string(word >> 29)) {}

}  // namespace pscnn

namespace pscnn::isa {
namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw EncodingError(field, what);
}

void require_range(std::uint32_t v, std::uint32_t lo, std::uint32_t hi, const char* field) {
  require(v >= lo && v <= hi, field,
          std::to_string(v) + " outside " + std::to_string(lo) + ".." + std::to_string(hi));
}

bool is_pow2_upto8(std::uint32_t v) { return v == 1 || v == 2 || v == 4 || v == 8; }

std::uint32_t log2_small(std::uint32_t v) { return static_cast<std::uint32_t>(std::countr_zero(v)); }

std::uint32_t bits(std::uint32_t word, int hi, int lo) {
  return (word >> lo) & ((1u << (hi - lo + 1)) - 1u);
}

void check_mac(const Mac& m) {
  require(m.mode == MacMode::ConvOnly || m.mode == MacMode::ConvFusedPool ||
              m.mode == MacMode::PoolBypass,
          "mode", "unknown MAC mode");
  require_range(m.n_out, 1, 1024, "n_out");
  require_range(m.wl_count, 1, 1024, "wl_count");
  require_range(m.col_groups, 1, 4, "col_groups");
  require(is_pow2_upto8(m.pool_window), "pool_window",
          std::to_string(m.pool_window) + " not one of 1,2,4,8");
  require(is_pow2_upto8(m.stride), "stride", std::to_string(m.stride) + " not one of 1,2,4,8");
  if (m.mode == MacMode::ConvOnly)
    require(m.pool_window == 1, "pool_window", "conv-only MAC requires pool_window=1");
  else
    require(m.pool_window > 1, "pool_window", "pooling MAC requires pool_window>1");
}

void check_wrep(const WeightReplace& w) {
  require_range(w.cim_row_base, 0, 1023, "cim_row_base");
  require_range(w.row_count, 1, 1024, "row_count");
  require_range(w.wsram_row, 0, 511, "wsram_row");
  require(w.cim_row_base + w.row_count <= 1024, "row_count",
          "cim_row_base + row_count exceeds 1024 wordlines");
  require(w.wsram_row + w.row_count <= 512, "row_count",
          "wsram_row + row_count exceeds 512 weight-SRAM rows");
}

void check_ptr(const Pointer& p) {
  require_range(p.ifm_bank, 0, 3, "ifm_bank");
  require_range(p.ifm_word, 0, 511, "ifm_word");
  require_range(p.ofm_bank, 0, 3, "ofm_bank");
  require_range(p.ofm_word, 0, 511, "ofm_word");
  require(!p.ifm_span || p.ifm_bank < 3, "ifm_span", "bank 3 has no successor to span into");
  require(!p.ofm_span || p.ofm_bank < 3, "ofm_span", "bank 3 has no successor to span into");
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string mode_name(MacMode mode) {
  switch (mode) {
    case MacMode::ConvOnly: return "conv";
    case MacMode::ConvFusedPool: return "fused";
    case MacMode::PoolBypass: return "bypass";
  }
  return "?";
}

void check(const Instruction& instr) {
  std::visit(Overloaded{[](const Mac& m) { check_mac(m); },
                        [](const WeightReplace& w) { check_wrep(w); },
                        [](const Pointer& p) { check_ptr(p); }, [](const Halt&) {}},
             instr);
}

std::uint32_t encode(const Instruction& instr) {
  check(instr);
  return std::visit(
      Overloaded{
          [](const Mac& m) -> std::uint32_t {
            return (static_cast<std::uint32_t>(Opcode::Mac) << 29) |
                   (static_cast<std::uint32_t>(m.mode) << 27) | ((m.n_out - 1) << 17) |
                   ((m.wl_count - 1) << 7) | ((m.col_groups - 1) << 5) |
                   (log2_small(m.pool_window) << 3) | (log2_small(m.stride) << 1);
          },
          [](const WeightReplace& w) -> std::uint32_t {
            return (static_cast<std::uint32_t>(Opcode::WeightReplace) << 29) |
                   (w.cim_row_base << 19) | ((w.row_count - 1) << 9) | w.wsram_row;
          },
          [](const Pointer& p) -> std::uint32_t {
            return (static_cast<std::uint32_t>(Opcode::Pointer) << 29) | (p.ifm_bank << 27) |
                   (p.ifm_word << 18) | (p.ofm_bank << 16) | (p.ofm_word << 7) |
                   (static_cast<std::uint32_t>(p.ifm_span) << 6) |
                   (static_cast<std::uint32_t>(p.ofm_span) << 5);
          },
          [](const Halt&) -> std::uint32_t { return kHaltWord; }},
      instr);
}

Instruction decode(std::uint32_t word) {
  Instruction out;
  switch (word >> 29) {
    case 0b000: {
      auto mode = bits(word, 28, 27);
      if (mode == 3) throw DecodeError(word, "reserved MAC mode 3");
      if (word & 1u) throw DecodeError(word, "reserved MAC bit 0 set");
      out = Mac{static_cast<MacMode>(mode),  bits(word, 26, 17) + 1, bits(word, 16, 7) + 1,
                bits(word, 6, 5) + 1,        1u << bits(word, 4, 3), 1u << bits(word, 2, 1)};
      break;
    }
    case 0b001:
      out = WeightReplace{bits(word, 28, 19), bits(word, 18, 9) + 1, bits(word, 8, 0)};
      break;
    case 0b010:
      if (bits(word, 4, 0) != 0) throw DecodeError(word, "reserved PTR bits [4:0] set");
      out = Pointer{bits(word, 28, 27), bits(word, 26, 18), bits(word, 17, 16), bits(word, 15, 7),
                    bits(word, 6, 6) != 0, bits(word, 5, 5) != 0};
      break;
    case 0b111:
      if (word != kHaltWord) throw DecodeError(word, "HALT payload must be zero");
      return Halt{};
    default:
      throw IllegalOpcode(word);
  }
  try {
    check(out);
  } catch (const EncodingError& e) {
    throw DecodeError(word, e.what());
  }
  return out;
}

std::string disassemble(const Instruction& instr) {
  return std::visit(
      Overloaded{[](const Mac& m) {
                   std::ostringstream os;
                   os << "MAC mode=" << mode_name(m.mode) << " n_out=" << m.n_out
                      << " wl_count=" << m.wl_count << " col_groups=" << m.col_groups
                      << " pool_window=" << m.pool_window << " stride=" << m.stride;
                   return os.str();
                 },
                 [](const WeightReplace& w) {
                   std::ostringstream os;
                   os << "WREP cim_row_base=" << w.cim_row_base << " row_count=" << w.row_count
                      << " wsram_row=" << w.wsram_row;
                   return os.str();
                 },
                 [](const Pointer& p) {
                   std::ostringstream os;
                   os << "PTR ifm_bank=" << p.ifm_bank << " ifm_word=" << p.ifm_word
                      << " ofm_bank=" << p.ofm_bank << " ofm_word=" << p.ofm_word
                      << " ifm_span=" << p.ifm_span << " ofm_span=" << p.ofm_span;
                   return os.str();
                 },
                 [](const Halt&) { return std::string("HALT"); }},
      instr);
}

std::string disassemble_program(std::span<const std::uint32_t> words) {
  std::string out;
  for (auto w : words) {
    out += disassemble(decode(w));
    out += '\n';
  }
  return out;
}

namespace {

class OperandSet {
 public:
  OperandSet(std::size_t line, std::map<std::string, std::string> kv)
      : line_(line), kv_(std::move(kv)) {}

  std::optional<std::string> take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    std::string v = it->second;
    kv_.erase(it);
    return v;
  }

  std::uint32_t number(const std::string& key, std::optional<std::uint32_t> fallback = {}) {
    auto v = take(key);
    if (!v) {
      if (fallback) return *fallback;
      throw AssemblyError(line_, "missing operand '" + key + "'");
    }
    if (v->empty() || !std::all_of(v->begin(), v->end(), ::isdigit) || v->size() > 9)
      throw AssemblyError(line_, "operand '" + key + "' is not a non-negative integer: '" + *v + "'");
    return static_cast<std::uint32_t>(std::stoul(*v));
  }

  bool flag(const std::string& key) {
    auto v = number(key, 0u);
    if (v > 1) throw AssemblyError(line_, "operand '" + key + "' must be 0 or 1");
    return v == 1;
  }

  void finish() {
    if (!kv_.empty()) throw AssemblyError(line_, "unknown operand '" + kv_.begin()->first + "'");
  }

 private:
  std::size_t line_;
  std::map<std::string, std::string> kv_;
};

Instruction parse_line(std::size_t line_no, const std::vector<std::string>& tokens) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    auto eq = tokens[i].find('=');
    if (eq == std::string::npos || eq == 0)
      throw AssemblyError(line_no, "expected key=value, got '" + tokens[i] + "'");
    auto key = tokens[i].substr(0, eq);
    if (!kv.emplace(key, tokens[i].substr(eq + 1)).second)
      throw AssemblyError(line_no, "duplicate operand '" + key + "'");
  }
  OperandSet ops(line_no, std::move(kv));
  const std::string& mnemonic = tokens[0];
  Instruction instr;
  if (mnemonic == "mac") {
    Mac m;
    auto mode = ops.take("mode");
    if (!mode) throw AssemblyError(line_no, "missing operand 'mode'");
    if (*mode == "conv")
      m.mode = MacMode::ConvOnly;
    else if (*mode == "fused")
      m.mode = MacMode::ConvFusedPool;
    else if (*mode == "bypass")
      m.mode = MacMode::PoolBypass;
    else
      throw AssemblyError(line_no, "unknown MAC mode '" + *mode + "'");
    m.n_out = ops.number("n_out");
    m.wl_count = ops.number("wl_count", m.mode == MacMode::PoolBypass
                                            ? std::optional<std::uint32_t>(1)
                                            : std::nullopt);
    m.col_groups = ops.number("col_groups", 1u);
    m.pool_window = ops.number("pool_window", 1u);
    m.stride = ops.number("stride", 1u);
    instr = m;
  } else if (mnemonic == "wrep") {
    WeightReplace w;
    w.cim_row_base = ops.number("cim_row_base");
    w.row_count = ops.number("row_count");
    w.wsram_row = ops.number("wsram_row");
    instr = w;
  } else if (mnemonic == "ptr") {
    Pointer p;
    p.ifm_bank = ops.number("ifm_bank");
    p.ifm_word = ops.number("ifm_word");
    p.ofm_bank = ops.number("ofm_bank");
    p.ofm_word = ops.number("ofm_word");
    p.ifm_span = ops.flag("ifm_span");
    p.ofm_span = ops.flag("ofm_span");
    instr = p;
  } else if (mnemonic == "halt") {
    instr = Halt{};
  } else {
    throw AssemblyError(line_no, "unknown mnemonic '" + mnemonic + "'");
  }
  ops.finish();
  try {
    check(instr);
  } catch (const EncodingError& e) {
    throw AssemblyError(line_no, e.what());
  }
  return instr;
}

}  // namespace

AssembleResult assemble(std::string_view source) {
  AssembleResult result;
  std::size_t line_no = 0;
  bool last_is_halt = false;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    auto nl = source.find('\n', pos);
    if (nl == std::string_view::npos) nl = source.size();
    std::string line(source.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::transform(line.begin(), line.end(), line.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::istringstream is(line);
    std::vector<std::string> tokens;
    for (std::string t; is >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    auto instr = parse_line(line_no, tokens);
    result.words.push_back(encode(instr));
    last_is_halt = std::holds_alternative<Halt>(instr);
  }
  if (!last_is_halt) {
    result.words.push_back(kHaltWord);
    result.warnings.push_back("program does not end in HALT; appended one");
  }
  return result;
}

std::vector<std::uint8_t> to_binary(std::span<const std::uint32_t> words) {
  std::vector<std::uint8_t> out;
  out.reserve(words.size() * 4);
  for (auto w : words)
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(w >> (8 * b)));
  return out;
}

std::vector<std::uint32_t> from_binary(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0)
    throw FormatError("program binary length " + std::to_string(bytes.size()) +
                      " is not a multiple of 4");
  std::vector<std::uint32_t> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int b = 0; b < 4; ++b) out[i] |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
  return out;
}

}  // namespace pscnn::isa
