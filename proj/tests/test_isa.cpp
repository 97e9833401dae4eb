#include <gtest/gtest.h>

#include <random>

#include "pscnn/error.hpp"
#include "pscnn/isa.hpp"
#include "pscnn/model.hpp"

using namespace pscnn;
using namespace pscnn::isa;

namespace {

Instruction random_instruction(std::mt19937_64& rng) {
  auto u = [&](std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
  };
  switch (u(0, 3)) {
    case 0: {
      Mac m;
      m.mode = static_cast<MacMode>(u(0, 2));
      m.n_out = u(1, 1024);
      m.wl_count = u(1, 1024);
      m.col_groups = u(1, 4);
      m.stride = 1u << u(0, 3);
      m.pool_window = m.mode == MacMode::ConvOnly ? 1 : 1u << u(1, 3);
      return m;
    }
    case 1: {
      WeightReplace w;
      w.cim_row_base = u(0, 1023);
      w.row_count = u(1, std::min(1024 - w.cim_row_base, 512u));
      w.wsram_row = u(0, 512 - w.row_count);
      return w;
    }
    case 2: {
      Pointer p{u(0, 3), u(0, 511), u(0, 3), u(0, 511), false, false};
      p.ifm_span = p.ifm_bank < 3 && u(0, 1);
      p.ofm_span = p.ofm_bank < 3 && u(0, 1);
      return p;
    }
    default:
      return Halt{};
  }
}

}  // namespace

TEST(Isa, HaltEncoding) {
  EXPECT_EQ(encode(Halt{}), 0xE0000000u);
  EXPECT_TRUE(std::holds_alternative<Halt>(decode(0xE0000000u)));
}

TEST(Isa, MinimalMacIsZeroWord) {
  EXPECT_EQ(encode(Mac{}), 0u);
  EXPECT_EQ(std::get<Mac>(decode(0)), Mac{});
}

TEST(Isa, WeightReplaceOverflowRegion) {
  // 001 | 884 << 19 | 139 << 9 | 0
  EXPECT_EQ(encode(WeightReplace{884, 140, 0}), 0x3BA11600u);
}

TEST(Isa, FieldPositions) {
  Mac m{MacMode::ConvFusedPool, 1024, 1024, 4, 8, 8};
  EXPECT_EQ(encode(m), (1u << 27) | (1023u << 17) | (1023u << 7) | (3u << 5) | (3u << 3) | (3u << 1));
  Pointer p{3, 511, 2, 7, false, true};
  EXPECT_EQ(encode(p), (2u << 29) | (3u << 27) | (511u << 18) | (2u << 16) | (7u << 7) | (1u << 5));
}

TEST(Isa, IllegalOpcodesCarryWord) {
  for (std::uint32_t op : {3u, 4u, 5u, 6u}) {
    std::uint32_t w = (op << 29) | 0x1234;
    try {
      decode(w);
      FAIL() << "opcode " << op << " decoded";
    } catch (const IllegalOpcode& e) {
      EXPECT_EQ(e.word(), w);
    }
  }
}

TEST(Isa, ReservedBitsRejected) {
  EXPECT_THROW(decode(1u), DecodeError);                // MAC bit 0
  EXPECT_THROW(decode(3u << 27), DecodeError);          // MAC mode 3
  EXPECT_THROW(decode((2u << 29) | 1u), DecodeError);   // PTR low bits
  EXPECT_THROW(decode(0xE0000001u), DecodeError);       // HALT payload
  EXPECT_THROW(decode((2u << 29) | (3u << 27) | (1u << 6)), DecodeError);  // span past bank 3
}

TEST(Isa, EncodeRangeErrorsNameField) {
  try {
    encode(Mac{MacMode::ConvOnly, 2000, 1, 1, 1, 1});
    FAIL();
  } catch (const EncodingError& e) {
    EXPECT_EQ(e.field(), "n_out");
  }
  EXPECT_THROW(encode(Mac{MacMode::ConvOnly, 1, 1, 1, 2, 1}), EncodingError);
  EXPECT_THROW(encode(Mac{MacMode::PoolBypass, 1, 1, 1, 1, 1}), EncodingError);
  EXPECT_THROW(encode(Mac{MacMode::ConvOnly, 1, 1, 1, 1, 3}), EncodingError);
  EXPECT_THROW(encode(WeightReplace{1000, 100, 0}), EncodingError);
  EXPECT_THROW(encode(WeightReplace{0, 100, 450}), EncodingError);
  EXPECT_THROW(encode(Pointer{4, 0, 0, 0, false, false}), EncodingError);
}

TEST(Isa, RoundTripProperty) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100000; ++i) {
    auto ins = random_instruction(rng);
    auto w = encode(ins);
    ASSERT_EQ(decode(w), ins);
    ASSERT_EQ(encode(decode(w)), w);
  }
}

TEST(Isa, EveryWordDecodesOrThrows) {
  std::mt19937 rng(3);
  for (int i = 0; i < 200000; ++i) {
    std::uint32_t w = rng();
    try {
      ASSERT_EQ(encode(decode(w)), w);
    } catch (const DecodeError&) {
    }
  }
}

TEST(Isa, AssembleExamples) {
  EXPECT_EQ(assemble("HALT").words, std::vector<std::uint32_t>{0xE0000000u});
  auto r = assemble("PTR ifm_bank=0 ifm_word=0 ofm_bank=1 ofm_word=0\nMAC mode=conv n_out=16 wl_count=64 col_groups=1\nHALT");
  ASSERT_EQ(r.words.size(), 3u);
  EXPECT_EQ(decode(r.words[0]), Instruction(Pointer{0, 0, 1, 0, false, false}));
  EXPECT_EQ(decode(r.words[1]), Instruction(Mac{MacMode::ConvOnly, 16, 64, 1, 1, 1}));
  EXPECT_TRUE(r.warnings.empty());
  try {
    assemble("MAC n_out=2000");
    FAIL();
  } catch (const AssemblyError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Isa, AssembleAppendsHaltAndIgnoresCase) {
  auto r = assemble("  # comment\nptr IFM_BANK=1 ifm_word=2 ofm_bank=3 ofm_word=4  # trailing\n");
  ASSERT_EQ(r.words.size(), 2u);
  EXPECT_EQ(r.words.back(), kHaltWord);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Isa, AssembleErrorsCarryLine) {
  auto line_of = [](const char* src) {
    try {
      assemble(src);
    } catch (const AssemblyError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("HALT\nJMP x=1"), 2u);
  EXPECT_EQ(line_of("PTR ifm_bank=0\n"), 1u);
  EXPECT_EQ(line_of("\n\nWREP cim_row_base=0 row_count=0 wsram_row=0"), 3u);
  EXPECT_EQ(line_of("MAC mode=conv n_out=1 wl_count=1 n_out=2"), 1u);
  EXPECT_EQ(line_of("MAC mode=conv n_out=1 wl_count=1 colour=2"), 1u);
  EXPECT_EQ(line_of("MAC mode=conv n_out=x wl_count=1"), 1u);
}

TEST(Isa, DisassembleAssembleRoundTrip) {
  std::mt19937_64 rng(11);
  std::vector<std::uint32_t> prog;
  for (int i = 0; i < 2000; ++i) {
    auto ins = random_instruction(rng);
    if (!std::holds_alternative<Halt>(ins)) prog.push_back(encode(ins));
  }
  prog.push_back(kHaltWord);
  auto text = disassemble_program(prog);
  auto back = assemble(text);
  EXPECT_EQ(back.words, prog);
  EXPECT_TRUE(back.warnings.empty());
}

TEST(Isa, BinaryIsLittleEndian) {
  std::vector<std::uint32_t> w{0x11223344u, kHaltWord};
  auto b = to_binary(w);
  ASSERT_EQ(b.size(), 8u);
  EXPECT_EQ(b[0], 0x44);
  EXPECT_EQ(b[7], 0xE0);
  EXPECT_EQ(from_binary(b), w);
  std::vector<std::uint8_t> bad{1, 2, 3};
  EXPECT_THROW(from_binary(bad), FormatError);
}

TEST(Isa, GoldenFixture) {
  auto dir = std::filesystem::path(PSCNN_FIXTURES);
  auto golden = read_file(dir / "golden.bin");
  auto assembled = to_binary(assemble(read_text(dir / "golden.asm")).words);
  ASSERT_GE(golden.size() / 4, 20u);
  EXPECT_EQ(assembled, golden);
  EXPECT_EQ(to_binary(assemble(disassemble_program(from_binary(golden))).words), golden);
}
