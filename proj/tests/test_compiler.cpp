#include <gtest/gtest.h>

#include <random>

#include "pscnn/cim_macro.hpp"
#include "pscnn/compiler.hpp"
#include "pscnn/error.hpp"
#include "test_support.hpp"

using namespace pscnn;

namespace {

ModelSpec one_conv(std::uint32_t len, std::uint32_t c_in, std::uint32_t c_out, std::uint32_t k,
                   std::uint32_t stride = 1, std::optional<std::uint32_t> pool = std::nullopt,
                   std::vector<std::int32_t> bias = {}) {
  return {len, c_in, {Conv1d{c_in, c_out, k, stride, pool, std::move(bias)}}};
}

std::string error_of(const ModelSpec& m) {
  try {
    validate(m);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

std::size_t count_op(const std::vector<std::uint32_t>& prog, std::uint32_t opcode) {
  std::size_t n = 0;
  for (auto w : prog) n += (w >> 29) == opcode;
  return n;
}

}  // namespace

TEST(Validate, Examples) {
  auto e = error_of(one_conv(10, 400, 8, 3));
  EXPECT_NE(e.find("layer 0"), std::string::npos);
  EXPECT_NE(e.find("1200"), std::string::npos);
  EXPECT_FALSE(error_of(ModelSpec{4, 4, {}}).empty());
  ModelSpec head{7, 40, {Dense{280, 12, {}}}};
  EXPECT_TRUE(error_of(head).empty());
  auto cm = validate(head);
  EXPECT_EQ(cm.layers[0].k, 7u);
  EXPECT_EQ(cm.layers[0].out_len, 1u);
}

TEST(Validate, Bounds) {
  EXPECT_NE(error_of(one_conv(4, 8, 513, 1)).find("C_out"), std::string::npos);
  EXPECT_NE(error_of(one_conv(8, 8, 8, 1, 3)).find("stride"), std::string::npos);
  EXPECT_NE(error_of(one_conv(8, 8, 8, 1, 1, 3u)).find("pool"), std::string::npos);
  EXPECT_NE(error_of(one_conv(8, 1023, 8, 1, 1, std::nullopt, std::vector<std::int32_t>(8, 2))).find("bias"),
            std::string::npos);
  EXPECT_NE(error_of(one_conv(1100, 1, 8, 1)).find("1024"), std::string::npos);
  EXPECT_NE(error_of(one_conv(300, 128, 512, 1)).find("words"), std::string::npos);
  EXPECT_TRUE(error_of(one_conv(8, 8, 8, 1, 1, 1u)).empty());  // window 1 means none
  ModelSpec pool_first{9, 3, {Pool{3}}};
  EXPECT_FALSE(error_of(pool_first).empty());
}

TEST(Pack, SingleWeight) {
  auto cm = validate(one_conv(1, 1, 1, 1));
  auto rows = pack_layer_weights(cm.layers[0], {1, 1, 1, {1}});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0][0]);
  EXPECT_FALSE(rows[0][1]);
  EXPECT_EQ(rows[0].count(), 1u);
}

TEST(Pack, PositionMajorOrder) {
  auto cm = validate(one_conv(4, 2, 2, 2));
  // w[q][k][c]
  LayerWeights w{2, 2, 2, {1, -1, -1, 1, -1, -1, 1, 1}};
  auto rows = pack_layer_weights(cm.layers[0], w);
  ASSERT_EQ(rows.size(), 4u);
  for (std::uint32_t q = 0; q < 2; ++q)
    for (std::uint32_t k = 0; k < 2; ++k)
      for (std::uint32_t c = 0; c < 2; ++c) {
        auto v = decode_pair({rows[k * 2 + c][2 * q], rows[k * 2 + c][2 * q + 1]});
        EXPECT_EQ(static_cast<int>(v), w.at(q, k, c));
      }
  EXPECT_EQ(unpack_layer_weights(cm.layers[0], rows, 0).w, w.w);
}

TEST(Pack, BiasRowsAtColumnTail) {
  auto cm = validate(one_conv(2, 1, 2, 1, 1, std::nullopt, {-2, 1}));
  EXPECT_EQ(cm.layers[0].bias_rows, 2u);
  auto rows = pack_layer_weights(cm.layers[0], {2, 1, 1, {1, 1}});
  ASSERT_EQ(rows.size(), 3u);
  // channel 0: two (0,1) rows; channel 1: one (1,0) row then padding
  EXPECT_EQ(decode_pair({rows[1][0], rows[1][1]}), TernaryWeight::Neg);
  EXPECT_EQ(decode_pair({rows[2][0], rows[2][1]}), TernaryWeight::Neg);
  EXPECT_EQ(decode_pair({rows[1][2], rows[1][3]}), TernaryWeight::Pos);
  EXPECT_EQ(decode_pair({rows[2][2], rows[2][3]}), TernaryWeight::Zero);
}

TEST(Pack, Bijective) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    std::uint32_t c_in = 1 + rng() % 100, k = 1 + rng() % 8, c_out = 1 + rng() % 512;
    if (k * c_in > 1024) continue;
    auto m = one_conv(k + 3, c_in, c_out, k);
    auto cm = validate(m);
    auto w = random_weights(m, rng());
    EXPECT_EQ(unpack_layer_weights(cm.layers[0], pack_layer_weights(cm.layers[0], w[0]), 0).w, w[0].w);
  }
}

TEST(MapModel, ExactCapacityNeedsNoReplacement) {
  auto m = one_conv(8, 128, 512, 8);
  auto mm = map_model(m, random_weights(m, 1));
  EXPECT_EQ(mm.macro_weights, 524288u);
  EXPECT_EQ(mm.wsram_weights, 0u);
  EXPECT_EQ(mm.weight_replacements, 0u);
  EXPECT_EQ(count_op(mm.program, 0b001), 0u);
}

TEST(MapModel, ReconstructionPartition) {
  auto m = load_model(std::filesystem::path(PSCNN_MODELS) / "kws_reconstruction.model");
  auto mm = map_model(m, random_weights(m, 1));
  EXPECT_EQ(mm.macro_weights, 512u * 1024u);
  EXPECT_EQ(mm.wsram_weights, 140u * 1024u);
  EXPECT_EQ(mm.wsram_rows, 280u);
  EXPECT_GE(count_op(mm.program, 0b001), 1u);
  EXPECT_EQ(mm.program.back(), isa::kHaltWord);
}

TEST(MapModel, OverCapacityRejected) {
  // 3072 rows of 512 pairs against 1024 macro rows plus 512 weight-SRAM rows.
  ModelSpec m{32, 128,
              {Conv1d{128, 512, 8, 1, std::nullopt, {}}, Conv1d{512, 512, 2, 1, std::nullopt, {}},
               Conv1d{512, 512, 2, 1, std::nullopt, {}}}};
  EXPECT_THROW(map_model(m, random_weights(m, 1)), CompileError);
}

TEST(MapModel, PlacementsDisjointAndBanksSafe) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 40; ++i) {
    auto mm = pscnn::testing::compilable_random_case(rng).mapped;
    std::vector<Placement> macro;
    for (const auto& p : mm.placements)
      if (p && !p->in_wsram) macro.push_back(*p);
    for (std::size_t a = 0; a < macro.size(); ++a)
      for (std::size_t b = a + 1; b < macro.size(); ++b) {
        bool rows = macro[a].wl_base < macro[b].wl_base + macro[b].wl_count &&
                    macro[b].wl_base < macro[a].wl_base + macro[a].wl_count;
        bool cols = macro[a].pair_base < macro[b].pair_base + macro[b].pair_count &&
                    macro[b].pair_base < macro[a].pair_base + macro[a].pair_count;
        EXPECT_FALSE(rows && cols);
      }
    for (const auto& s : mm.bank_plan) {
      auto first_in = s.ifm.bank, last_in = s.ifm.bank + s.ifm.span;
      auto first_out = s.ofm.bank, last_out = s.ofm.bank + s.ofm.span;
      EXPECT_TRUE(last_in < first_out || last_out < first_in);
      EXPECT_LE(last_in, 3u);
      EXPECT_LE(last_out, 3u);
    }
  }
}

TEST(MapModel, UnfusedAddsBypassPasses) {
  auto m = one_conv(32, 16, 16, 3, 1, 4u);
  auto w = random_weights(m, 2);
  auto fused = map_model(m, w);
  auto unfused = map_model(m, w, {false});
  ASSERT_EQ(fused.layer_table.size(), 1u);
  EXPECT_EQ(fused.layer_table[0].mode, isa::MacMode::ConvFusedPool);
  ASSERT_EQ(unfused.layer_table.size(), 2u);
  EXPECT_EQ(unfused.layer_table[0].mode, isa::MacMode::ConvOnly);
  EXPECT_EQ(unfused.layer_table[1].mode, isa::MacMode::PoolBypass);
  EXPECT_EQ(unfused.program.size(), fused.program.size() + 2);
}

TEST(Container, RoundTrip) {
  auto m = load_model(std::filesystem::path(PSCNN_MODELS) / "kws_reconstruction.model");
  auto mm = map_model(m, random_weights(m, 1));
  auto bytes = save_container(mm);
  auto back = load_container(bytes);
  EXPECT_EQ(back.model, mm.model);
  EXPECT_EQ(back.program, mm.program);
  EXPECT_EQ(back.layer_table, mm.layer_table);
  EXPECT_EQ(back.bank_plan, mm.bank_plan);
  EXPECT_EQ(back.macro_image, mm.macro_image);
  EXPECT_EQ(back.wsram_image, mm.wsram_image);
  EXPECT_EQ(back.input_region, mm.input_region);
  EXPECT_EQ(back.macro_weights, mm.macro_weights);
  EXPECT_EQ(back.wsram_rows, mm.wsram_rows);
  for (std::size_t i = 0; i < mm.weights.size(); ++i) EXPECT_EQ(back.weights[i].w, mm.weights[i].w);

  bytes[0] = 'X';
  EXPECT_THROW(load_container(bytes), FormatError);
  EXPECT_THROW(load_container(std::vector<std::uint8_t>(10)), FormatError);
}

TEST(Features, PackUnpack) {
  RefTensor x{3, 130, {}};
  std::mt19937_64 rng(1);
  for (int i = 0; i < 3 * 130; ++i) x.bits.push_back(rng() & 1);
  auto words = pack_features(x);
  ASSERT_EQ(words.size(), 6u);
  EXPECT_EQ(words[1][1], x.at(0, 129));
  EXPECT_EQ(unpack_features(words, 3, 130), x);
}
