#pragma once

// Maps a binary 1-D CNN onto the macro: weight packing, wordline/column
// placement, macro vs weight-SRAM partitioning, ping-pong bank planning and
// instruction emission.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pscnn/bits.hpp"
#include "pscnn/isa.hpp"
#include "pscnn/memory.hpp"
#include "pscnn/model.hpp"
#include "pscnn/oracle.hpp"

namespace pscnn {

/// Words per feature-map position: channels padded to the 128-bit word.
constexpr std::uint32_t words_per_position(std::uint32_t channels) { return (channels + 127) / 128; }

/// Position-major, channel c of position t in bit c%128 of word
/// t*words_per_position + c/128.
std::vector<Word128> pack_features(const RefTensor& x);
RefTensor unpack_features(const std::vector<Word128>& words, std::uint32_t len, std::uint32_t channels);

/// Geometry of one model layer after validation. Dense layers appear as
/// convolutions with k = incoming length.
struct LayerShape {
  enum class Kind { Conv, Pool } kind = Kind::Conv;
  std::uint32_t in_len = 0, in_channels = 0;
  std::uint32_t c_out = 0, k = 0, stride = 1;
  std::uint32_t steps = 0;        // convolution positions before pooling
  std::uint32_t pool_window = 1;  // fused (Conv) or standalone (Pool) window
  std::uint32_t out_len = 0, out_channels = 0;
  std::uint32_t bias_rows = 0;    // max |bias|
  std::vector<std::int32_t> bias;

  std::uint32_t rows() const { return k * in_channels + bias_rows; }
  std::uint64_t weight_count() const { return std::uint64_t{k} * in_channels * c_out; }
};

struct CheckedModel {
  ModelSpec model;
  std::vector<LayerShape> layers;  // one per model layer
};

/// Checks every mapping bound; errors name the layer index and the bound.
CheckedModel validate(const ModelSpec& model);

/// Wordline rows of one layer, TWM-encoded: pair q holds output channel q,
/// row k*C_in + c holds w[q][k][c], then bias_rows rows carrying sign(b_q)
/// in the first |b_q| of them. Only pairs [0, C_out) are used.
std::vector<Row1024> pack_layer_weights(const LayerShape& shape, const LayerWeights& weights);

/// Inverse of pack_layer_weights for pairs [pair_base, pair_base+C_out).
LayerWeights unpack_layer_weights(const LayerShape& shape, const std::vector<Row1024>& rows,
                                  std::uint32_t pair_base);

struct Placement {
  std::uint32_t wl_base = 0;    // macro rows at execution time
  std::uint32_t wl_count = 0;
  std::uint32_t pair_base = 0;
  std::uint32_t pair_count = 0;
  bool in_wsram = false;
  std::uint32_t wsram_row = 0;  // storage rows [wsram_row, wsram_row + wl_count)
};

/// Per-Mac side table: the geometry the 32-bit Mac word cannot carry.
struct LayerEntry {
  std::uint32_t model_layer = 0;
  isa::MacMode mode = isa::MacMode::ConvOnly;
  std::uint32_t in_len = 0, c_in = 0, c_out = 0, k = 1, stride = 1;
  std::uint32_t bias_rows = 0;
  std::uint32_t pool_window = 1;
  std::uint32_t wl_base = 0, pair_base = 0;
  /// Origin tag expected on macro row wl_base: the preload row index for
  /// macro-resident layers, 1024 + weight-SRAM row for replaced ones.
  std::uint32_t source_tag = 0;

  /// PWB input positions: convolution steps, or IFM positions for bypass.
  std::uint32_t pwb_inputs() const;
  std::uint32_t out_len() const { return (pwb_inputs() + pool_window - 1) / pool_window; }
  std::uint32_t out_channels() const { return mode == isa::MacMode::PoolBypass ? c_in : c_out; }
  std::uint32_t wl_count() const { return k * c_in + bias_rows; }
  /// 128-pair sense groups touched by [pair_base, pair_base + c_out).
  std::uint32_t col_groups() const;

  friend bool operator==(const LayerEntry&, const LayerEntry&) = default;
};

struct BankStep {
  Region ifm, ofm;
  friend bool operator==(const BankStep&, const BankStep&) = default;
};

struct CompileOptions {
  /// false: a convolution with a pool window runs as a plain convolution
  /// followed by a bypass pooling pass.
  bool fuse_pooling = true;
};

struct MappedModel {
  ModelSpec model;
  ModelWeights weights;
  CompileOptions options;
  std::vector<std::optional<Placement>> placements;  // per model layer
  std::vector<LayerEntry> layer_table;               // per Mac, program order
  std::vector<BankStep> bank_plan;                   // per Mac
  std::vector<std::uint32_t> program;
  std::vector<Row1024> macro_image;  // 1024 rows, preloaded
  std::vector<Row1024> wsram_image;  // 512 rows, preloaded
  Region input_region;
  std::uint64_t macro_weights = 0;
  std::uint64_t wsram_weights = 0;
  std::uint32_t wsram_rows = 0;  // rows of weight SRAM in use
  std::uint32_t weight_replacements = 0;
};

/// Places layers bottom-left into the macro in execution order; layers that
/// no longer fit go to the weight SRAM and are swapped in by a WREP over the
/// least recently needed rows. Throws ValidationError or CompileError.
MappedModel map_model(const ModelSpec& model, const ModelWeights& weights,
                      const CompileOptions& options = {});

/// Container: "PSCNNPKG", u32 version, u32 manifest length, JSON manifest,
/// then the blobs it lists (model text, weight sidecar, program binary, macro
/// image, weight-SRAM image).
std::vector<std::uint8_t> save_container(const MappedModel& mm);
MappedModel load_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const MappedModel& mm);
MappedModel read_container(const std::filesystem::path& path);

}  // namespace pscnn
