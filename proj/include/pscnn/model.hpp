#pragma once

// Binary 1-D CNN model description: layer list, text format and the packed
// sign-bit weight sidecar.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pscnn {

struct Conv1d {
  std::uint32_t c_in = 1;
  std::uint32_t c_out = 1;
  std::uint32_t k = 1;
  std::uint32_t stride = 1;
  std::optional<std::uint32_t> fused_pool_window;
  std::vector<std::int32_t> bias;  // empty, or one entry per output channel
  friend bool operator==(const Conv1d&, const Conv1d&) = default;
};

struct Pool {
  std::uint32_t window = 2;
  friend bool operator==(const Pool&, const Pool&) = default;
};

/// Fully connected over the flattened (position-major) feature map.
struct Dense {
  std::uint32_t in_features = 1;
  std::uint32_t out_features = 1;
  std::vector<std::int32_t> bias;
  friend bool operator==(const Dense&, const Dense&) = default;
};

using Layer = std::variant<Conv1d, Pool, Dense>;

struct ModelSpec {
  std::uint32_t input_len = 1;
  std::uint32_t input_channels = 1;
  std::vector<Layer> layers;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Weights of one weighted layer: value (+1 or -1) of output channel q,
/// kernel position k, input channel c at index (q*K + k)*C_in + c. Dense
/// layers use K = the input length.
struct LayerWeights {
  std::uint32_t c_out = 0, k = 0, c_in = 0;
  std::vector<std::int8_t> w;

  std::int8_t at(std::uint32_t q, std::uint32_t kk, std::uint32_t c) const {
    return w[(static_cast<std::size_t>(q) * k + kk) * c_in + c];
  }
};

/// One entry per layer of the model; empty for Pool layers.
using ModelWeights = std::vector<LayerWeights>;

/// Text format:
///
///   [model]
///   input_len = 263
///   input_channels = 64
///
///   [conv1d]
///   c_in = 64
///   c_out = 512
///   k = 8
///   stride = 1            # optional, default 1
///   fused_pool_window = 2 # optional
///   bias = 0, -1, 2, ...  # optional, one per output channel
///
///   [pool]
///   window = 2
///
///   [dense]
///   in_features = 280
///   out_features = 12
ModelSpec parse_model(std::string_view text);
std::string format_model(const ModelSpec& model);
ModelSpec load_model(const std::filesystem::path& path);

/// Kernel geometry of a weighted layer given its input length and channels.
struct KernelShape {
  std::uint32_t c_out, k, c_in;
};

/// Shapes of every weighted layer's weights, following the model's
/// length/channel chain; nullopt for Pool layers. Throws ValidationError on a
/// broken chain.
std::vector<std::optional<KernelShape>> kernel_shapes(const ModelSpec& model);

/// Sidecar: one bit per weight (1 = +1), MSB-first, layer-major in model
/// order, each layer starting on a byte boundary.
std::vector<std::uint8_t> encode_weights(const ModelSpec& model, const ModelWeights& weights);
ModelWeights decode_weights(const ModelSpec& model, const std::vector<std::uint8_t>& bytes);

ModelWeights random_weights(const ModelSpec& model, std::uint64_t seed);

/// Input feature map: input_len x input_channels bits, position-major,
/// MSB-first.
using InputBits = std::vector<std::uint8_t>;  // one byte per bit, 0 or 1
std::vector<std::uint8_t> encode_input(const InputBits& bits);
InputBits decode_input(const ModelSpec& model, const std::vector<std::uint8_t>& bytes);
InputBits random_input(const ModelSpec& model, std::uint64_t seed);

struct RandomModelOptions {
  std::uint32_t min_layers = 1, max_layers = 6;
  std::uint32_t max_channels = 512;
  std::uint32_t max_kernel = 8;
  std::uint32_t min_len = 8, max_len = 64;
  double pool_probability = 0.3;
  double bias_probability = 0.2;
};

/// Random conv/pool stack honoring the per-layer mapping bounds. The result
/// may still exceed total capacity; callers that need a compilable model
/// retry with another seed.
ModelSpec random_model(std::mt19937_64& rng, const RandomModelOptions& opts = {});

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace pscnn
