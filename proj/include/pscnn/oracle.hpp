#pragma once

// Brute-force binary 1-D CNN inference. Activations are {1, 0}: a zero input
// contributes nothing to the dot product, like an idle wordline.

#include <cstdint>
#include <vector>

#include "pscnn/model.hpp"

namespace pscnn {

struct RefTensor {
  std::uint32_t len = 0;
  std::uint32_t channels = 0;
  std::vector<std::uint8_t> bits;  // bits[t * channels + c]

  std::uint8_t at(std::uint32_t t, std::uint32_t c) const { return bits[std::size_t{t} * channels + c]; }
  friend bool operator==(const RefTensor&, const RefTensor&) = default;
};

RefTensor input_tensor(const ModelSpec& model, const InputBits& bits);

/// out[t][q] = 1 iff sum_{k,c} x[t*stride+k][c] * w[q][k][c] + bias[q] >= 0.
RefTensor ref_conv1d(const RefTensor& x, const LayerWeights& w, std::uint32_t stride,
                     const std::vector<std::int32_t>& bias);

/// Non-overlapping max pool; a ragged tail pools what remains.
RefTensor ref_pool(const RefTensor& x, std::uint32_t window);

/// Flattens x position-major and applies a fully connected layer.
RefTensor ref_dense(const RefTensor& x, const LayerWeights& w, const std::vector<std::int32_t>& bias);

/// Output of every model layer in order (a conv with a fused pool yields the
/// pooled map).
std::vector<RefTensor> ref_infer(const ModelSpec& model, const ModelWeights& weights,
                                 const InputBits& input);

/// Multiply-accumulates per inference: sum over weighted layers of
/// n_out * C_out * K * C_in.
std::uint64_t mac_count(const ModelSpec& model);

}  // namespace pscnn
