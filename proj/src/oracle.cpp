#include "pscnn/oracle.hpp"

#include <variant>

#include "pscnn/error.hpp"

namespace pscnn {

RefTensor input_tensor(const ModelSpec& model, const InputBits& bits) {
  if (bits.size() != std::size_t{model.input_len} * model.input_channels)
    throw ValidationError("input has " + std::to_string(bits.size()) + " bits, model expects " +
                          std::to_string(model.input_len) + " x " +
                          std::to_string(model.input_channels));
  return {model.input_len, model.input_channels, bits};
}

RefTensor ref_conv1d(const RefTensor& x, const LayerWeights& w, std::uint32_t stride,
                     const std::vector<std::int32_t>& bias) {
  if (w.c_in != x.channels || w.k == 0 || w.k > x.len || stride == 0)
    throw ValidationError("ref_conv1d: kernel " + std::to_string(w.k) + "x" +
                          std::to_string(w.c_in) + " does not fit input " +
                          std::to_string(x.len) + "x" + std::to_string(x.channels));
  if (!bias.empty() && bias.size() != w.c_out)
    throw ValidationError("ref_conv1d: bias has " + std::to_string(bias.size()) + " entries for " +
                          std::to_string(w.c_out) + " outputs");
  RefTensor out;
  out.len = (x.len - w.k) / stride + 1;
  out.channels = w.c_out;
  out.bits.resize(std::size_t{out.len} * out.channels);
  for (std::uint32_t t = 0; t < out.len; ++t)
    for (std::uint32_t q = 0; q < w.c_out; ++q) {
      std::int64_t sum = bias.empty() ? 0 : bias[q];
      for (std::uint32_t k = 0; k < w.k; ++k)
        for (std::uint32_t c = 0; c < w.c_in; ++c)
          sum += x.at(t * stride + k, c) * w.at(q, k, c);
      out.bits[std::size_t{t} * out.channels + q] = sum >= 0;
    }
  return out;
}

RefTensor ref_pool(const RefTensor& x, std::uint32_t window) {
  if (window == 0) throw ValidationError("ref_pool: window 0");
  RefTensor out;
  out.len = (x.len + window - 1) / window;
  out.channels = x.channels;
  out.bits.assign(std::size_t{out.len} * out.channels, 0);
  for (std::uint32_t t = 0; t < x.len; ++t)
    for (std::uint32_t c = 0; c < x.channels; ++c)
      out.bits[std::size_t{t / window} * out.channels + c] |= x.at(t, c);
  return out;
}

RefTensor ref_dense(const RefTensor& x, const LayerWeights& w, const std::vector<std::int32_t>& bias) {
  if (std::size_t{w.k} * w.c_in != std::size_t{x.len} * x.channels)
    throw ValidationError("ref_dense: " + std::to_string(std::size_t{w.k} * w.c_in) +
                          " input features, tensor has " +
                          std::to_string(std::size_t{x.len} * x.channels));
  // Flattening position-major is exactly a full-length convolution.
  RefTensor flat{1, w.k * w.c_in, x.bits};
  RefTensor out;
  out.len = 1;
  out.channels = w.c_out;
  out.bits.resize(w.c_out);
  for (std::uint32_t q = 0; q < w.c_out; ++q) {
    std::int64_t sum = bias.empty() ? 0 : bias[q];
    for (std::uint32_t i = 0; i < flat.channels; ++i)
      sum += flat.bits[i] * w.w[std::size_t{q} * flat.channels + i];
    out.bits[q] = sum >= 0;
  }
  return out;
}

std::vector<RefTensor> ref_infer(const ModelSpec& model, const ModelWeights& weights,
                                 const InputBits& input) {
  kernel_shapes(model);
  if (weights.size() != model.layers.size())
    throw ValidationError("ref_infer: weights for " + std::to_string(weights.size()) +
                          " layers, model has " + std::to_string(model.layers.size()));
  std::vector<RefTensor> outs;
  RefTensor x = input_tensor(model, input);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    if (auto* c = std::get_if<Conv1d>(&layer)) {
      x = ref_conv1d(x, weights[i], c->stride, c->bias);
      if (c->fused_pool_window) x = ref_pool(x, *c->fused_pool_window);
    } else if (auto* p = std::get_if<Pool>(&layer)) {
      x = ref_pool(x, p->window);
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      x = ref_dense(x, weights[i], d->bias);
    }
    outs.push_back(x);
  }
  return outs;
}

std::uint64_t mac_count(const ModelSpec& model) {
  auto shapes = kernel_shapes(model);
  std::uint64_t total = 0;
  std::uint32_t len = model.input_len;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    if (auto* c = std::get_if<Conv1d>(&layer)) {
      std::uint32_t n_out = (len - c->k) / c->stride + 1;
      total += std::uint64_t{n_out} * c->c_out * c->k * c->c_in;
      len = c->fused_pool_window ? (n_out + *c->fused_pool_window - 1) / *c->fused_pool_window : n_out;
    } else if (auto* p = std::get_if<Pool>(&layer)) {
      len = (len + p->window - 1) / p->window;
    } else {
      total += std::uint64_t{shapes[i]->c_out} * shapes[i]->k * shapes[i]->c_in;
      len = 1;
    }
  }
  return total;
}

}  // namespace pscnn
