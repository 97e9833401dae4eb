#include "pscnn/pwb.hpp"

#include <vector>

#include "pscnn/error.hpp"
#include "pscnn/memory.hpp"

namespace pscnn {

PoolState::PoolState(std::uint32_t window) : window_(window) {
  if (window != 1 && window != 2 && window != 4 && window != 8)
    throw RangeError("pool window " + std::to_string(window) + " not one of 1,2,4,8");
}

std::optional<Word128> PoolState::step(const Word128& v) {
  acc_ |= v;
  if (++fill_ < window_) return std::nullopt;
  Word128 out = acc_;
  acc_.reset();
  fill_ = 0;
  return out;
}

std::optional<Word128> PoolState::flush() {
  if (fill_ == 0) return std::nullopt;
  Word128 out = acc_;
  acc_.reset();
  fill_ = 0;
  return out;
}

BypassCost bypass_pool(FeatureSram& mem, std::size_t n_positions, std::size_t words_per_position,
                       std::uint32_t window, std::uint64_t start_cycle) {
  std::vector<PoolState> lanes(words_per_position, PoolState(window));
  BypassCost cost;
  std::uint64_t cycle = start_cycle;
  std::size_t out_pos = 0;
  auto write_position = [&](std::vector<Word128>& pooled) {
    for (std::size_t w = 0; w < words_per_position; ++w) {
      mem.write_ofm(out_pos * words_per_position + w, pooled[w], cycle++);
      ++cost.writes;
    }
    ++out_pos;
  };
  std::vector<Word128> pooled(words_per_position);
  for (std::size_t t = 0; t < n_positions; ++t) {
    bool emitted = false;
    for (std::size_t w = 0; w < words_per_position; ++w) {
      Word128 v = mem.read_ifm(t * words_per_position + w, cycle++);
      ++cost.reads;
      if (auto out = lanes[w].step(v)) {
        pooled[w] = *out;
        emitted = true;
      }
    }
    if (emitted) write_position(pooled);
  }
  bool tail = false;
  for (std::size_t w = 0; w < words_per_position; ++w)
    if (auto out = lanes[w].flush()) {
      pooled[w] = *out;
      tail = true;
    }
  if (tail) write_position(pooled);
  return cost;
}

}  // namespace pscnn
