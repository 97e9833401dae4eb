#pragma once

// Pooling-write block: max pooling on the macro output stream. On {1,0}
// activations the running maximum is a bitwise OR.

#include <cstddef>
#include <cstdint>
#include <optional>

#include "pscnn/bits.hpp"

namespace pscnn {

class FeatureSram;

class PoolState {
 public:
  /// window is 1, 2, 4 or 8; 1 passes every input straight through.
  explicit PoolState(std::uint32_t window = 1);

  /// Emits the pooled word once every `window` inputs.
  std::optional<Word128> step(const Word128& v);
  /// Emits a partially filled window (ragged tail), if any.
  std::optional<Word128> flush();

  std::uint32_t window() const noexcept { return window_; }
  std::uint32_t fill() const noexcept { return fill_; }

 private:
  std::uint32_t window_;
  std::uint32_t fill_ = 0;
  Word128 acc_;
};

struct BypassCost {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t cycles() const { return reads + writes; }
};

/// Standalone pooling through the macro-bypass path: reads `n_positions`
/// positions of `words_per_position` words from the IFM cursor, writes
/// ceil(n_positions / window) pooled positions to the OFM cursor. Reads and
/// writes are serialized, one per cycle, starting at `start_cycle`.
BypassCost bypass_pool(FeatureSram& mem, std::size_t n_positions, std::size_t words_per_position,
                       std::uint32_t window, std::uint64_t start_cycle);

}  // namespace pscnn
