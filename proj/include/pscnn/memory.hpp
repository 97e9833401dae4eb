#pragma once

// Flexible ping-pong feature SRAM (four single-port 64Kb banks), the 512Kb
// weight SRAM and the 1024-bit line buffer.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pscnn/bits.hpp"
#include "pscnn/isa.hpp"

namespace pscnn {

inline constexpr std::size_t kFeatureBanks = 4;
inline constexpr std::size_t kWordsPerBank = 512;  // 512 x 128 bits = 64Kb
inline constexpr std::size_t kWeightSramRows = 512;

enum class BankPower { On, Off };

/// A contiguous feature-map region: starts at (bank, word) and may continue
/// into bank+1 when `span` is set.
struct Region {
  std::uint32_t bank = 0;
  std::uint32_t word = 0;
  bool span = false;

  std::size_t capacity() const { return (span ? 2 * kWordsPerBank : kWordsPerBank) - word; }
  friend bool operator==(const Region&, const Region&) = default;
};

struct BankAddress {
  std::uint32_t bank;
  std::uint32_t word;
};

/// Linear word offset within a region to a physical address; throws
/// RangeError past the region's end.
BankAddress resolve(const Region& region, std::size_t offset);

struct BankCounters {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t active_cycles = 0;
  std::uint64_t gated_cycles = 0;
};

class FeatureSram {
 public:
  FeatureSram();

  /// Sets the IFM/OFM cursors and powers exactly the banks they reference.
  /// Banks switched off lose their contents. Throws SimulationError when the
  /// two regions share a bank.
  void apply_pointer(const isa::Pointer& p, std::uint64_t cycle);

  const Region& ifm() const noexcept { return ifm_; }
  const Region& ofm() const noexcept { return ofm_; }

  /// Single-port access: one read or write per bank per cycle, issued in
  /// time order. Errors carry the cycle number.
  Word128 read(std::uint32_t bank, std::uint32_t word, std::uint64_t cycle);
  void write(std::uint32_t bank, std::uint32_t word, const Word128& data, std::uint64_t cycle);

  Word128 read_ifm(std::size_t offset, std::uint64_t cycle);
  void write_ofm(std::size_t offset, const Word128& data, std::uint64_t cycle);

  /// Charges `cycles` elapsed cycles to every bank's active or gated counter.
  void account(std::uint64_t cycles);

  BankPower power(std::uint32_t bank) const { return power_.at(bank); }
  const BankCounters& counters(std::uint32_t bank) const { return counters_.at(bank); }

  /// Direct access for loading inputs and inspecting results; bypasses port
  /// and power accounting.
  Word128 peek(std::uint32_t bank, std::uint32_t word) const;
  void poke(std::uint32_t bank, std::uint32_t word, const Word128& data);

  /// One 128-bit word per line as 32 hex digits.
  std::string dump_bank(std::uint32_t bank) const;

 private:
  void check_access(std::uint32_t bank, std::uint32_t word, std::uint64_t cycle, const char* op);

  std::array<std::vector<Word128>, kFeatureBanks> banks_;
  std::array<BankPower, kFeatureBanks> power_;
  std::array<BankCounters, kFeatureBanks> counters_;
  std::array<std::int64_t, kFeatureBanks> last_access_;
  Region ifm_, ofm_;
};

class WeightSram {
 public:
  WeightSram();

  void store(std::size_t row, std::span<const Row1024> rows);
  /// Rows [row, row+count) in order; one row per controller cycle.
  std::vector<Row1024> fetch(std::size_t row, std::size_t count);

  std::uint64_t reads() const noexcept { return reads_; }
  const std::vector<Row1024>& rows() const noexcept { return rows_; }

 private:
  std::vector<Row1024> rows_;
  std::uint64_t reads_ = 0;
};

/// Register driving the macro wordlines: bit j drives wordline j.
class LineBuffer {
 public:
  const Row1024& bits() const noexcept { return bits_; }
  void clear() { bits_.reset(); }
  void set(std::size_t index, bool v) { bits_[index] = v; }

  /// Within the window [base, base+len): bit j <- bit j+amount, the top
  /// `amount` bits of the window cleared. Bits outside the window are kept.
  void shift_window(std::size_t base, std::size_t len, std::size_t amount);

 private:
  Row1024 bits_;
};

}  // namespace pscnn
