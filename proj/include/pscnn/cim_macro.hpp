#pragma once

// Functional model of the 1Mb SRAM compute-in-memory macro: 1024 wordlines x
// 1024 bitlines, 128 sense amplifiers behind a column mux.
//
// Currents are integer counts of conducting unit cells: an active wordline
// (input bit 1) over a cell storing 1 contributes exactly one unit.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pscnn/bits.hpp"

namespace pscnn {

inline constexpr std::size_t kWordlines = 1024;
inline constexpr std::size_t kBitlines = 1024;
inline constexpr std::size_t kSenseAmps = 128;
inline constexpr std::size_t kPairs = kBitlines / 2;

enum class MappingMode {
  Ternary,  // TWM: weight on a bitline pair, sensed differentially
  Binary,   // BWM: weight on one bitline, sensed against a reference
};

/// Ternary weight as stored by TWM on cells (2p, 2p+1).
enum class TernaryWeight : std::int8_t { Neg = -1, Zero = 0, Pos = 1 };

struct CellPair {
  bool pos = false;  // bitline 2p
  bool neg = false;  // bitline 2p+1
  friend bool operator==(const CellPair&, const CellPair&) = default;
};

CellPair encode_pair(TernaryWeight w);
/// Throws RangeError on the reserved (1,1) pattern.
TernaryWeight decode_pair(CellPair cells);

/// Sense-amplifier offset: input-referred Gaussian, in unit-cell currents,
/// drawn independently per amplifier per sense event.
struct VariationParams {
  double sigma_sa = 0.0;
  std::uint64_t seed = 0;
};

/// Offset of amplifier `sa` on sense event `event`; a pure function of its
/// arguments.
double sa_offset(const VariationParams& var, std::uint64_t event, std::size_t sa);

class CimArray {
 public:
  explicit CimArray(MappingMode mode = MappingMode::Ternary);

  MappingMode mode() const noexcept { return mode_; }
  /// Column groups the 128 amplifiers are multiplexed over: 4 (TWM) or 8 (BWM).
  std::size_t mux_groups() const noexcept;

  /// Overwrites rows [row_base, row_base + rows.size()). Under TWM every pair
  /// must avoid the reserved (1,1) pattern; nothing is written on error.
  void program_rows(std::size_t row_base, std::span<const Row1024> rows);
  Row1024 read_row(std::size_t row) const;
  bool cell(std::size_t row, std::size_t bitline) const { return columns_[bitline][row]; }

  /// One sense event over wordlines [wl_base, wl_base + wl_count) with the
  /// line buffer `x` driving them. Output bit s is amplifier s's decision on
  /// pair (TWM) or bitline (BWM) `col_group * 128 + s`:
  ///   TWM: 1 iff I_pos - I_neg + offset >= 0
  ///   BWM: 1 iff I_bl - popcount(x)/2 + offset >= 0
  Word128 mac_cycle(const Row1024& x, std::size_t wl_base, std::size_t wl_count,
                    std::size_t col_group, const VariationParams& var = {},
                    std::uint64_t sense_event = 0) const;

  /// |I_pos - I_neg| for pair `index` (TWM) or |I_bl - I_ref| for bitline
  /// `index` (BWM). BWM margins may be half-integers.
  double sensing_margin(const Row1024& x, std::size_t wl_base, std::size_t wl_count,
                        std::size_t index) const;

  /// Signed current difference seen by the amplifier, before offset.
  double current_difference(const Row1024& x, std::size_t wl_base, std::size_t wl_count,
                            std::size_t index) const;

 private:
  void check_window(std::size_t wl_base, std::size_t wl_count) const;

  MappingMode mode_;
  std::vector<Row1024> columns_;  // bitline-major
};

/// Weight image file: 1024 rows x 1024 bits, row-major, 8 bits per byte with
/// the lowest bitline in the most significant bit. Exactly 128 KiB.
inline constexpr std::size_t kWeightImageBytes = kWordlines * kBitlines / 8;

std::vector<std::uint8_t> weight_image_bytes(std::span<const Row1024> rows);
std::vector<Row1024> weight_image_rows(std::span<const std::uint8_t> bytes);
std::vector<Row1024> image_of(const CimArray& array);

// ---------------------------------------------------------------------------
// Sense-amplifier variation study

struct MonteCarloConfig {
  std::size_t active_rows = kWordlines;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ErrorRatePoint {
  double sigma = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t twm_errors = 0;
  std::uint64_t bwm_errors = 0;
  double twm_rate() const { return trials ? double(twm_errors) / double(trials) : 0.0; }
  double bwm_rate() const { return trials ? double(bwm_errors) / double(trials) : 0.0; }
};

/// Each trial draws random +/-1 weights for one neuron, a random input vector
/// and an amplifier offset, and counts a failure when the noisy decision
/// differs from binarize(sum x*w). TWM and BWM see identical weights, inputs
/// and standard-normal offset draws; only the sensed difference differs.
std::vector<ErrorRatePoint> monte_carlo_error_rate(const MonteCarloConfig& cfg,
                                                   std::span<const double> sigma_grid,
                                                   std::uint64_t trials, std::uint64_t seed);

}  // namespace pscnn
