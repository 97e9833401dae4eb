#pragma once

// Fetch-decode-execute engine. Timing: one cycle per 128-bit feature access,
// per sense of one 128-pair group, per WREP row and per Pointer. A
// convolution runs as a two-stage pipeline: the line buffer for step t+1 is
// refilled from the IFM bank while step t senses, and step t's words are
// written to the OFM bank right after its last sense.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pscnn/cim_macro.hpp"
#include "pscnn/compiler.hpp"
#include "pscnn/memory.hpp"

namespace pscnn {

struct SimStats {
  std::uint64_t cycles = 0;
  std::uint64_t macs = 0;
  std::uint64_t sense_events = 0;
  std::uint64_t wrep_rows = 0;
  std::uint64_t instructions = 0;
  std::uint64_t mac_instructions = 0;
  std::uint64_t residence_checks = 0;
  std::array<BankCounters, kFeatureBanks> banks{};

  std::uint64_t feature_reads() const;
  std::uint64_t feature_writes() const;
  std::uint64_t active_bank_cycles() const;
  std::uint64_t gated_bank_cycles() const;
  friend bool operator==(const SimStats& a, const SimStats& b);
};

/// OFM of one Mac instruction, read back after it completes.
struct MacOutput {
  std::uint32_t model_layer = 0;
  isa::MacMode mode = isa::MacMode::ConvOnly;
  std::uint32_t len = 0, channels = 0;
  std::vector<Word128> words;
};

struct SimResult {
  SimStats stats;
  std::vector<MacOutput> outputs;
};

class Simulator {
 public:
  Simulator(std::vector<Row1024> macro_image, std::vector<Row1024> wsram_image,
            std::vector<LayerEntry> layer_table, VariationParams var = {});

  /// Writes words at the start of `region` without timing or counters.
  void load_features(const Region& region, const std::vector<Word128>& words);

  /// Runs until HALT. Every error is a SimulationError carrying the cycle.
  SimResult run(std::span<const std::uint32_t> program);

  const FeatureSram& memory() const noexcept { return mem_; }
  const CimArray& macro() const noexcept { return macro_; }

 private:
  std::uint64_t exec_conv(const isa::Mac& mac, const LayerEntry& e, std::uint64_t start);
  std::uint64_t exec_bypass(const LayerEntry& e, std::uint64_t start);
  void check_entry(const isa::Mac& mac, const LayerEntry& e, std::uint64_t cycle) const;
  void check_residence(const LayerEntry& e, std::uint64_t cycle);

  CimArray macro_{MappingMode::Ternary};
  FeatureSram mem_;
  WeightSram wsram_;
  LineBuffer lb_;
  std::vector<LayerEntry> table_;
  VariationParams var_;
  std::vector<std::uint32_t> row_tag_;
  SimStats stats_;
};

/// Loads the input at the compiled input region and runs the program.
SimResult simulate(const MappedModel& mm, const InputBits& input, const VariationParams& var = {});

struct Mismatch {
  std::uint32_t layer = 0, position = 0, channel = 0;
  bool shape = false;  // dimensions differ; position/channel unused
};

/// First divergence between each model layer's final simulated OFM and the
/// oracle's output.
std::optional<Mismatch> first_mismatch(const SimResult& sim, const std::vector<RefTensor>& ref);

/// macs / seconds / 1e9, times ops_per_mac (1, or 2 to count multiply and add).
double throughput_gops(double macs, double seconds, double ops_per_mac = 1.0);
/// Throws RangeError when the run took zero cycles.
double compute_throughput(const SimStats& stats, double freq_hz, double ops_per_mac = 1.0);

/// Per-event energies in picojoules. Relative modeling only.
struct CostTable {
  double sense_event_pj = 0;
  double feature_read_pj = 0;
  double feature_write_pj = 0;
  double wrep_row_pj = 0;
  double bank_active_cycle_pj = 0;
  double bank_gated_cycle_pj = 0;
};

/// Every key must be present; throws FormatError naming the missing one.
CostTable parse_cost_table(const std::string& json_text);
/// Dot product of counters and costs, in microjoules.
double model_energy(const SimStats& stats, const CostTable& costs);

nlohmann::json stats_json(const SimStats& stats, double freq_hz, const std::optional<CostTable>& costs);

}  // namespace pscnn
