#include "pscnn/memory.hpp"

#include <sstream>

#include "pscnn/error.hpp"

namespace pscnn {

BankAddress resolve(const Region& region, std::size_t offset) {
  std::size_t linear = region.word + offset;
  std::size_t bank = region.bank + linear / kWordsPerBank;
  if (offset >= region.capacity() || bank >= kFeatureBanks)
    throw RangeError("offset " + std::to_string(offset) + " beyond region at bank " +
                     std::to_string(region.bank) + " word " + std::to_string(region.word) +
                     (region.span ? " (spanning)" : ""));
  return {static_cast<std::uint32_t>(bank), static_cast<std::uint32_t>(linear % kWordsPerBank)};
}

FeatureSram::FeatureSram() {
  for (auto& b : banks_) b.assign(kWordsPerBank, Word128{});
  power_.fill(BankPower::On);
  last_access_.fill(-1);
}

namespace {

std::array<bool, kFeatureBanks> banks_of(const Region& r) {
  std::array<bool, kFeatureBanks> used{};
  used[r.bank] = true;
  if (r.span) used[r.bank + 1] = true;
  return used;
}

}  // namespace

void FeatureSram::apply_pointer(const isa::Pointer& p, std::uint64_t cycle) {
  try {
    isa::check(p);
  } catch (const EncodingError& e) {
    throw SimulationError(cycle, std::string("bad pointer: ") + e.what());
  }
  Region ifm{p.ifm_bank, p.ifm_word, p.ifm_span};
  Region ofm{p.ofm_bank, p.ofm_word, p.ofm_span};
  auto in = banks_of(ifm), out = banks_of(ofm);
  for (std::size_t b = 0; b < kFeatureBanks; ++b)
    if (in[b] && out[b])
      throw SimulationError(cycle, "IFM and OFM share single-port bank " + std::to_string(b));
  ifm_ = ifm;
  ofm_ = ofm;
  for (std::size_t b = 0; b < kFeatureBanks; ++b) {
    BankPower next = (in[b] || out[b]) ? BankPower::On : BankPower::Off;
    if (next == BankPower::Off && power_[b] == BankPower::On) banks_[b].assign(kWordsPerBank, Word128{});
    power_[b] = next;
  }
}

void FeatureSram::check_access(std::uint32_t bank, std::uint32_t word, std::uint64_t cycle,
                               const char* op) {
  if (bank >= kFeatureBanks || word >= kWordsPerBank)
    throw SimulationError(cycle, std::string(op) + " of bank " + std::to_string(bank) + " word " +
                                     std::to_string(word) + " out of range");
  if (power_[bank] == BankPower::Off)
    throw SimulationError(cycle, std::string(op) + " of powered-off bank " + std::to_string(bank));
  if (static_cast<std::int64_t>(cycle) <= last_access_[bank])
    throw SimulationError(cycle, std::string(op) + " port conflict on single-port bank " +
                                     std::to_string(bank));
  last_access_[bank] = static_cast<std::int64_t>(cycle);
}

Word128 FeatureSram::read(std::uint32_t bank, std::uint32_t word, std::uint64_t cycle) {
  check_access(bank, word, cycle, "read");
  ++counters_[bank].reads;
  return banks_[bank][word];
}

void FeatureSram::write(std::uint32_t bank, std::uint32_t word, const Word128& data,
                        std::uint64_t cycle) {
  check_access(bank, word, cycle, "write");
  ++counters_[bank].writes;
  banks_[bank][word] = data;
}

Word128 FeatureSram::read_ifm(std::size_t offset, std::uint64_t cycle) {
  BankAddress a;
  try {
    a = resolve(ifm_, offset);
  } catch (const RangeError& e) {
    throw SimulationError(cycle, std::string("IFM read: ") + e.what());
  }
  return read(a.bank, a.word, cycle);
}

void FeatureSram::write_ofm(std::size_t offset, const Word128& data, std::uint64_t cycle) {
  BankAddress a;
  try {
    a = resolve(ofm_, offset);
  } catch (const RangeError& e) {
    throw SimulationError(cycle, std::string("OFM write: ") + e.what());
  }
  write(a.bank, a.word, data, cycle);
}

void FeatureSram::account(std::uint64_t cycles) {
  for (std::size_t b = 0; b < kFeatureBanks; ++b)
    (power_[b] == BankPower::On ? counters_[b].active_cycles : counters_[b].gated_cycles) += cycles;
}

Word128 FeatureSram::peek(std::uint32_t bank, std::uint32_t word) const {
  if (bank >= kFeatureBanks || word >= kWordsPerBank) throw RangeError("peek out of range");
  return banks_[bank][word];
}

void FeatureSram::poke(std::uint32_t bank, std::uint32_t word, const Word128& data) {
  if (bank >= kFeatureBanks || word >= kWordsPerBank) throw RangeError("poke out of range");
  banks_[bank][word] = data;
}

std::string FeatureSram::dump_bank(std::uint32_t bank) const {
  if (bank >= kFeatureBanks) throw RangeError("dump_bank: bank " + std::to_string(bank));
  std::ostringstream os;
  for (const auto& w : banks_[bank]) os << to_hex(w) << '\n';
  return os.str();
}

WeightSram::WeightSram() : rows_(kWeightSramRows) {}

void WeightSram::store(std::size_t row, std::span<const Row1024> rows) {
  if (row > kWeightSramRows || rows.size() > kWeightSramRows - row)
    throw RangeError("weight SRAM store [" + std::to_string(row) + ", " +
                     std::to_string(row + rows.size()) + ") exceeds 512 rows");
  std::copy(rows.begin(), rows.end(), rows_.begin() + static_cast<std::ptrdiff_t>(row));
}

std::vector<Row1024> WeightSram::fetch(std::size_t row, std::size_t count) {
  if (row > kWeightSramRows || count > kWeightSramRows - row)
    throw RangeError("weight SRAM fetch [" + std::to_string(row) + ", " +
                     std::to_string(row + count) + ") exceeds 512 rows");
  reads_ += count;
  return {rows_.begin() + static_cast<std::ptrdiff_t>(row),
          rows_.begin() + static_cast<std::ptrdiff_t>(row + count)};
}

void LineBuffer::shift_window(std::size_t base, std::size_t len, std::size_t amount) {
  if (base + len > kRowBits) throw RangeError("line buffer window exceeds 1024 bits");
  for (std::size_t j = 0; j < len; ++j) {
    std::size_t src = j + amount;
    bits_[base + j] = src < len ? bits_[base + src] : false;
  }
}

}  // namespace pscnn
