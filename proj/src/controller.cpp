#include "pscnn/controller.hpp"

#include <algorithm>
#include <cstdio>

#include "pscnn/error.hpp"
#include "pscnn/pwb.hpp"

namespace pscnn {

namespace {

template <class F>
std::uint64_t sum_banks(const SimStats& s, F f) {
  std::uint64_t t = 0;
  for (const auto& b : s.banks) t += f(b);
  return t;
}

constexpr std::uint32_t kWsramTag = 1024;

}  // namespace

std::uint64_t SimStats::feature_reads() const { return sum_banks(*this, [](auto& b) { return b.reads; }); }
std::uint64_t SimStats::feature_writes() const { return sum_banks(*this, [](auto& b) { return b.writes; }); }
std::uint64_t SimStats::active_bank_cycles() const {
  return sum_banks(*this, [](auto& b) { return b.active_cycles; });
}
std::uint64_t SimStats::gated_bank_cycles() const {
  return sum_banks(*this, [](auto& b) { return b.gated_cycles; });
}

bool operator==(const SimStats& a, const SimStats& b) {
  for (std::size_t i = 0; i < kFeatureBanks; ++i) {
    const auto &x = a.banks[i], &y = b.banks[i];
    if (x.reads != y.reads || x.writes != y.writes || x.active_cycles != y.active_cycles ||
        x.gated_cycles != y.gated_cycles)
      return false;
  }
  return a.cycles == b.cycles && a.macs == b.macs && a.sense_events == b.sense_events &&
         a.wrep_rows == b.wrep_rows && a.instructions == b.instructions &&
         a.mac_instructions == b.mac_instructions && a.residence_checks == b.residence_checks;
}

Simulator::Simulator(std::vector<Row1024> macro_image, std::vector<Row1024> wsram_image,
                     std::vector<LayerEntry> layer_table, VariationParams var)
    : table_(std::move(layer_table)), var_(var), row_tag_(kWordlines) {
  if (macro_image.size() != kWordlines) throw RangeError("macro image must have 1024 rows");
  if (wsram_image.size() != kWeightSramRows) throw RangeError("weight SRAM image must have 512 rows");
  macro_.program_rows(0, macro_image);
  wsram_.store(0, wsram_image);
  for (std::uint32_t r = 0; r < kWordlines; ++r) row_tag_[r] = r;
}

void Simulator::load_features(const Region& region, const std::vector<Word128>& words) {
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto a = resolve(region, i);
    mem_.poke(a.bank, a.word, words[i]);
  }
}

void Simulator::check_entry(const isa::Mac& mac, const LayerEntry& e, std::uint64_t cycle) const {
  auto fail = [&](const std::string& what) {
    throw SimulationError(cycle, "MAC disagrees with its layer table entry: " + what);
  };
  if (mac.mode != e.mode) fail("mode");
  if (e.pool_window == 0 || e.in_len == 0 || e.c_in == 0) fail("empty geometry");
  if (mac.pool_window != e.pool_window) fail("pool_window");
  if (e.mode == isa::MacMode::PoolBypass) {
    if (mac.n_out != e.in_len) fail("n_out");
    return;
  }
  if (e.k == 0 || e.k > e.in_len || e.stride == 0) fail("kernel does not fit the input length");
  if (e.c_out == 0 || e.pair_base + std::uint64_t{e.c_out} > kPairs) fail("pair range");
  if (e.wl_base + std::uint64_t{e.wl_count()} > kWordlines) fail("wordline range");
  if (mac.n_out != e.pwb_inputs()) fail("n_out");
  if (mac.wl_count != e.wl_count()) fail("wl_count");
  if (mac.col_groups != e.col_groups()) fail("col_groups");
  if (mac.stride != e.stride) fail("stride");
}

void Simulator::check_residence(const LayerEntry& e, std::uint64_t cycle) {
  ++stats_.residence_checks;
  for (std::uint32_t r = 0; r < e.wl_count(); ++r)
    if (row_tag_[e.wl_base + r] != e.source_tag + r)
      throw SimulationError(cycle, "residence violation: macro row " + std::to_string(e.wl_base + r) +
                                       " does not hold the weights of layer " +
                                       std::to_string(e.model_layer));
}

std::uint64_t Simulator::exec_conv(const isa::Mac& mac, const LayerEntry& e, std::uint64_t start) {
  const std::uint32_t wpp_in = words_per_position(e.c_in);
  const std::uint32_t wpp_out = words_per_position(e.c_out);
  const std::uint32_t window = e.k * e.c_in;
  const std::uint32_t groups = e.col_groups();
  const std::uint32_t first_group = e.pair_base / 128;
  const std::uint32_t fresh = std::min(e.stride, e.k);

  // Kernel slot `slot` of the line buffer <- IFM position `pos`.
  auto load = [&](std::uint32_t slot, std::uint32_t pos, std::uint64_t& cycle) {
    for (std::uint32_t w = 0; w < wpp_in; ++w) {
      auto word = mem_.read_ifm(std::size_t{pos} * wpp_in + w, cycle++);
      for (std::uint32_t c = w * 128; c < std::min(e.c_in, (w + 1) * 128); ++c)
        lb_.set(e.wl_base + slot * e.c_in + c, word[c % 128]);
    }
  };

  lb_.clear();
  for (std::uint32_t j = 0; j < e.bias_rows; ++j) lb_.set(e.wl_base + window + j, true);
  std::uint64_t cycle = start;
  for (std::uint32_t k = 0; k < e.k; ++k) load(k, k, cycle);  // fill bubble

  std::vector<PoolState> lanes(wpp_out, PoolState(e.pool_window));
  std::vector<Word128> sensed(groups), out(wpp_out), emitted(wpp_out);
  std::uint64_t s = cycle, end = cycle;
  std::uint32_t out_pos = 0;
  for (std::uint32_t t = 0; t < mac.n_out; ++t) {
    for (std::uint32_t g = 0; g < groups; ++g)
      sensed[g] = macro_.mac_cycle(lb_.bits(), e.wl_base, window + e.bias_rows, first_group + g, var_,
                                   stats_.sense_events++);

    // Output aligner: pair pair_base+q becomes channel q.
    for (auto& w : out) w.reset();
    for (std::uint32_t q = 0; q < e.c_out; ++q) {
      auto rel = e.pair_base + q - first_group * 128;
      if (sensed[rel / 128][rel % 128]) out[q / 128].set(q % 128);
    }
    bool emit = false, last = t + 1 == mac.n_out;
    for (std::uint32_t w = 0; w < wpp_out; ++w) {
      auto v = lanes[w].step(out[w]);
      if (!v && last) v = lanes[w].flush();
      if (v) {
        emitted[w] = *v;
        emit = true;
      }
    }

    std::uint64_t reads = 0;
    if (!last) {
      lb_.shift_window(e.wl_base, window, std::size_t{e.stride} * e.c_in);
      std::uint64_t rc = s;
      auto base = (t + 1) * e.stride;
      for (std::uint32_t k = e.k - fresh; k < e.k; ++k) load(k, base + k, rc);
      reads = rc - s;
    }
    if (emit) {
      for (std::uint32_t w = 0; w < wpp_out; ++w)
        mem_.write_ofm(std::size_t{out_pos} * wpp_out + w, emitted[w], s + groups + w);
      ++out_pos;
      end = std::max(end, s + groups + wpp_out);
    } else {
      end = std::max(end, s + groups);
    }
    s += std::max<std::uint64_t>(groups, reads);
  }
  stats_.macs += std::uint64_t{mac.n_out} * e.c_out * e.k * e.c_in;
  return end - start;
}

std::uint64_t Simulator::exec_bypass(const LayerEntry& e, std::uint64_t start) {
  return bypass_pool(mem_, e.in_len, words_per_position(e.c_in), e.pool_window, start).cycles();
}

SimResult Simulator::run(std::span<const std::uint32_t> program) {
  SimResult result;
  std::uint64_t cycle = 0;
  std::size_t mac_index = 0;
  for (std::size_t pc = 0;; ++pc) {
    if (pc >= program.size())
      throw SimulationError(cycle, "pc " + std::to_string(pc) + " ran past the end of the program without HALT");
    isa::Instruction ins;
    try {
      ins = isa::decode(program[pc]);
    } catch (const DecodeError& err) {
      throw SimulationError(cycle, "pc " + std::to_string(pc) + ": " + err.what());
    }
    ++stats_.instructions;
    if (std::holds_alternative<isa::Halt>(ins)) break;

    if (auto* p = std::get_if<isa::Pointer>(&ins)) {
      mem_.account(1);
      ++cycle;
      mem_.apply_pointer(*p, cycle);
    } else if (auto* w = std::get_if<isa::WeightReplace>(&ins)) {
      std::vector<Row1024> rows;
      try {
        rows = wsram_.fetch(w->wsram_row, w->row_count);
        macro_.program_rows(w->cim_row_base, rows);
      } catch (const RangeError& err) {
        throw SimulationError(cycle, std::string("WREP: ") + err.what());
      }
      for (std::uint32_t r = 0; r < w->row_count; ++r) row_tag_[w->cim_row_base + r] = kWsramTag + w->wsram_row + r;
      stats_.wrep_rows += w->row_count;
      mem_.account(w->row_count);
      cycle += w->row_count;
    } else {
      const auto& mac = std::get<isa::Mac>(ins);
      if (mac_index >= table_.size())
        throw SimulationError(cycle, "MAC at pc " + std::to_string(pc) + " has no layer table entry");
      const auto& e = table_[mac_index++];
      check_entry(mac, e, cycle);
      std::uint64_t d;
      if (e.mode == isa::MacMode::PoolBypass) {
        d = exec_bypass(e, cycle);
      } else {
        check_residence(e, cycle);
        d = exec_conv(mac, e, cycle);
      }
      ++stats_.mac_instructions;
      mem_.account(d);
      cycle += d;

      MacOutput out{e.model_layer, e.mode, e.out_len(), e.out_channels(), {}};
      auto n = std::size_t{out.len} * words_per_position(out.channels);
      out.words.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto a = resolve(mem_.ofm(), i);
        out.words.push_back(mem_.peek(a.bank, a.word));
      }
      result.outputs.push_back(std::move(out));
    }
  }
  stats_.cycles = cycle;
  for (std::size_t b = 0; b < kFeatureBanks; ++b) stats_.banks[b] = mem_.counters(static_cast<std::uint32_t>(b));
  result.stats = stats_;
  return result;
}

SimResult simulate(const MappedModel& mm, const InputBits& input, const VariationParams& var) {
  Simulator sim(mm.macro_image, mm.wsram_image, mm.layer_table, var);
  sim.load_features(mm.input_region, pack_features(input_tensor(mm.model, input)));
  return sim.run(mm.program);
}

std::optional<Mismatch> first_mismatch(const SimResult& sim, const std::vector<RefTensor>& ref) {
  std::vector<const MacOutput*> final(ref.size(), nullptr);
  for (const auto& o : sim.outputs)
    if (o.model_layer < final.size()) final[o.model_layer] = &o;
  for (std::uint32_t l = 0; l < ref.size(); ++l) {
    const auto* o = final[l];
    if (!o || o->len != ref[l].len || o->channels != ref[l].channels) return Mismatch{l, 0, 0, true};
    auto got = unpack_features(o->words, o->len, o->channels);
    for (std::uint32_t t = 0; t < got.len; ++t)
      for (std::uint32_t c = 0; c < got.channels; ++c)
        if (got.at(t, c) != ref[l].at(t, c)) return Mismatch{l, t, c, false};
  }
  return std::nullopt;
}

double throughput_gops(double macs, double seconds, double ops_per_mac) {
  if (!(seconds > 0)) throw RangeError("throughput over a zero-length interval");
  return macs * ops_per_mac / seconds / 1e9;
}

double compute_throughput(const SimStats& stats, double freq_hz, double ops_per_mac) {
  if (stats.cycles == 0) throw RangeError("throughput of a zero-cycle run");
  if (!(freq_hz > 0)) throw RangeError("clock frequency must be positive");
  return throughput_gops(static_cast<double>(stats.macs), static_cast<double>(stats.cycles) / freq_hz,
                         ops_per_mac);
}

CostTable parse_cost_table(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("cost table: ") + e.what());
  }
  auto get = [&](const char* key) {
    if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("cost table: missing '") + key + "'");
    if (!j[key].is_number()) throw FormatError(std::string("cost table: '") + key + "' is not a number");
    auto v = j[key].get<double>();
    if (v < 0) throw FormatError(std::string("cost table: '") + key + "' is negative");
    return v;
  };
  CostTable c;
  c.sense_event_pj = get("sense_event_pj");
  c.feature_read_pj = get("feature_read_pj");
  c.feature_write_pj = get("feature_write_pj");
  c.wrep_row_pj = get("wrep_row_pj");
  c.bank_active_cycle_pj = get("bank_active_cycle_pj");
  c.bank_gated_cycle_pj = get("bank_gated_cycle_pj");
  return c;
}

double model_energy(const SimStats& s, const CostTable& c) {
  double pj = double(s.sense_events) * c.sense_event_pj + double(s.feature_reads()) * c.feature_read_pj +
              double(s.feature_writes()) * c.feature_write_pj + double(s.wrep_rows) * c.wrep_row_pj +
              double(s.active_bank_cycles()) * c.bank_active_cycle_pj +
              double(s.gated_bank_cycles()) * c.bank_gated_cycle_pj;
  return pj * 1e-6;
}

nlohmann::json stats_json(const SimStats& s, double freq_hz, const std::optional<CostTable>& costs) {
  nlohmann::json j;
  j["cycles"] = s.cycles;
  j["macs"] = s.macs;
  j["sense_events"] = s.sense_events;
  j["wrep_rows"] = s.wrep_rows;
  j["instructions"] = s.instructions;
  j["mac_instructions"] = s.mac_instructions;
  j["residence_checks"] = s.residence_checks;
  j["feature_reads"] = s.feature_reads();
  j["feature_writes"] = s.feature_writes();
  j["active_bank_cycles"] = s.active_bank_cycles();
  j["gated_bank_cycles"] = s.gated_bank_cycles();
  for (std::size_t b = 0; b < kFeatureBanks; ++b)
    j["banks"].push_back({{"reads", s.banks[b].reads},
                          {"writes", s.banks[b].writes},
                          {"active_cycles", s.banks[b].active_cycles},
                          {"gated_cycles", s.banks[b].gated_cycles}});
  j["freq_hz"] = freq_hz;
  j["latency_us"] = static_cast<double>(s.cycles) / freq_hz * 1e6;
  if (s.cycles > 0) {
    j["gops"] = compute_throughput(s, freq_hz);
    j["gops_2ops_per_mac"] = compute_throughput(s, freq_hz, 2.0);
  } else {
    j["gops"] = nullptr;
    j["gops_2ops_per_mac"] = nullptr;
  }
  if (costs) {
    j["energy_uj"] = model_energy(s, *costs);
    j["energy_note"] = "modeled, relative";
  }
  return j;
}

}  // namespace pscnn
