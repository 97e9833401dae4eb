// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pscnn/cim_macro.hpp"
#include "pscnn/compiler.hpp"
#include "pscnn/controller.hpp"
#include "pscnn/error.hpp"
#include "pscnn/isa.hpp"
#include "pscnn/model.hpp"
#include "pscnn/oracle.hpp"
#include "test_support.hpp"

using namespace pscnn;

namespace {

constexpr double kFreqHz = 10e6;
// Relative bound that guarantees agreement to 6 significant digits.
constexpr double kSixDigits = 5e-7;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Shared across criteria: every simulated run feeds the throughput identity
// (4) and the safety tally (8).
struct RunLog {
  std::uint64_t runs = 0;
  std::uint64_t simulation_errors = 0;
  std::uint64_t residence_checks = 0;
  std::uint64_t identity_failures = 0;
  double worst_identity_error = 0;
  std::string first_error;

  std::optional<SimResult> simulate(const MappedModel& mm, const InputBits& input) {
    ++runs;
    try {
      auto r = pscnn::simulate(mm, input);
      residence_checks += r.stats.residence_checks;
      if (r.stats.cycles > 0) {
        double gops = compute_throughput(r.stats, kFreqHz);
        double back = gops * 1e9 * (double(r.stats.cycles) / kFreqHz);
        double err = std::abs(back - double(r.stats.macs)) / double(r.stats.macs);
        worst_identity_error = std::max(worst_identity_error, err);
        if (!(err <= kSixDigits)) ++identity_failures;
      }
      return r;
    } catch (const SimulationError& e) {
      ++simulation_errors;
      if (first_error.empty()) first_error = e.what();
      return std::nullopt;
    }
  }
};

RunLog g_log;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

MappedModel reconstruction(const CompileOptions& opts = {}) {
  auto model = load_model(std::string(PSCNN_MODELS) + "/kws_reconstruction.model");
  return map_model(model, random_weights(model, 1), opts);
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240101);
  std::uint64_t mismatches = 0, rejected = 0, layers = 0;
  std::string first;
  for (int m = 0; m < 200; ++m) {
    auto rc = pscnn::testing::compilable_random_case(rng);
    rejected += rc.attempts - 1;
    const auto& mm = rc.mapped;
    for (int i = 0; i < 5; ++i) {
      auto input = random_input(mm.model, rng());
      auto sim = g_log.simulate(mm, input);
      auto ref = ref_infer(mm.model, mm.weights, input);
      layers += ref.size();
      auto bad = sim ? first_mismatch(*sim, ref) : std::optional<Mismatch>(Mismatch{0, 0, 0, true});
      if (bad) {
        if (mismatches++ == 0) first = fmt("model %d input %d layer %u", m, i, bad->layer);
      }
    }
  }
  double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && secs < 300;
  o.detail = fmt("200 models x 5 inputs, %llu layer outputs compared, %llu mismatches, %llu unmappable draws "
                 "redrawn, %.1f s (limit 300 s)",
                 (unsigned long long)layers, (unsigned long long)mismatches, (unsigned long long)rejected, secs);
  if (!first.empty()) o.detail += "; first: " + first;
  return o;
}

// Programs one weight pattern per column and checks every input pattern
// against every column.
Outcome margin_doubling() {
  auto t0 = std::chrono::steady_clock::now();
  CimArray twm(MappingMode::Ternary), bwm(MappingMode::Binary);
  std::uint64_t checked = 0, failures = 0;

  auto check = [&](const Row1024& x, std::size_t n, std::size_t col) {
    double t = twm.sensing_margin(x, 0, n, col);
    double b = bwm.sensing_margin(x, 0, n, col);
    ++checked;
    if (t != 2 * b) ++failures;
  };

  for (std::size_t n = 1; n <= 12; ++n) {
    const std::size_t patterns = std::size_t{1} << n;
    for (std::size_t chunk = 0; chunk < patterns; chunk += kPairs) {
      const std::size_t cols = std::min(kPairs, patterns - chunk);
      std::vector<Row1024> trows(n), brows(n);
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < n; ++r) {
          bool plus = ((chunk + c) >> r) & 1;
          trows[r].set(2 * c + (plus ? 0 : 1));
          if (plus) brows[r].set(c);
        }
      twm.program_rows(0, trows);
      bwm.program_rows(0, brows);
      for (std::size_t xp = 0; xp < patterns; ++xp) {
        Row1024 x;
        for (std::size_t r = 0; r < n; ++r) x[r] = (xp >> r) & 1;
        for (std::size_t c = 0; c < cols; ++c) check(x, n, c);
      }
    }
  }
  const std::uint64_t exhaustive = checked;

  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.5);
  for (int batch = 0; batch < 20; ++batch) {
    std::vector<Row1024> trows(kWordlines), brows(kWordlines);
    for (std::size_t r = 0; r < kWordlines; ++r)
      for (std::size_t c = 0; c < kPairs; ++c) {
        bool plus = coin(rng);
        trows[r].set(2 * c + (plus ? 0 : 1));
        if (plus) brows[r].set(c);
      }
    twm.program_rows(0, trows);
    bwm.program_rows(0, brows);
    for (int s = 0; s < 500; ++s) {
      Row1024 x;
      for (std::size_t r = 0; r < kWordlines; ++r) x[r] = coin(rng);
      check(x, kWordlines, rng() % kPairs);
    }
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = fmt("%llu exhaustive (x, w) pairs for n = 1..12 plus %llu random at n = 1024, %llu failures, %.1f s",
                 (unsigned long long)exhaustive, (unsigned long long)(checked - exhaustive),
                 (unsigned long long)failures, seconds_since(t0));
  return o;
}

// Single-position convolutions whose every output channel sums to exactly
// zero, bias included.
Outcome tie_cases() {
  std::mt19937_64 rng(99);
  std::uint64_t sim_wrong = 0, ref_wrong = 0, outputs = 0, errors_before = g_log.simulation_errors;
  for (int i = 0; i < 1000; ++i) {
    std::uint32_t c_in = 1 + rng() % 128, k = 1 + rng() % 8, c_out = 1 + rng() % 64;
    const std::size_t n = std::size_t{k} * c_in;
    InputBits x(n);
    for (auto& b : x) b = rng() & 1;
    if (i % 50 == 0) std::fill(x.begin(), x.end(), 0);  // nothing active
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < n; ++j)
      if (x[j]) active.push_back(j);
    if (active.size() % 2) {
      std::size_t j = rng() % n;
      x[j] ^= 1;
      active.clear();
      for (std::size_t jj = 0; jj < n; ++jj)
        if (x[jj]) active.push_back(jj);
    }
    const auto m = static_cast<std::int32_t>(active.size());
    const bool with_bias = i % 2 == 1;

    Conv1d conv{c_in, c_out, k, 1, std::nullopt, {}};
    LayerWeights w{c_out, k, c_in, std::vector<std::int8_t>(std::size_t{c_out} * n)};
    for (std::uint32_t q = 0; q < c_out; ++q) {
      std::int32_t b = 0;
      if (with_bias && m >= 2) b = std::int32_t(rng() % 3) * 2 - 2;  // -2, 0 or 2
      if (with_bias) conv.bias.push_back(b);
      // positives - negatives over the active inputs must equal -b
      std::int32_t plus = (m - b) / 2;
      std::shuffle(active.begin(), active.end(), rng);
      auto* row = &w.w[std::size_t{q} * n];
      for (std::size_t j = 0; j < n; ++j) row[j] = (rng() & 1) ? 1 : -1;
      for (std::int32_t a = 0; a < m; ++a) row[active[a]] = a < plus ? 1 : -1;
    }
    ModelSpec model{k, c_in, {conv}};
    auto mm = map_model(model, {w});
    auto ref = ref_infer(model, mm.weights, x);
    auto sim = g_log.simulate(mm, x);
    outputs += c_out;
    for (std::uint32_t q = 0; q < c_out; ++q)
      if (ref[0].at(0, q) != 1) ++ref_wrong;
    if (!sim) {
      sim_wrong += c_out;
      continue;
    }
    auto got = unpack_features(sim->outputs.back().words, 1, c_out);
    for (std::uint32_t q = 0; q < c_out; ++q)
      if (got.at(0, q) != 1) ++sim_wrong;
  }
  Outcome o;
  o.pass = sim_wrong == 0 && ref_wrong == 0 && g_log.simulation_errors == errors_before;
  o.detail = fmt("1000 cases, %llu tied outputs; simulator outputs not 1: %llu, reference outputs not 1: %llu",
                 (unsigned long long)outputs, (unsigned long long)sim_wrong, (unsigned long long)ref_wrong);
  return o;
}

Outcome throughput_identity() {
  // Reference row: 350e6 MACs per inference at 2320 us latency, 150.8 GOPS.
  const double row = throughput_gops(350e6, 2320e-6);
  const bool row_ok = std::abs(row - 150.8) <= 0.05;
  const bool identity_ok = g_log.identity_failures == 0 && g_log.runs > 0;
  Outcome o;
  o.pass = identity_ok && row_ok;
  o.detail = fmt("identity %s on %llu runs (worst relative error %.2e, bound %.0e); "
                 "reference row 350e6 MACs / 2320 us = %.4f GOPS vs 150.8 +/- 0.05: %s",
                 identity_ok ? "held" : "broken", (unsigned long long)g_log.runs, g_log.worst_identity_error,
                 kSixDigits, row, row_ok ? "ok" : "outside tolerance");
  return o;
}

Outcome capacity_partition() {
  auto mm = reconstruction();
  std::uint64_t wrep = 0;
  for (auto word : mm.program)
    if (std::holds_alternative<isa::WeightReplace>(isa::decode(word))) ++wrep;
  const std::uint64_t total = mm.macro_weights + mm.wsram_weights;
  Outcome o;
  o.pass = mm.macro_weights == 524288 && mm.wsram_weights == 143360 && mm.wsram_rows == 280 && wrep >= 1;
  o.detail = fmt("%llu weights: %llu macro-resident (want 524288), %llu in weight SRAM (want 143360) over %u rows "
                 "(want 280), %llu WREP",
                 (unsigned long long)total, (unsigned long long)mm.macro_weights,
                 (unsigned long long)mm.wsram_weights, mm.wsram_rows, (unsigned long long)wrep);
  return o;
}

Outcome fused_saving() {
  auto fused = reconstruction();
  auto unfused = reconstruction({false});
  auto input = random_input(fused.model, 2);
  auto ref = ref_infer(fused.model, fused.weights, input);
  auto a = g_log.simulate(fused, input);
  auto b = g_log.simulate(unfused, input);
  Outcome o;
  if (!a || !b) {
    o.pass = false;
    o.detail = "simulation error";
    return o;
  }
  const bool exact = !first_mismatch(*a, ref) && !first_mismatch(*b, ref);
  const double reduction = 100.0 * (1.0 - double(a->stats.cycles) / double(b->stats.cycles));
  const bool calibrated = std::abs(reduction - 35.9) <= 10.0;
  o.pass = a->stats.cycles < b->stats.cycles && exact;
  o.detail = fmt("fused %llu cycles < unfused %llu cycles; reduction %.1f%% vs reference 35.9%% +/- 10 pp (%s); "
                 "both bit-exact: %s",
                 (unsigned long long)a->stats.cycles, (unsigned long long)b->stats.cycles, reduction,
                 calibrated ? "within" : "outside", exact ? "yes" : "no");
  return o;
}

Outcome variation_ordering() {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> grid{0, 0.5, 1, 2, 4};
  const std::uint64_t trials = 10000;
  auto points = monte_carlo_error_rate({kWordlines, 0}, grid, trials, 2024);
  bool ok = points.size() == grid.size();
  std::ostringstream rates;
  for (const auto& p : points) {
    const double t = p.twm_rate(), b = p.bwm_rate();
    const double bound = 3 * std::sqrt((t * (1 - t) + b * (1 - b)) / double(trials));
    if (p.sigma == 0 && (p.twm_errors != 0 || p.bwm_errors != 0)) ok = false;
    if (t > b + bound) ok = false;
    rates << fmt(" sigma %.1f: twm %.4f bwm %.4f;", p.sigma, t, b);
  }
  double secs = seconds_since(t0);
  Outcome o;
  o.pass = ok && secs < 60;
  o.detail = fmt("10^4 trials per sigma, %.1f s (limit 60 s);", secs) + rates.str();
  return o;
}

Outcome safety() {
  Outcome o;
  o.pass = g_log.simulation_errors == 0 && g_log.residence_checks > 0;
  o.detail = fmt("%llu simulated runs, %llu residence checks, %llu power/port/residence violations",
                 (unsigned long long)g_log.runs, (unsigned long long)g_log.residence_checks,
                 (unsigned long long)g_log.simulation_errors);
  if (!g_log.first_error.empty()) o.detail += "; first: " + g_log.first_error;
  return o;
}

Outcome bit_compatibility() {
  const std::string dir = PSCNN_FIXTURES;
  auto assembled = isa::to_binary(isa::assemble(read_text(dir + "/golden.asm")).words);
  auto committed = read_file(dir + "/golden.bin");
  const bool golden = assembled == committed && committed.size() >= 20 * 4;

  std::mt19937_64 rng(4242);
  std::uint64_t valid = 0, drawn = 0, broken = 0;
  while (valid < 100000) {
    ++drawn;
    auto word = static_cast<std::uint32_t>(rng());
    isa::Instruction instr;
    try {
      instr = isa::decode(word);
    } catch (const DecodeError&) {
      continue;
    }
    ++valid;
    if (isa::encode(instr) != word) ++broken;
    else if (isa::assemble(isa::disassemble(instr)).words.front() != word) ++broken;
  }
  Outcome o;
  o.pass = golden && broken == 0;
  o.detail = fmt("golden fixture %zu words %s; %llu decodable words out of %llu drawn, %llu failed "
                 "encode/decode/asm round-trip",
                 committed.size() / 4, golden ? "byte-identical" : "DIFFERS", (unsigned long long)valid,
                 (unsigned long long)drawn, (unsigned long long)broken);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  // 4 and 8 summarize runs made by the others, so they go last.
  const std::vector<Criterion> order{
      {1, "oracle equivalence", oracle_equivalence}, {2, "margin doubling", margin_doubling},
      {3, "tie boundary", tie_cases},                {5, "capacity partition", capacity_partition},
      {6, "fused pooling saving", fused_saving},     {7, "variation ordering", variation_ordering},
      {9, "bit compatibility", bit_compatibility},   {4, "throughput identity", throughput_identity},
      {8, "safety", safety},
  };
  std::vector<std::string> lines(10);
  bool all = true;
  for (const auto& c : order) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    lines[c.id] = fmt("criterion %d %s: %s: ", c.id, c.name, o.pass ? "PASS" : "FAIL") + o.detail;
  }
  for (int i = 1; i <= 9; ++i) std::printf("%s\n", lines[i].c_str());
  std::printf("%s\n", all ? "all criteria passed" : "some criteria failed");
  return all ? 0 : 1;
}
