#include "pscnn/cim_macro.hpp"

#include <algorithm>
#include <thread>

#include "pscnn/error.hpp"
#include "pscnn/random.hpp"

namespace pscnn {
namespace {

std::array<double, kSenseAmps> sa_offsets(const VariationParams& var, std::uint64_t event) {
  std::array<double, kSenseAmps> out{};
  if (var.sigma_sa == 0.0) return out;
  GaussianSource g(stream_seed(var.seed, event));
  for (auto& o : out) o = var.sigma_sa * g.next();
  return out;
}

}  // namespace

CellPair encode_pair(TernaryWeight w) {
  switch (w) {
    case TernaryWeight::Pos: return {true, false};
    case TernaryWeight::Neg: return {false, true};
    case TernaryWeight::Zero: return {false, false};
  }
  throw RangeError("invalid ternary weight");
}

TernaryWeight decode_pair(CellPair cells) {
  if (cells.pos && cells.neg) throw RangeError("cell pair (1,1) is reserved under TWM");
  if (cells.pos) return TernaryWeight::Pos;
  if (cells.neg) return TernaryWeight::Neg;
  return TernaryWeight::Zero;
}

double sa_offset(const VariationParams& var, std::uint64_t event, std::size_t sa) {
  if (sa >= kSenseAmps) throw RangeError("sense amplifier index " + std::to_string(sa));
  return sa_offsets(var, event)[sa];
}

CimArray::CimArray(MappingMode mode) : mode_(mode), columns_(kBitlines) {}

std::size_t CimArray::mux_groups() const noexcept {
  return mode_ == MappingMode::Ternary ? kPairs / kSenseAmps : kBitlines / kSenseAmps;
}

void CimArray::program_rows(std::size_t row_base, std::span<const Row1024> rows) {
  if (row_base >= kWordlines || rows.size() > kWordlines - row_base)
    throw RangeError("program_rows: rows [" + std::to_string(row_base) + ", " +
                     std::to_string(row_base + rows.size()) + ") exceed 1024 wordlines");
  if (mode_ == MappingMode::Ternary) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      for (std::size_t p = 0; p < kPairs; ++p)
        if (row[2 * p] && row[2 * p + 1])
          throw RangeError("program_rows: row " + std::to_string(row_base + r) + " pair " +
                           std::to_string(p) + " holds reserved pattern (1,1)");
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t b = 0; b < kBitlines; ++b) columns_[b][row_base + r] = rows[r][b];
}

Row1024 CimArray::read_row(std::size_t row) const {
  if (row >= kWordlines) throw RangeError("read_row: row " + std::to_string(row));
  Row1024 out;
  for (std::size_t b = 0; b < kBitlines; ++b) out[b] = columns_[b][row];
  return out;
}

void CimArray::check_window(std::size_t wl_base, std::size_t wl_count) const {
  if (wl_count == 0 || wl_base >= kWordlines || wl_count > kWordlines - wl_base)
    throw RangeError("wordline window [" + std::to_string(wl_base) + ", " +
                     std::to_string(wl_base + wl_count) + ") outside 0..1023");
}

double CimArray::current_difference(const Row1024& x, std::size_t wl_base, std::size_t wl_count,
                                    std::size_t index) const {
  check_window(wl_base, wl_count);
  const Row1024 active = x & bit_range_mask<kRowBits>(wl_base, wl_count);
  if (mode_ == MappingMode::Ternary) {
    if (index >= kPairs) throw RangeError("pair index " + std::to_string(index));
    auto i_pos = static_cast<double>((active & columns_[2 * index]).count());
    auto i_neg = static_cast<double>((active & columns_[2 * index + 1]).count());
    return i_pos - i_neg;
  }
  if (index >= kBitlines) throw RangeError("bitline index " + std::to_string(index));
  auto i_bl = static_cast<double>((active & columns_[index]).count());
  auto i_ref = static_cast<double>(active.count()) / 2.0;
  return i_bl - i_ref;
}

double CimArray::sensing_margin(const Row1024& x, std::size_t wl_base, std::size_t wl_count,
                                std::size_t index) const {
  return std::abs(current_difference(x, wl_base, wl_count, index));
}

Word128 CimArray::mac_cycle(const Row1024& x, std::size_t wl_base, std::size_t wl_count,
                            std::size_t col_group, const VariationParams& var,
                            std::uint64_t sense_event) const {
  check_window(wl_base, wl_count);
  if (col_group >= mux_groups())
    throw RangeError("column group " + std::to_string(col_group) + " outside 0.." +
                     std::to_string(mux_groups() - 1));
  const Row1024 active = x & bit_range_mask<kRowBits>(wl_base, wl_count);
  const auto offsets = sa_offsets(var, sense_event);
  Word128 out;
  if (mode_ == MappingMode::Ternary) {
    for (std::size_t s = 0; s < kSenseAmps; ++s) {
      std::size_t p = col_group * kSenseAmps + s;
      auto i_pos = static_cast<double>((active & columns_[2 * p]).count());
      auto i_neg = static_cast<double>((active & columns_[2 * p + 1]).count());
      out[s] = (i_pos - i_neg + offsets[s]) >= 0.0;
    }
  } else {
    const double i_ref = static_cast<double>(active.count()) / 2.0;
    for (std::size_t s = 0; s < kSenseAmps; ++s) {
      std::size_t b = col_group * kSenseAmps + s;
      auto i_bl = static_cast<double>((active & columns_[b]).count());
      out[s] = (i_bl - i_ref + offsets[s]) >= 0.0;
    }
  }
  return out;
}

std::vector<std::uint8_t> weight_image_bytes(std::span<const Row1024> rows) {
  if (rows.size() != kWordlines)
    throw RangeError("weight image needs 1024 rows, got " + std::to_string(rows.size()));
  std::vector<std::uint8_t> out(kWeightImageBytes, 0);
  for (std::size_t r = 0; r < kWordlines; ++r)
    for (std::size_t b = 0; b < kBitlines; ++b)
      if (rows[r][b]) out[r * 128 + b / 8] |= static_cast<std::uint8_t>(0x80u >> (b % 8));
  return out;
}

std::vector<Row1024> weight_image_rows(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kWeightImageBytes)
    throw FormatError("weight image must be exactly " + std::to_string(kWeightImageBytes) +
                      " bytes, got " + std::to_string(bytes.size()));
  std::vector<Row1024> rows(kWordlines);
  for (std::size_t r = 0; r < kWordlines; ++r)
    for (std::size_t b = 0; b < kBitlines; ++b)
      rows[r][b] = (bytes[r * 128 + b / 8] >> (7 - b % 8)) & 1u;
  return rows;
}

std::vector<Row1024> image_of(const CimArray& array) {
  std::vector<Row1024> rows(kWordlines);
  for (std::size_t r = 0; r < kWordlines; ++r) rows[r] = array.read_row(r);
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

struct BatchCounts {
  std::vector<std::uint64_t> twm, bwm;
};

// One batch = one sense event per mapping = up to 128 trials (one per amplifier).
void run_batch(std::uint64_t batch, std::size_t used_sas, std::size_t n, std::uint64_t seed,
               std::span<const double> sigma_grid, CimArray& twm, CimArray& bwm,
               BatchCounts& acc) {
  std::mt19937_64 gen(stream_seed(seed, 2 * batch));
  std::vector<Row1024> twm_rows(n), bwm_rows(n);
  Row1024 x;
  std::vector<int> ideal_diff(kSenseAmps, 0);
  for (std::size_t r = 0; r < n; ++r) {
    std::uint64_t wbits0 = gen(), wbits1 = gen();
    bool xr = gen() & 1u;
    x[r] = xr;
    for (std::size_t s = 0; s < kSenseAmps; ++s) {
      bool plus = ((s < 64 ? wbits0 >> s : wbits1 >> (s - 64)) & 1u) != 0;
      twm_rows[r][2 * s] = plus;
      twm_rows[r][2 * s + 1] = !plus;
      bwm_rows[r][s] = plus;
      if (xr) ideal_diff[s] += plus ? 1 : -1;
    }
  }
  twm.program_rows(0, twm_rows);
  bwm.program_rows(0, bwm_rows);
  const std::uint64_t noise_seed = stream_seed(seed, 2 * batch + 1);
  for (std::size_t k = 0; k < sigma_grid.size(); ++k) {
    VariationParams var{sigma_grid[k], noise_seed};
    Word128 t = twm.mac_cycle(x, 0, n, 0, var, batch);
    Word128 b = bwm.mac_cycle(x, 0, n, 0, var, batch);
    for (std::size_t s = 0; s < used_sas; ++s) {
      bool ideal = ideal_diff[s] >= 0;
      acc.twm[k] += t[s] != ideal;
      acc.bwm[k] += b[s] != ideal;
    }
  }
}

}  // namespace

std::vector<ErrorRatePoint> monte_carlo_error_rate(const MonteCarloConfig& cfg,
                                                   std::span<const double> sigma_grid,
                                                   std::uint64_t trials, std::uint64_t seed) {
  if (cfg.active_rows == 0 || cfg.active_rows > kWordlines)
    throw RangeError("active_rows must be in 1..1024");
  for (double s : sigma_grid)
    if (!(s >= 0.0)) throw RangeError("sigma must be non-negative");
  const std::uint64_t batches = (trials + kSenseAmps - 1) / kSenseAmps;
  unsigned nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  nthreads = static_cast<unsigned>(std::min<std::uint64_t>(nthreads, std::max<std::uint64_t>(batches, 1)));

  std::vector<BatchCounts> partial(nthreads);
  for (auto& p : partial) {
    p.twm.assign(sigma_grid.size(), 0);
    p.bwm.assign(sigma_grid.size(), 0);
  }
  auto worker = [&](unsigned tid) {
    CimArray twm(MappingMode::Ternary), bwm(MappingMode::Binary);
    for (std::uint64_t b = tid; b < batches; b += nthreads) {
      std::size_t used = static_cast<std::size_t>(
          std::min<std::uint64_t>(kSenseAmps, trials - b * kSenseAmps));
      run_batch(b, used, cfg.active_rows, seed, sigma_grid, twm, bwm, partial[tid]);
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker, t);
    worker(0);
  }

  std::vector<ErrorRatePoint> out(sigma_grid.size());
  for (std::size_t k = 0; k < sigma_grid.size(); ++k) {
    out[k].sigma = sigma_grid[k];
    out[k].trials = trials;
    for (const auto& p : partial) {
      out[k].twm_errors += p.twm[k];
      out[k].bwm_errors += p.bwm[k];
    }
  }
  return out;
}

}  // namespace pscnn
