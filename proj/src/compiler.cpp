#include "pscnn/compiler.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <map>

#include <json.hpp>

#include "pscnn/cim_macro.hpp"
#include "pscnn/error.hpp"

namespace pscnn {

using nlohmann::json;

std::vector<Word128> pack_features(const RefTensor& x) {
  auto wpp = words_per_position(x.channels);
  std::vector<Word128> words(std::size_t{x.len} * wpp);
  for (std::uint32_t t = 0; t < x.len; ++t)
    for (std::uint32_t c = 0; c < x.channels; ++c)
      if (x.at(t, c)) words[std::size_t{t} * wpp + c / 128].set(c % 128);
  return words;
}

RefTensor unpack_features(const std::vector<Word128>& words, std::uint32_t len, std::uint32_t channels) {
  auto wpp = words_per_position(channels);
  if (words.size() < std::size_t{len} * wpp)
    throw RangeError("unpack_features: " + std::to_string(words.size()) + " words for " +
                     std::to_string(len) + " positions of " + std::to_string(channels) + " channels");
  RefTensor x{len, channels, std::vector<std::uint8_t>(std::size_t{len} * channels)};
  for (std::uint32_t t = 0; t < len; ++t)
    for (std::uint32_t c = 0; c < channels; ++c)
      x.bits[std::size_t{t} * channels + c] = words[std::size_t{t} * wpp + c / 128][c % 128];
  return x;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool pow2_window(std::uint32_t w) { return w == 2 || w == 4 || w == 8; }

std::uint32_t max_abs(const std::vector<std::int32_t>& v) {
  std::uint32_t m = 0;
  for (auto b : v) m = std::max<std::uint32_t>(m, static_cast<std::uint32_t>(b < 0 ? -std::int64_t{b} : b));
  return m;
}

void check_map_size(std::size_t layer, const char* what, std::uint32_t len, std::uint32_t channels) {
  auto words = std::uint64_t{len} * words_per_position(channels);
  if (words > 2 * kWordsPerBank)
    throw ValidationError("layer " + std::to_string(layer) + ": " + what + " feature map needs " +
                          std::to_string(words) + " words, two banks hold 1024");
}

}  // namespace

CheckedModel validate(const ModelSpec& model) {
  if (model.layers.empty()) throw ValidationError("model has no layers");
  if (model.input_len == 0 || model.input_channels == 0)
    throw ValidationError("input_len and input_channels must be positive");
  if (std::uint64_t{model.input_len} * words_per_position(model.input_channels) > 2 * kWordsPerBank)
    throw ValidationError("input feature map exceeds 1024 words");
  kernel_shapes(model);  // chain consistency

  CheckedModel cm{model, {}};
  std::uint32_t len = model.input_len, ch = model.input_channels;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto where = "layer " + std::to_string(i) + ": ";
    LayerShape s;
    s.in_len = len;
    s.in_channels = ch;
    const auto& layer = model.layers[i];
    if (auto* p = std::get_if<Pool>(&layer)) {
      if (!pow2_window(p->window))
        throw ValidationError(where + "pool window " + std::to_string(p->window) + " not in {2,4,8}");
      if (len > 1024) throw ValidationError(where + "pool input of " + std::to_string(len) + " positions exceeds 1024");
      s.kind = LayerShape::Kind::Pool;
      s.pool_window = p->window;
      s.steps = len;
      s.out_len = (len + p->window - 1) / p->window;
      s.out_channels = ch;
    } else {
      std::uint32_t c_out, k, stride = 1, pool = 1;
      const std::vector<std::int32_t>* bias;
      if (auto* c = std::get_if<Conv1d>(&layer)) {
        c_out = c->c_out;
        k = c->k;
        stride = c->stride;
        if (c->fused_pool_window) pool = *c->fused_pool_window;
        bias = &c->bias;
        if (stride != 1 && stride != 2 && stride != 4 && stride != 8)
          throw ValidationError(where + "stride " + std::to_string(stride) + " not in {1,2,4,8}");
        if (pool != 1 && !pow2_window(pool))
          throw ValidationError(where + "fused pool window " + std::to_string(pool) + " not in {2,4,8}");
      } else {
        const auto& d = std::get<Dense>(layer);
        c_out = d.out_features;
        k = len;
        bias = &d.bias;
      }
      if (c_out == 0 || c_out > kPairs)
        throw ValidationError(where + "C_out " + std::to_string(c_out) + " outside 1..512");
      if (!bias->empty() && bias->size() != c_out)
        throw ValidationError(where + "bias has " + std::to_string(bias->size()) + " entries, C_out is " +
                              std::to_string(c_out));
      s.c_out = c_out;
      s.k = k;
      s.stride = stride;
      s.pool_window = pool;
      s.bias = *bias;
      s.bias_rows = max_abs(*bias);
      if (std::uint64_t{k} * ch + s.bias_rows > kWordlines)
        throw ValidationError(where + "K x C_in + bias rows = " +
                              std::to_string(std::uint64_t{k} * ch + s.bias_rows) + " exceeds 1024 wordlines");
      s.steps = (len - k) / stride + 1;
      if (s.steps > 1024)
        throw ValidationError(where + std::to_string(s.steps) + " output positions exceed 1024");
      s.out_len = (s.steps + pool - 1) / pool;
      s.out_channels = c_out;
    }
    check_map_size(i, "output", s.out_len, s.out_channels);
    len = s.out_len;
    ch = s.out_channels;
    cm.layers.push_back(std::move(s));
  }
  return cm;
}

// ---------------------------------------------------------------------------
// Weight packing

std::vector<Row1024> pack_layer_weights(const LayerShape& s, const LayerWeights& w) {
  if (s.kind != LayerShape::Kind::Conv) throw CompileError("pack_layer_weights: pooling layer has no weights");
  if (w.c_out != s.c_out || w.k != s.k || w.c_in != s.in_channels ||
      w.w.size() != std::size_t{s.c_out} * s.k * s.in_channels)
    throw CompileError("pack_layer_weights: weight tensor does not match layer shape");
  std::vector<Row1024> rows(s.rows());
  for (std::uint32_t q = 0; q < s.c_out; ++q) {
    for (std::uint32_t k = 0; k < s.k; ++k)
      for (std::uint32_t c = 0; c < s.in_channels; ++c)
        rows[std::size_t{k} * s.in_channels + c].set(2 * q + (w.at(q, k, c) > 0 ? 0 : 1));
    if (!s.bias.empty()) {
      auto b = s.bias[q];
      auto mag = static_cast<std::uint32_t>(b < 0 ? -std::int64_t{b} : b);
      for (std::uint32_t j = 0; j < mag; ++j)
        rows[std::size_t{s.k} * s.in_channels + j].set(2 * q + (b > 0 ? 0 : 1));
    }
  }
  return rows;
}

LayerWeights unpack_layer_weights(const LayerShape& s, const std::vector<Row1024>& rows,
                                  std::uint32_t pair_base) {
  if (rows.size() < std::size_t{s.k} * s.in_channels || pair_base + s.c_out > kPairs)
    throw RangeError("unpack_layer_weights: rows do not cover the layer");
  LayerWeights w{s.c_out, s.k, s.in_channels, {}};
  w.w.resize(std::size_t{s.c_out} * s.k * s.in_channels);
  for (std::uint32_t q = 0; q < s.c_out; ++q)
    for (std::uint32_t i = 0; i < s.k * s.in_channels; ++i) {
      auto p = pair_base + q;
      auto v = decode_pair({rows[i][2 * p], rows[i][2 * p + 1]});
      if (v == TernaryWeight::Zero)
        throw RangeError("unpack_layer_weights: zero weight at row " + std::to_string(i) + " pair " +
                         std::to_string(p));
      w.w[std::size_t{q} * s.k * s.in_channels + i] = static_cast<std::int8_t>(v);
    }
  return w;
}

// ---------------------------------------------------------------------------
// Side table

std::uint32_t LayerEntry::pwb_inputs() const {
  if (mode == isa::MacMode::PoolBypass) return in_len;
  return (in_len - k) / stride + 1;
}

std::uint32_t LayerEntry::col_groups() const {
  if (mode == isa::MacMode::PoolBypass) return 1;
  return (pair_base + c_out - 1) / 128 - pair_base / 128 + 1;
}

// ---------------------------------------------------------------------------
// Placement

namespace {

/// Bottom-left packing of rectangles (rows x pairs) into a fixed-height area.
class Skyline {
 public:
  Skyline(std::uint32_t rows, std::uint32_t cols) : rows_(rows), height_(cols, 0) {}

  /// Lowest base row, then leftmost column; nullopt when no column range fits.
  std::optional<std::pair<std::uint32_t, std::uint32_t>> place(std::uint32_t height, std::uint32_t width) {
    if (width == 0 || width > height_.size()) return std::nullopt;
    std::uint32_t best_row = std::numeric_limits<std::uint32_t>::max(), best_col = 0;
    for (std::size_t c = 0; c + width <= height_.size(); ++c) {
      auto base = *std::max_element(height_.begin() + static_cast<std::ptrdiff_t>(c),
                                    height_.begin() + static_cast<std::ptrdiff_t>(c + width));
      if (base < best_row) {
        best_row = base;
        best_col = static_cast<std::uint32_t>(c);
      }
    }
    if (best_row + std::uint64_t{height} > rows_) return std::nullopt;
    std::fill(height_.begin() + best_col, height_.begin() + best_col + width, best_row + height);
    return std::make_pair(best_row, best_col);
  }

  std::uint32_t top() const { return *std::max_element(height_.begin(), height_.end()); }

 private:
  std::uint32_t rows_;
  std::vector<std::uint32_t> height_;
};

constexpr std::uint32_t kWsramTag = 1024;

Region next_ofm(const Region& ifm, std::uint32_t words) {
  bool in_use[kFeatureBanks] = {};
  in_use[ifm.bank] = true;
  if (ifm.span) in_use[ifm.bank + 1] = true;
  if (words <= kWordsPerBank) {
    for (std::uint32_t b = 0; b < kFeatureBanks; ++b)
      if (!in_use[b]) return {b, 0, false};
  } else {
    // Two-bank maps start on an even bank so a single-bank IFM never blocks
    // both pairs.
    for (std::uint32_t b : {0u, 2u, 1u})
      if (!in_use[b] && !in_use[b + 1]) return {b, 0, true};
  }
  throw CompileError("no free banks for a " + std::to_string(words) + "-word feature map");
}

isa::Pointer pointer_of(const BankStep& s) {
  return {s.ifm.bank, s.ifm.word, s.ofm.bank, s.ofm.word, s.ifm.span, s.ofm.span};
}

}  // namespace

MappedModel map_model(const ModelSpec& model, const ModelWeights& weights, const CompileOptions& options) {
  auto cm = validate(model);
  if (weights.size() != model.layers.size())
    throw ValidationError("weights cover " + std::to_string(weights.size()) + " layers, model has " +
                          std::to_string(model.layers.size()));

  MappedModel mm;
  mm.model = model;
  mm.weights = weights;
  mm.options = options;
  mm.placements.resize(cm.layers.size());
  mm.macro_image.assign(kWordlines, Row1024{});
  mm.wsram_image.assign(kWeightSramRows, Row1024{});

  // Residence: macro first, then weight SRAM, in execution order.
  Skyline macro(kWordlines, kPairs), wsram(kWeightSramRows, kPairs);
  for (std::size_t i = 0; i < cm.layers.size(); ++i) {
    const auto& s = cm.layers[i];
    if (s.kind != LayerShape::Kind::Conv) continue;
    Placement pl;
    pl.wl_count = s.rows();
    pl.pair_count = s.c_out;
    auto rows = pack_layer_weights(s, weights[i]);
    if (auto at = macro.place(s.rows(), s.c_out)) {
      pl.wl_base = at->first;
      pl.pair_base = at->second;
      for (std::uint32_t r = 0; r < rows.size(); ++r) mm.macro_image[pl.wl_base + r] |= rows[r] << (2 * pl.pair_base);
      mm.macro_weights += s.weight_count();
    } else if (auto at2 = wsram.place(s.rows(), s.c_out)) {
      pl.in_wsram = true;
      pl.wsram_row = at2->first;
      pl.pair_base = at2->second;
      for (std::uint32_t r = 0; r < rows.size(); ++r) mm.wsram_image[pl.wsram_row + r] |= rows[r] << (2 * pl.pair_base);
      mm.wsram_weights += s.weight_count();
    } else {
      throw CompileError("layer " + std::to_string(i) + ": " + std::to_string(s.rows()) + " x " +
                         std::to_string(s.c_out) + " weight block fits neither the macro nor the weight SRAM");
    }
    mm.placements[i] = pl;
  }
  mm.wsram_rows = wsram.top();

  // Compile-time replay of macro row origins, mirrored by the controller.
  std::vector<std::uint32_t> tag(kWordlines);
  for (std::uint32_t r = 0; r < kWordlines; ++r) tag[r] = r;

  auto resident_at = [&](const Placement& pl) -> std::optional<std::uint32_t> {
    if (!pl.in_wsram) {
      for (std::uint32_t r = 0; r < pl.wl_count; ++r)
        if (tag[pl.wl_base + r] != pl.wl_base + r) return std::nullopt;
      return pl.wl_base;
    }
    for (std::uint32_t b = 0; b + pl.wl_count <= kWordlines; ++b) {
      if (tag[b] != kWsramTag + pl.wsram_row) continue;
      bool ok = true;
      for (std::uint32_t r = 1; r < pl.wl_count && ok; ++r) ok = tag[b + r] == kWsramTag + pl.wsram_row + r;
      if (ok) return b;
    }
    return std::nullopt;
  };

  // Choose rows for a replacement: never evict a layer still to run, prefer
  // rows whose occupants were last used longest ago, then the lowest base.
  auto choose_band = [&](std::size_t current, std::uint32_t count) {
    std::vector<std::int64_t> last_use(kWordlines, -1);
    std::vector<bool> forbidden(kWordlines, false);
    for (std::size_t j = 0; j < mm.placements.size(); ++j) {
      const auto& pl = mm.placements[j];
      if (!pl || j == current) continue;
      auto at = resident_at(*pl);
      if (!at) continue;
      for (std::uint32_t r = *at; r < *at + pl->wl_count; ++r) {
        if (j > current) forbidden[r] = true;
        else last_use[r] = std::max<std::int64_t>(last_use[r], static_cast<std::int64_t>(j));
      }
    }
    std::optional<std::uint32_t> best;
    std::int64_t best_score = 0;
    for (std::uint32_t b = 0; b + count <= kWordlines; ++b) {
      std::int64_t score = -1;
      bool ok = true;
      for (std::uint32_t r = b; r < b + count && ok; ++r) {
        ok = !forbidden[r];
        score = std::max(score, last_use[r]);
      }
      if (ok && (!best || score < best_score)) {
        best = b;
        best_score = score;
      }
    }
    if (!best)
      throw CompileError("layer " + std::to_string(current) + ": no " + std::to_string(count) +
                         " macro rows free of layers still to run");
    return *best;
  };

  std::vector<isa::Instruction> prog;
  Region ifm{0, 0, std::uint64_t{model.input_len} * words_per_position(model.input_channels) > kWordsPerBank};
  mm.input_region = ifm;

  auto emit_mac = [&](LayerEntry e, const BankStep& banks) {
    isa::Mac mac;
    mac.mode = e.mode;
    mac.n_out = e.pwb_inputs();
    mac.wl_count = e.mode == isa::MacMode::PoolBypass ? 1 : e.wl_count();
    mac.col_groups = e.col_groups();
    mac.pool_window = e.pool_window;
    mac.stride = e.mode == isa::MacMode::PoolBypass ? 1 : e.stride;
    prog.emplace_back(mac);
    mm.layer_table.push_back(e);
    mm.bank_plan.push_back(banks);
  };

  for (std::size_t i = 0; i < cm.layers.size(); ++i) {
    const auto& s = cm.layers[i];
    auto out_words = s.out_len * words_per_position(s.out_channels);

    if (s.kind == LayerShape::Kind::Pool) {
      BankStep banks{ifm, next_ofm(ifm, out_words)};
      prog.emplace_back(pointer_of(banks));
      LayerEntry e;
      e.model_layer = static_cast<std::uint32_t>(i);
      e.mode = isa::MacMode::PoolBypass;
      e.in_len = s.in_len;
      e.c_in = e.c_out = s.in_channels;
      e.pool_window = s.pool_window;
      emit_mac(e, banks);
      ifm = banks.ofm;
      continue;
    }

    const auto& pl = *mm.placements[i];
    bool split = s.pool_window > 1 && !options.fuse_pooling;
    auto conv_words = split ? s.steps * words_per_position(s.out_channels) : out_words;
    if (conv_words > 2 * kWordsPerBank)
      throw CompileError("layer " + std::to_string(i) + ": unpooled map of " + std::to_string(conv_words) +
                         " words exceeds 1024");
    BankStep banks{ifm, next_ofm(ifm, conv_words)};
    prog.emplace_back(pointer_of(banks));

    std::uint32_t wl_base = pl.wl_base;
    std::uint32_t source = pl.wl_base;
    if (pl.in_wsram) {
      source = kWsramTag + pl.wsram_row;
      if (auto at = resident_at(pl)) {
        wl_base = *at;
      } else {
        wl_base = choose_band(i, pl.wl_count);
        prog.emplace_back(isa::WeightReplace{wl_base, pl.wl_count, pl.wsram_row});
        for (std::uint32_t r = 0; r < pl.wl_count; ++r) tag[wl_base + r] = kWsramTag + pl.wsram_row + r;
        ++mm.weight_replacements;
      }
    }

    LayerEntry e;
    e.model_layer = static_cast<std::uint32_t>(i);
    e.mode = s.pool_window == 1 || split ? isa::MacMode::ConvOnly : isa::MacMode::ConvFusedPool;
    e.in_len = s.in_len;
    e.c_in = s.in_channels;
    e.c_out = s.c_out;
    e.k = s.k;
    e.stride = s.stride;
    e.bias_rows = s.bias_rows;
    e.pool_window = e.mode == isa::MacMode::ConvOnly ? 1 : s.pool_window;
    e.wl_base = wl_base;
    e.pair_base = pl.pair_base;
    e.source_tag = source;
    emit_mac(e, banks);
    ifm = banks.ofm;

    if (split) {
      BankStep pool_banks{ifm, next_ofm(ifm, out_words)};
      prog.emplace_back(pointer_of(pool_banks));
      LayerEntry p;
      p.model_layer = static_cast<std::uint32_t>(i);
      p.mode = isa::MacMode::PoolBypass;
      p.in_len = s.steps;
      p.c_in = p.c_out = s.out_channels;
      p.pool_window = s.pool_window;
      emit_mac(p, pool_banks);
      ifm = pool_banks.ofm;
    }
  }
  prog.emplace_back(isa::Halt{});

  for (const auto& ins : prog) mm.program.push_back(isa::encode(ins));
  return mm;
}

// ---------------------------------------------------------------------------
// Container

namespace {

constexpr char kMagic[8] = {'P', 'S', 'C', 'N', 'N', 'P', 'K', 'G'};
constexpr std::uint32_t kContainerVersion = 1;

json region_json(const Region& r) { return {{"bank", r.bank}, {"word", r.word}, {"span", r.span}}; }
Region region_of(const json& j) {
  return {j.at("bank").get<std::uint32_t>(), j.at("word").get<std::uint32_t>(), j.at("span").get<bool>()};
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[at + i]} << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> save_container(const MappedModel& mm) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> blobs;
  auto text = format_model(mm.model);
  blobs.emplace_back("model.txt", std::vector<std::uint8_t>(text.begin(), text.end()));
  blobs.emplace_back("weights.bin", encode_weights(mm.model, mm.weights));
  blobs.emplace_back("program.bin", isa::to_binary(mm.program));
  blobs.emplace_back("macro.img", weight_image_bytes(mm.macro_image));
  {
    std::vector<bool> bits;
    bits.reserve(kWeightSramRows * kRowBits);
    for (const auto& row : mm.wsram_image)
      for (std::size_t b = 0; b < kRowBits; ++b) bits.push_back(row[b]);
    blobs.emplace_back("wsram.img", pack_msb_first(bits));
  }

  json manifest;
  manifest["format"] = "pscnn-container";
  manifest["version"] = kContainerVersion;
  std::size_t offset = 0;
  for (const auto& [name, data] : blobs) {
    manifest["entries"].push_back({{"name", name}, {"offset", offset}, {"size", data.size()}});
    offset += data.size();
  }
  manifest["fuse_pooling"] = mm.options.fuse_pooling;
  manifest["input_region"] = region_json(mm.input_region);
  for (std::size_t i = 0; i < mm.layer_table.size(); ++i) {
    const auto& e = mm.layer_table[i];
    manifest["layer_table"].push_back({{"model_layer", e.model_layer},
                                        {"mode", isa::mode_name(e.mode)},
                                        {"in_len", e.in_len},
                                        {"c_in", e.c_in},
                                        {"c_out", e.c_out},
                                        {"k", e.k},
                                        {"stride", e.stride},
                                        {"bias_rows", e.bias_rows},
                                        {"pool_window", e.pool_window},
                                        {"wl_base", e.wl_base},
                                        {"pair_base", e.pair_base},
                                        {"source_tag", e.source_tag}});
    manifest["bank_plan"].push_back({{"ifm", region_json(mm.bank_plan[i].ifm)},
                                      {"ofm", region_json(mm.bank_plan[i].ofm)}});
  }
  for (const auto& pl : mm.placements) {
    if (!pl) {
      manifest["placements"].push_back(nullptr);
      continue;
    }
    manifest["placements"].push_back({{"wl_base", pl->wl_base},
                                       {"wl_count", pl->wl_count},
                                       {"pair_base", pl->pair_base},
                                       {"pair_count", pl->pair_count},
                                       {"resident", pl->in_wsram ? "wsram" : "macro"},
                                       {"wsram_row", pl->wsram_row}});
  }
  manifest["partition"] = {{"macro_weights", mm.macro_weights},
                           {"wsram_weights", mm.wsram_weights},
                           {"wsram_rows", mm.wsram_rows},
                           {"weight_replacements", mm.weight_replacements}};

  auto mtext = manifest.dump(1);
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(mtext.size()));
  out.insert(out.end(), mtext.begin(), mtext.end());
  for (const auto& blob : blobs) out.insert(out.end(), blob.second.begin(), blob.second.end());
  return out;
}

MappedModel load_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw FormatError("not a compiled container (bad magic)");
  if (auto v = get_u32(bytes, 8); v != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(v));
  auto mlen = get_u32(bytes, 12);
  if (16 + std::size_t{mlen} > bytes.size()) throw FormatError("container manifest truncated");
  std::size_t blob_base = 16 + mlen;

  MappedModel mm;
  try {
    auto manifest = json::parse(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(blob_base));
    std::map<std::string, std::vector<std::uint8_t>> blobs;
    for (const auto& e : manifest.at("entries")) {
      auto off = blob_base + e.at("offset").get<std::size_t>();
      auto size = e.at("size").get<std::size_t>();
      if (off + size > bytes.size()) throw FormatError("container blob '" + e.at("name").get<std::string>() + "' truncated");
      blobs[e.at("name").get<std::string>()] =
          std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(off + size));
    }
    auto blob = [&](const std::string& name) -> const std::vector<std::uint8_t>& {
      auto it = blobs.find(name);
      if (it == blobs.end()) throw FormatError("container has no '" + name + "'");
      return it->second;
    };
    const auto& text = blob("model.txt");
    mm.model = parse_model(std::string(text.begin(), text.end()));
    mm.weights = decode_weights(mm.model, blob("weights.bin"));
    mm.program = isa::from_binary(blob("program.bin"));
    mm.macro_image = weight_image_rows(blob("macro.img"));
    {
      const auto& w = blob("wsram.img");
      if (w.size() != kWeightSramRows * kRowBits / 8) throw FormatError("weight SRAM image must be 64 KiB");
      auto bits = unpack_msb_first(w, kWeightSramRows * kRowBits);
      mm.wsram_image.assign(kWeightSramRows, Row1024{});
      for (std::size_t r = 0; r < kWeightSramRows; ++r)
        for (std::size_t b = 0; b < kRowBits; ++b) mm.wsram_image[r][b] = bits[r * kRowBits + b];
    }
    mm.options.fuse_pooling = manifest.at("fuse_pooling").get<bool>();
    mm.input_region = region_of(manifest.at("input_region"));
    for (const auto& j : manifest.value("layer_table", json::array())) {
      LayerEntry e;
      e.model_layer = j.at("model_layer");
      auto mode = j.at("mode").get<std::string>();
      if (mode == "conv") e.mode = isa::MacMode::ConvOnly;
      else if (mode == "fused") e.mode = isa::MacMode::ConvFusedPool;
      else if (mode == "bypass") e.mode = isa::MacMode::PoolBypass;
      else throw FormatError("layer table: unknown mode '" + mode + "'");
      e.in_len = j.at("in_len");
      e.c_in = j.at("c_in");
      e.c_out = j.at("c_out");
      e.k = j.at("k");
      e.stride = j.at("stride");
      e.bias_rows = j.at("bias_rows");
      e.pool_window = j.at("pool_window");
      e.wl_base = j.at("wl_base");
      e.pair_base = j.at("pair_base");
      e.source_tag = j.at("source_tag");
      mm.layer_table.push_back(e);
    }
    for (const auto& j : manifest.value("bank_plan", json::array()))
      mm.bank_plan.push_back({region_of(j.at("ifm")), region_of(j.at("ofm"))});
    for (const auto& j : manifest.value("placements", json::array())) {
      if (j.is_null()) {
        mm.placements.emplace_back();
        continue;
      }
      Placement pl;
      pl.wl_base = j.at("wl_base");
      pl.wl_count = j.at("wl_count");
      pl.pair_base = j.at("pair_base");
      pl.pair_count = j.at("pair_count");
      pl.in_wsram = j.at("resident").get<std::string>() == "wsram";
      pl.wsram_row = j.at("wsram_row");
      mm.placements.push_back(pl);
    }
    const auto& part = manifest.at("partition");
    mm.macro_weights = part.at("macro_weights");
    mm.wsram_weights = part.at("wsram_weights");
    mm.wsram_rows = part.at("wsram_rows");
    mm.weight_replacements = part.at("weight_replacements");
  } catch (const json::exception& e) {
    throw FormatError(std::string("container manifest: ") + e.what());
  }
  if (mm.layer_table.size() != mm.bank_plan.size())
    throw FormatError("container: layer table and bank plan lengths differ");
  return mm;
}

void write_container(const std::filesystem::path& path, const MappedModel& mm) {
  write_file(path, save_container(mm));
}

MappedModel read_container(const std::filesystem::path& path) { return load_container(read_file(path)); }

}  // namespace pscnn
