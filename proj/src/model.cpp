#include "pscnn/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "pscnn/bits.hpp"
#include "pscnn/error.hpp"
#include "pscnn/random.hpp"

namespace pscnn {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::int64_t parse_int(const std::string& text, std::size_t line, const std::string& key) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw FormatError("model line " + std::to_string(line) + ": '" + key +
                      "' expects an integer, got '" + text + "'");
  return v;
}

struct Section {
  std::string kind;
  std::size_t line = 0;
  std::map<std::string, std::pair<std::string, std::size_t>> fields;  // value, line
};

class FieldReader {
 public:
  explicit FieldReader(Section& s) : s_(s) {}

  bool has(const std::string& key) const { return s_.fields.count(key) != 0; }

  std::uint32_t u32(const std::string& key) {
    auto it = s_.fields.find(key);
    if (it == s_.fields.end())
      throw FormatError("model line " + std::to_string(s_.line) + ": [" + s_.kind +
                        "] missing '" + key + "'");
    used_.push_back(key);
    auto v = parse_int(it->second.first, it->second.second, key);
    if (v < 0 || v > 0xFFFFFFFFll)
      throw FormatError("model line " + std::to_string(it->second.second) + ": '" + key +
                        "' out of range");
    return static_cast<std::uint32_t>(v);
  }

  std::uint32_t u32_or(const std::string& key, std::uint32_t fallback) {
    return has(key) ? u32(key) : fallback;
  }

  std::vector<std::int32_t> ints(const std::string& key) {
    std::vector<std::int32_t> out;
    auto it = s_.fields.find(key);
    if (it == s_.fields.end()) return out;
    used_.push_back(key);
    std::stringstream ss(it->second.first);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto v = parse_int(trim(item), it->second.second, key);
      out.push_back(static_cast<std::int32_t>(v));
    }
    return out;
  }

  void finish() const {
    for (const auto& [k, v] : s_.fields)
      if (std::find(used_.begin(), used_.end(), k) == used_.end())
        throw FormatError("model line " + std::to_string(v.second) + ": unknown key '" + k +
                          "' in [" + s_.kind + "]");
  }

 private:
  Section& s_;
  std::vector<std::string> used_;
};

}  // namespace

ModelSpec parse_model(std::string_view text) {
  std::vector<Section> sections;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError("model line " + std::to_string(lineno) + ": unterminated section");
      sections.push_back({trim(line.substr(1, line.size() - 2)), lineno, {}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("model line " + std::to_string(lineno) + ": expected key = value");
    if (sections.empty())
      throw FormatError("model line " + std::to_string(lineno) + ": field outside a section");
    auto key = trim(line.substr(0, eq));
    if (!sections.back().fields.emplace(key, std::make_pair(trim(line.substr(eq + 1)), lineno)).second)
      throw FormatError("model line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  if (sections.empty() || sections.front().kind != "model")
    throw FormatError("model file must start with a [model] section");

  ModelSpec m;
  {
    FieldReader r(sections.front());
    m.input_len = r.u32("input_len");
    m.input_channels = r.u32("input_channels");
    r.finish();
  }
  for (std::size_t i = 1; i < sections.size(); ++i) {
    auto& s = sections[i];
    FieldReader r(s);
    if (s.kind == "conv1d") {
      Conv1d c;
      c.c_in = r.u32("c_in");
      c.c_out = r.u32("c_out");
      c.k = r.u32("k");
      c.stride = r.u32_or("stride", 1);
      if (r.has("fused_pool_window")) c.fused_pool_window = r.u32("fused_pool_window");
      c.bias = r.ints("bias");
      m.layers.emplace_back(std::move(c));
    } else if (s.kind == "pool") {
      m.layers.emplace_back(Pool{r.u32("window")});
    } else if (s.kind == "dense") {
      Dense d;
      d.in_features = r.u32("in_features");
      d.out_features = r.u32("out_features");
      d.bias = r.ints("bias");
      m.layers.emplace_back(std::move(d));
    } else {
      throw FormatError("model line " + std::to_string(s.line) + ": unknown section [" + s.kind + "]");
    }
    r.finish();
  }
  return m;
}

namespace {

void write_bias(std::ostream& os, const std::vector<std::int32_t>& bias) {
  if (bias.empty()) return;
  os << "bias = ";
  for (std::size_t i = 0; i < bias.size(); ++i) os << (i ? ", " : "") << bias[i];
  os << '\n';
}

}  // namespace

std::string format_model(const ModelSpec& m) {
  std::ostringstream os;
  os << "[model]\ninput_len = " << m.input_len << "\ninput_channels = " << m.input_channels << '\n';
  for (const auto& layer : m.layers) {
    os << '\n';
    if (auto* c = std::get_if<Conv1d>(&layer)) {
      os << "[conv1d]\nc_in = " << c->c_in << "\nc_out = " << c->c_out << "\nk = " << c->k
         << "\nstride = " << c->stride << '\n';
      if (c->fused_pool_window) os << "fused_pool_window = " << *c->fused_pool_window << '\n';
      write_bias(os, c->bias);
    } else if (auto* p = std::get_if<Pool>(&layer)) {
      os << "[pool]\nwindow = " << p->window << '\n';
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      os << "[dense]\nin_features = " << d->in_features << "\nout_features = " << d->out_features
         << '\n';
      write_bias(os, d->bias);
    }
  }
  return os.str();
}

ModelSpec load_model(const std::filesystem::path& path) { return parse_model(read_text(path)); }

std::vector<std::optional<KernelShape>> kernel_shapes(const ModelSpec& m) {
  std::vector<std::optional<KernelShape>> out;
  std::uint32_t len = m.input_len, ch = m.input_channels;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& layer = m.layers[i];
    auto where = "layer " + std::to_string(i) + ": ";
    if (auto* c = std::get_if<Conv1d>(&layer)) {
      if (c->c_in != ch)
        throw ValidationError(where + "c_in " + std::to_string(c->c_in) + " does not match " +
                              std::to_string(ch) + " incoming channels");
      if (c->k == 0 || c->stride == 0 || c->k > len)
        throw ValidationError(where + "kernel " + std::to_string(c->k) + " does not fit length " +
                              std::to_string(len));
      out.push_back(KernelShape{c->c_out, c->k, c->c_in});
      len = (len - c->k) / c->stride + 1;
      if (c->fused_pool_window && *c->fused_pool_window > 0)
        len = (len + *c->fused_pool_window - 1) / *c->fused_pool_window;
      ch = c->c_out;
    } else if (auto* p = std::get_if<Pool>(&layer)) {
      if (p->window == 0) throw ValidationError(where + "pool window 0");
      out.push_back(std::nullopt);
      len = (len + p->window - 1) / p->window;
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      if (static_cast<std::uint64_t>(len) * ch != d->in_features)
        throw ValidationError(where + "in_features " + std::to_string(d->in_features) +
                              " does not match " + std::to_string(len) + " x " +
                              std::to_string(ch) + " incoming features");
      out.push_back(KernelShape{d->out_features, len, ch});
      len = 1;
      ch = d->out_features;
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_weights(const ModelSpec& model, const ModelWeights& weights) {
  auto shapes = kernel_shapes(model);
  if (weights.size() != shapes.size())
    throw FormatError("weights: " + std::to_string(weights.size()) + " layers, model has " +
                      std::to_string(shapes.size()));
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (!shapes[i]) continue;
    auto n = std::size_t{shapes[i]->c_out} * shapes[i]->k * shapes[i]->c_in;
    if (weights[i].w.size() != n)
      throw FormatError("weights: layer " + std::to_string(i) + " has " +
                        std::to_string(weights[i].w.size()) + " weights, expected " +
                        std::to_string(n));
    std::vector<bool> bits(n);
    for (std::size_t j = 0; j < n; ++j) bits[j] = weights[i].w[j] > 0;
    auto bytes = pack_msb_first(bits);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

ModelWeights decode_weights(const ModelSpec& model, const std::vector<std::uint8_t>& bytes) {
  auto shapes = kernel_shapes(model);
  ModelWeights out(shapes.size());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (!shapes[i]) continue;
    auto& lw = out[i];
    lw.c_out = shapes[i]->c_out;
    lw.k = shapes[i]->k;
    lw.c_in = shapes[i]->c_in;
    auto n = std::size_t{lw.c_out} * lw.k * lw.c_in;
    auto nbytes = (n + 7) / 8;
    if (offset + nbytes > bytes.size())
      throw FormatError("weights file too short at layer " + std::to_string(i));
    std::vector<std::uint8_t> slice(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(offset + nbytes));
    auto bits = unpack_msb_first(slice, n);
    lw.w.resize(n);
    for (std::size_t j = 0; j < n; ++j) lw.w[j] = bits[j] ? 1 : -1;
    offset += nbytes;
  }
  if (offset != bytes.size())
    throw FormatError("weights file has " + std::to_string(bytes.size() - offset) +
                      " trailing bytes");
  return out;
}

ModelWeights random_weights(const ModelSpec& model, std::uint64_t seed) {
  auto shapes = kernel_shapes(model);
  ModelWeights out(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (!shapes[i]) continue;
    auto& lw = out[i];
    lw.c_out = shapes[i]->c_out;
    lw.k = shapes[i]->k;
    lw.c_in = shapes[i]->c_in;
    std::mt19937_64 rng(stream_seed(seed, i));
    lw.w.resize(std::size_t{lw.c_out} * lw.k * lw.c_in);
    std::uint64_t pool = 0;
    for (std::size_t j = 0; j < lw.w.size(); ++j) {
      if (j % 64 == 0) pool = rng();
      lw.w[j] = (pool >> (j % 64)) & 1 ? 1 : -1;
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_input(const InputBits& bits) {
  std::vector<bool> b(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) b[i] = bits[i] != 0;
  return pack_msb_first(b);
}

InputBits decode_input(const ModelSpec& model, const std::vector<std::uint8_t>& bytes) {
  auto n = std::size_t{model.input_len} * model.input_channels;
  if (bytes.size() != (n + 7) / 8)
    throw FormatError("input file has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string((n + 7) / 8) + " for " + std::to_string(model.input_len) +
                      " x " + std::to_string(model.input_channels) + " bits");
  auto bits = unpack_msb_first(bytes, n);
  return InputBits(bits.begin(), bits.end());
}

InputBits random_input(const ModelSpec& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  InputBits out(std::size_t{model.input_len} * model.input_channels);
  for (auto& b : out) b = rng() >> 63;
  return out;
}

ModelSpec random_model(std::mt19937_64& rng, const RandomModelOptions& o) {
  auto uniform = [&](std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
  };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };
  // Channel counts log-uniform so narrow and wide layers both show up.
  auto channels = [&]() {
    double hi = std::log2(static_cast<double>(o.max_channels) + 1);
    double v = std::exp2(std::uniform_real_distribution<double>(0, hi)(rng));
    return std::clamp<std::uint32_t>(static_cast<std::uint32_t>(v), 1, o.max_channels);
  };

  ModelSpec m;
  m.input_len = uniform(o.min_len, o.max_len);
  m.input_channels = channels();
  std::uint32_t len = m.input_len, ch = m.input_channels;
  auto n_layers = uniform(o.min_layers, o.max_layers);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    bool can_pool = len >= 2;
    if (i > 0 && can_pool && chance(o.pool_probability)) {
      std::uint32_t w = 1u << uniform(1, 3);
      m.layers.emplace_back(Pool{w});
      len = (len + w - 1) / w;
      continue;
    }
    Conv1d c;
    c.c_in = ch;
    std::uint32_t kmax = std::min({o.max_kernel, len, std::uint32_t(1024 / ch)});
    c.k = uniform(1, std::max<std::uint32_t>(kmax, 1));
    c.c_out = channels();
    c.stride = (len - c.k >= 1 && chance(0.3)) ? 2 : 1;
    std::uint32_t n_out = (len - c.k) / c.stride + 1;
    if (n_out >= 2 && chance(o.pool_probability)) c.fused_pool_window = 1u << uniform(1, 3);
    std::uint32_t room = 1024 - c.k * c.c_in;
    if (room > 0 && chance(o.bias_probability)) {
      std::int32_t span = static_cast<std::int32_t>(std::min<std::uint32_t>(room, 3));
      for (std::uint32_t q = 0; q < c.c_out; ++q)
        c.bias.push_back(std::uniform_int_distribution<std::int32_t>(-span, span)(rng));
    }
    len = n_out;
    if (c.fused_pool_window) len = (len + *c.fused_pool_window - 1) / *c.fused_pool_window;
    ch = c.c_out;
    m.layers.emplace_back(std::move(c));
  }
  return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {text.begin(), text.end()});
}

}  // namespace pscnn
