// pscnn: compile, assemble, run, compare and margin-analysis front end.
//
// Exit codes: 0 ok, 1 usage, 2 validation/compile/format error,
// 3 simulation error, 4 simulator/oracle mismatch.

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pscnn/cim_macro.hpp"
#include "pscnn/compiler.hpp"
#include "pscnn/controller.hpp"
#include "pscnn/error.hpp"
#include "pscnn/isa.hpp"
#include "pscnn/model.hpp"
#include "pscnn/oracle.hpp"

namespace {

using namespace pscnn;

constexpr int kUsage = 1, kCompile = 2, kRuntime = 3, kMismatch = 4;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PSCNN_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw FormatError(std::string("PSCNN_SEED is not an integer: ") + env);
    }
  }
  return 0;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_text(path, text);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      double v = std::stod(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw FormatError("bad sigma value '" + item + "'");
    }
  }
  if (out.empty()) throw FormatError("empty sigma grid");
  return out;
}

bool is_container(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 8 && std::memcmp(bytes.data(), "PSCNNPKG", 8) == 0;
}

struct RunArgs {
  std::string target, input, stats, cost_table, ofm_dump;
  double freq_hz = 10e6, sigma = 0;
  std::optional<std::uint64_t> seed;
  bool unfused = false;
};

MappedModel with_options(const MappedModel& mm, bool unfused) {
  if (!unfused) return mm;
  return map_model(mm.model, mm.weights, CompileOptions{false});
}

int cmd_run(const RunArgs& a) {
  auto bytes = read_file(a.target);
  std::optional<CostTable> costs;
  if (!a.cost_table.empty()) costs = parse_cost_table(read_text(a.cost_table));
  VariationParams var{a.sigma, resolve_seed(a.seed)};

  SimResult result;
  if (is_container(bytes)) {
    auto mm = with_options(load_container(bytes), a.unfused);
    if (a.input.empty()) throw FormatError("run: --input is required for a compiled container");
    auto input = decode_input(mm.model, read_file(a.input));
    result = simulate(mm, input, var);
  } else {
    // Bare program binary: empty weight images, no layer table.
    Simulator sim(std::vector<Row1024>(kWordlines), std::vector<Row1024>(kWeightSramRows), {}, var);
    result = sim.run(isa::from_binary(bytes));
  }
  auto doc = stats_json(result.stats, a.freq_hz, costs).dump(2) + "\n";
  emit(a.stats, doc);
  if (!a.ofm_dump.empty() && !result.outputs.empty()) {
    std::ostringstream os;
    for (const auto& w : result.outputs.back().words) os << to_hex(w) << '\n';
    write_text(a.ofm_dump, os.str());
  }
  return 0;
}

int cmd_compare(const std::string& target, const std::string& input_path, double sigma,
                const std::optional<std::uint64_t>& seed, bool unfused) {
  auto mm = with_options(read_container(target), unfused);
  auto input = decode_input(mm.model, read_file(input_path));
  auto sim = simulate(mm, input, {sigma, resolve_seed(seed)});
  auto ref = ref_infer(mm.model, mm.weights, input);
  if (auto m = first_mismatch(sim, ref)) {
    if (m->shape) std::cout << "mismatch: layer " << m->layer << " shape differs\n";
    else
      std::cout << "mismatch: layer " << m->layer << " position " << m->position << " channel " << m->channel
                << '\n';
    return kMismatch;
  }
  std::cout << "match: " << ref.size() << " layers bit-exact\n";
  return 0;
}

int cmd_margin(const std::string& mode, const std::string& grid_text, std::uint64_t trials,
               std::size_t rows, const std::optional<std::uint64_t>& seed, unsigned threads,
               const std::string& out) {
  if (mode != "both" && mode != "twm" && mode != "bwm") throw FormatError("--mode must be twm, bwm or both");
  if (trials == 0) throw FormatError("--trials must be at least 1");
  if (rows == 0 || rows > kWordlines) throw FormatError("--rows must be in 1..1024");
  auto grid = parse_grid(grid_text);
  auto points = monte_carlo_error_rate({rows, threads}, grid, trials, resolve_seed(seed));
  nlohmann::json j;
  j["trials"] = trials;
  j["active_rows"] = rows;
  j["points"] = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json row{{"sigma", p.sigma}};
    if (mode != "bwm") row["twm_rate"] = p.twm_rate();
    if (mode != "twm") row["bwm_rate"] = p.bwm_rate();
    j["points"].push_back(row);
  }
  emit(out, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary 1-D CNN compiler and cycle-level simulator for a 1Mb SRAM CIM processor"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string model_path, weights_path, out_path, input_path, asm_path;

  auto* compile = app.add_subcommand("compile", "Compile a model description into a container");
  compile->add_option("model", model_path, "Model description file")->required();
  compile->add_option("--weights", weights_path, "Packed sign-bit weights (random from --seed if omitted)");
  compile->add_option("-o,--output", out_path, "Container path")->required();
  compile->add_option("--seed", seed, "Seed for generated weights (falls back to PSCNN_SEED)");
  bool compile_unfused = false;
  compile->add_flag("--unfused", compile_unfused, "Run pools as separate bypass passes");

  auto* assemble = app.add_subcommand("asm", "Assemble text into a program binary");
  assemble->add_option("source", asm_path, "Assembly file")->required();
  assemble->add_option("-o,--output", out_path, "Program binary")->required();

  auto* disasm = app.add_subcommand("disasm", "Disassemble a program binary or a container's program");
  disasm->add_option("binary", asm_path, "Program binary or container")->required();
  disasm->add_option("-o,--output", out_path, "Output text (stdout if omitted)");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Simulate a container (or bare program) and emit stats");
  run->add_option("target", run_args.target, "Container or program binary")->required();
  run->add_option("--input", run_args.input, "Packed input bits");
  run->add_option("--stats", run_args.stats, "Stats JSON path (stdout if omitted)");
  run->add_option("--freq-hz", run_args.freq_hz, "Clock frequency")->default_val(10e6);
  run->add_option("--sigma", run_args.sigma, "Sense-amplifier offset sigma, unit-cell currents")->default_val(0.0);
  run->add_option("--seed", run_args.seed, "Variation seed (falls back to PSCNN_SEED)");
  run->add_flag("--unfused", run_args.unfused, "Recompile with pooling as separate bypass passes");
  run->add_option("--cost-table", run_args.cost_table, "JSON per-event energies in pJ");
  run->add_option("--dump-ofm", run_args.ofm_dump, "Write the final OFM words as hex");

  double cmp_sigma = 0;
  bool cmp_unfused = false;
  auto* compare = app.add_subcommand("compare", "Check every layer against the reference model");
  compare->add_option("target", run_args.target, "Container")->required();
  compare->add_option("--input", input_path, "Packed input bits")->required();
  compare->add_option("--sigma", cmp_sigma, "Sense-amplifier offset sigma")->default_val(0.0);
  compare->add_option("--seed", seed, "Variation seed (falls back to PSCNN_SEED)");
  compare->add_flag("--unfused", cmp_unfused, "Recompile with pooling as separate bypass passes");

  std::string mode = "both", grid = "0,0.5,1,2,4";
  std::uint64_t trials = 10000;
  std::size_t rows = kWordlines;
  unsigned threads = 0;
  auto* margin = app.add_subcommand("margin", "Monte Carlo SA-variation error rates, TWM vs BWM");
  margin->add_option("--mode", mode, "twm, bwm or both")->default_val("both");
  margin->add_option("--sigma-grid", grid, "Comma-separated sigma values")->default_val("0,0.5,1,2,4");
  margin->add_option("--trials", trials, "Trials per sigma")->default_val(10000);
  margin->add_option("--rows", rows, "Active wordlines per trial")->default_val(1024);
  margin->add_option("--seed", seed, "Seed (falls back to PSCNN_SEED)");
  margin->add_option("--threads", threads, "Worker threads, 0 for all cores")->default_val(0);
  margin->add_option("-o,--output", out_path, "Output JSON (stdout if omitted)");

  auto* gen_input = app.add_subcommand("gen-input", "Write random input bits for a model");
  gen_input->add_option("model", model_path, "Model description file")->required();
  gen_input->add_option("-o,--output", out_path, "Output path")->required();
  gen_input->add_option("--seed", seed, "Seed (falls back to PSCNN_SEED)");

  auto* gen_weights = app.add_subcommand("gen-weights", "Write random sign-bit weights for a model");
  gen_weights->add_option("model", model_path, "Model description file")->required();
  gen_weights->add_option("-o,--output", out_path, "Output path")->required();
  gen_weights->add_option("--seed", seed, "Seed (falls back to PSCNN_SEED)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*compile) {
      auto model = load_model(model_path);
      auto weights = weights_path.empty() ? random_weights(model, resolve_seed(seed))
                                          : decode_weights(model, read_file(weights_path));
      auto mm = map_model(model, weights, CompileOptions{!compile_unfused});
      write_container(out_path, mm);
      std::cout << "compiled " << mm.program.size() << " instructions, " << mm.macro_weights
                << " macro weights, " << mm.wsram_weights << " weight-SRAM weights (" << mm.wsram_rows
                << " rows), " << mm.weight_replacements << " replacements\n";
      return 0;
    }
    if (*assemble) {
      auto result = isa::assemble(read_text(asm_path));
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      write_file(out_path, isa::to_binary(result.words));
      return 0;
    }
    if (*disasm) {
      auto bytes = read_file(asm_path);
      auto words = is_container(bytes) ? load_container(bytes).program : isa::from_binary(bytes);
      emit(out_path, isa::disassemble_program(words));
      return 0;
    }
    if (*run) return cmd_run(run_args);
    if (*compare) return cmd_compare(run_args.target, input_path, cmp_sigma, seed, cmp_unfused);
    if (*margin) return cmd_margin(mode, grid, trials, rows, seed, threads, out_path);
    if (*gen_input) {
      auto model = load_model(model_path);
      write_file(out_path, encode_input(random_input(model, resolve_seed(seed))));
      return 0;
    }
    if (*gen_weights) {
      auto model = load_model(model_path);
      write_file(out_path, encode_weights(model, random_weights(model, resolve_seed(seed))));
      return 0;
    }
  } catch (const SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << '\n';
    return kRuntime;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCompile;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
