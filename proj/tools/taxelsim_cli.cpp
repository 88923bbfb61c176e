// taxelsim command-line driver.
//
// Exit codes: 0 ok, 1 I/O or parse failure, 2 validation or usage error,
// 3 simulation failure.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "taxelsim/core.hpp"
#include "taxelsim/io.hpp"
#include "taxelsim/signals.hpp"
#include "taxelsim/solver.hpp"

namespace {

using namespace taxelsim;

constexpr int kOk = 0;
constexpr int kIoError = 1;
constexpr int kValidationError = 2;
constexpr int kSimulationError = 3;

std::size_t thread_count(const std::optional<std::size_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("TAXELSIM_THREADS")) {
    try {
      return static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring malformed TAXELSIM_THREADS='" << env << "'\n";
    }
  }
  return 0;
}

TraceFormat output_format(const std::string& flag, const std::string& out) {
  if (flag == "binary") return TraceFormat::Binary;
  if (flag == "csv") return TraceFormat::Csv;
  return format_for_path(out);
}

struct Options {
  std::string scene;
  std::string trace;
  std::string out;
  std::string format;
  std::string patch;
  std::optional<std::size_t> threads;
  bool no_clamp = false;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double sigma_s = 0.0;
  double time = 0.0;
  std::optional<double> lo;
  std::optional<double> hi;
};

int cmd_validate(const Options& o) {
  World world;
  try {
    world = parse_scene_unvalidated(read_file(o.scene));
  } catch (const SceneError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  const auto violations = validate_world(world);
  if (violations.empty()) {
    std::cout << "OK\n";
    return kOk;
  }
  for (const auto& v : violations) std::cout << v.path << ": " << v.message << "\n";
  return kValidationError;
}

int cmd_simulate(const Options& o) {
  const World world = load_scene(o.scene);
  const auto start = std::chrono::steady_clock::now();
  const Trace trace = simulate(world, SimulationOptions{thread_count(o.threads)});
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_trace_file(trace, o.out, output_format(o.format, o.out));
  std::cerr << "steps: " << trace.steps() << "\n"
            << "taxels: " << trace.taxels() << "\n"
            << "wall time: " << wall << " s\n"
            << "saturated: " << trace.saturated.size() << "\n";
  return kOk;
}

int cmd_forces(const Options& o) {
  const World world = load_scene(o.scene);
  const Trace trace = read_trace_file(o.trace);
  const Trace forces = displacements_to_forces(trace, world, ForceOptions{!o.no_clamp});
  write_trace_file(forces, o.out, output_format(o.format, o.out));
  return kOk;
}

int cmd_noise(const Options& o) {
  const Trace trace = read_trace_file(o.trace);
  const Executor exec(thread_count(o.threads));
  const Trace noisy = add_noise(trace, NoiseSpec{o.sigma, o.seed}, &exec);
  write_trace_file(noisy, o.out, output_format(o.format, o.out));
  return kOk;
}

int cmd_smooth(const Options& o) {
  const World world = load_scene(o.scene);
  const Trace trace = read_trace_file(o.trace);
  write_trace_file(smooth_trace(trace, world, o.sigma_s), o.out, output_format(o.format, o.out));
  return kOk;
}

int cmd_heatmap(const Options& o) {
  if (o.lo.has_value() != o.hi.has_value()) {
    std::cerr << "error: --lo and --hi must be given together\n";
    return kValidationError;
  }
  const World world = load_scene(o.scene);
  const Trace trace = read_trace_file(o.trace);
  const SkinPatch* patch = find_patch(world, o.patch);
  if (patch == nullptr) {
    std::cerr << "error: scene has no patch '" << o.patch << "'\n";
    return kValidationError;
  }
  const SignalFrame frame = extract_frame(trace, o.patch, o.time);
  HeatmapScaling scaling = MinMaxScaling{};
  if (o.lo) scaling = FixedScaling{*o.lo, *o.hi};
  const auto image = export_heatmap(frame, *patch, scaling);
  write_file(o.out, std::string_view(reinterpret_cast<const char*>(image.data()), image.size()));
  return kOk;
}

int run_guarded(int (*cmd)(const Options&), const Options& o) {
  try {
    return cmd(o);
  } catch (const SceneError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == SceneError::Kind::Validation ? kValidationError : kIoError;
  } catch (const InvalidWorld& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const SimulationError& e) {
    std::cerr << "error: simulation failed: " << e.what() << "\n";
    return kSimulationError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const TraceFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const CatalogMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::logic_error& e) {
    // invalid_argument / out_of_range from the library: bad flag values.
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-static tactile skin simulator"};
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Check a scene file");
  validate->add_option("--scene", o.scene, "Scene JSON")->required();

  auto* sim = app.add_subcommand("simulate", "Simulate a scene and write its displacement trace");
  sim->add_option("--scene", o.scene, "Scene JSON")->required();
  sim->add_option("--out", o.out, "Output trace")->required();
  sim->add_option("--format", o.format, "binary or csv (default: from --out extension)")
      ->check(CLI::IsMember({"binary", "csv"}));
  sim->add_option("--threads", o.threads, "Worker threads (default: TAXELSIM_THREADS or all cores)");

  auto* forces = app.add_subcommand("forces", "Convert a displacement trace to forces");
  forces->add_option("--scene", o.scene, "Scene JSON")->required();
  forces->add_option("--trace", o.trace, "Displacement trace")->required();
  forces->add_option("--out", o.out, "Output trace")->required();
  forces->add_flag("--no-clamp", o.no_clamp, "Keep negative spring+damper sums");
  forces->add_option("--format", o.format)->check(CLI::IsMember({"binary", "csv"}));

  auto* noise = app.add_subcommand("noise", "Add seeded Gaussian noise to a trace");
  noise->add_option("--trace", o.trace, "Input trace")->required();
  noise->add_option("--sigma", o.sigma, "Noise standard deviation")->required();
  noise->add_option("--seed", o.seed, "Generator seed")->required();
  noise->add_option("--out", o.out, "Output trace")->required();
  noise->add_option("--format", o.format)->check(CLI::IsMember({"binary", "csv"}));
  noise->add_option("--threads", o.threads, "Worker threads");

  auto* smooth = app.add_subcommand("smooth", "Gaussian-smooth every frame of a trace");
  smooth->add_option("--scene", o.scene, "Scene JSON")->required();
  smooth->add_option("--trace", o.trace, "Input trace")->required();
  smooth->add_option("--sigma-s", o.sigma_s, "Kernel width in meters")->required();
  smooth->add_option("--out", o.out, "Output trace")->required();
  smooth->add_option("--format", o.format)->check(CLI::IsMember({"binary", "csv"}));

  auto* heatmap = app.add_subcommand("heatmap", "Render one frame of a patch as a PGM image");
  heatmap->add_option("--scene", o.scene, "Scene JSON")->required();
  heatmap->add_option("--trace", o.trace, "Input trace")->required();
  heatmap->add_option("--patch", o.patch, "Patch id")->required();
  heatmap->add_option("--time", o.time, "Time in seconds")->required();
  heatmap->add_option("--out", o.out, "Output PGM")->required();
  heatmap->add_option("--lo", o.lo, "Value mapped to black");
  heatmap->add_option("--hi", o.hi, "Value mapped to white");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidationError;
  }

  if (validate->parsed()) return run_guarded(cmd_validate, o);
  if (sim->parsed()) return run_guarded(cmd_simulate, o);
  if (forces->parsed()) return run_guarded(cmd_forces, o);
  if (noise->parsed()) return run_guarded(cmd_noise, o);
  if (smooth->parsed()) return run_guarded(cmd_smooth, o);
  if (heatmap->parsed()) return run_guarded(cmd_heatmap, o);
  return kValidationError;
}
