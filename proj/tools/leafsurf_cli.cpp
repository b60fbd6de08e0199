// leafsurf command-line tool: single-cloud reconstruction, the benchmark
// suite, and synthetic test-shape generation.
//
// Exit codes: 0 success, 1 partial failures recorded, 2 fatal error.

#define LEAFSURF_ALLOC_METER_IMPL
#include "leafsurf/resource.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "leafsurf/bench.hpp"
#include "leafsurf/cloud_io.hpp"
#include "leafsurf/config.hpp"
#include "leafsurf/methods.hpp"
#include "leafsurf/synth.hpp"

using namespace leafsurf;

namespace {

Config load_config(const std::string& path) {
  return path.empty() ? Config{} : Config::load(path);
}

int cmd_reconstruct(const std::string& method_str, const std::string& input,
                    const std::string& output, const std::string& config_path) {
  Config cfg = load_config(config_path);
  MethodId method = parse_method(method_str);

  PointCloud cloud;
  std::optional<std::vector<Vec3>> normals;
  std::filesystem::path in(input);
  if (in.extension() == ".ply" && ply_has_normals(in)) {
    OrientedPointCloud oc = load_oriented_cloud(in);
    cloud.points = std::move(oc.points);
    cloud.id = oc.id;
    normals = std::move(oc.normals);
  } else {
    cloud = load_cloud(in);
  }

  bench::RunOptions opts;
  opts.mesh_path = output;
  opts.normals = normals ? &*normals : nullptr;
  opts.ram_mode = bench::ram_mode_from_config_string(
      cfg.get_string("bench.ram_mode", "auto"));
  bench::ReconstructionResult res = bench::run_method(method, cloud, cfg, opts);

  if (!res.ok()) {
    std::fprintf(stderr, "reconstruction failed: %s\n", res.status.c_str());
    return 1;
  }
  std::printf("method=%s points=%zu area=%.10g cpu_s=%.4f peak_ram_mb=%.3f\n",
              method_name(method).c_str(), res.n_points, res.area,
              res.cpu_seconds,
              static_cast<double>(res.peak_ram_bytes) / (1024.0 * 1024.0));
  if (res.has_untrimmed)
    std::printf("area_untrimmed=%.10g\n", res.area_untrimmed);
  std::printf("mesh=%s\n", output.c_str());
  return 0;
}

int cmd_bench(const std::string& input_dir, const std::string& methods_str,
              const std::string& out_csv, const std::string& plots_dir,
              const std::string& benchmark_str, const std::string& config_path) {
  Config cfg = load_config(config_path);
  bench::SuiteOptions opts;
  opts.out_csv = out_csv;
  opts.plots_dir = plots_dir;
  opts.benchmark = parse_method(benchmark_str);
  opts.ram_mode = bench::ram_mode_from_config_string(
      cfg.get_string("bench.ram_mode", "auto"));
  if (methods_str != "all") {
    opts.methods.clear();
    std::stringstream ss(methods_str);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) opts.methods.push_back(parse_method(tok));
    if (opts.methods.empty()) throw ParameterError("no methods selected");
  }

  std::fprintf(stderr, "ram accounting: %s\n",
               bench::ram_mode_name(opts.ram_mode));
  auto results = bench::run_suite(input_dir, cfg, opts);

  std::size_t failures = 0;
  for (const auto& r : results)
    if (!r.ok()) ++failures;
  std::printf("%zu rows (%zu failed) -> %s\n", results.size(), failures,
              out_csv.c_str());
  return failures == 0 ? 0 : 1;
}

int cmd_synth(const std::string& shape_str, const std::string& params,
              std::uint64_t seed, const std::string& out) {
  SyntheticShape shape;
  shape.kind = parse_shape(shape_str);

  std::stringstream ss(params);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw ParameterError("synth params must be k=v,...: " + tok);
    std::string key = tok.substr(0, eq);
    double value = std::stod(tok.substr(eq + 1));
    if (key == "size" || key == "side") shape.size = value;
    else if (key == "radius") shape.radius = value;
    else if (key == "coef") shape.parab_coef = value;
    else if (key == "noise") shape.noise_sigma = value;
    else if (key == "n" || key == "samples") shape.samples = static_cast<int>(value);
    else throw ParameterError("unknown synth param: " + key);
  }

  SynthResult result = synth_generate(shape, seed);
  save_cloud(result.cloud, out);
  std::printf("shape=%s samples=%zu analytic_area=%.10g -> %s\n",
              shape_name(shape.kind).c_str(), result.cloud.points.size(),
              result.analytic_area, out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"leafsurf: leaf-surface reconstruction toolkit and benchmark"};
  app.require_subcommand(1);

  auto* rec = app.add_subcommand("reconstruct", "reconstruct one cloud");
  std::string rec_method, rec_input, rec_output, rec_config;
  rec->add_option("--method", rec_method, "method id")->required();
  rec->add_option("--input", rec_input, "input cloud (.xyz/.ply)")->required();
  rec->add_option("--output", rec_output, "output mesh (.obj/.ply)")->required();
  rec->add_option("--config", rec_config, "key=value config file");

  auto* ben = app.add_subcommand("bench", "run the benchmark suite");
  std::string ben_dir, ben_methods = "all", ben_out = "results.csv";
  std::string ben_plots, ben_benchmark = "poisson", ben_config;
  ben->add_option("--input-dir", ben_dir, "directory of <plant>__<leaf> clouds")
      ->required();
  ben->add_option("--methods", ben_methods, "comma list or 'all'");
  ben->add_option("--out", ben_out, "per-leaf CSV path");
  ben->add_option("--plots", ben_plots, "emit SVG charts into this directory");
  ben->add_option("--benchmark", ben_benchmark, "deviation benchmark method");
  ben->add_option("--config", ben_config, "key=value config file");

  auto* syn = app.add_subcommand("synth", "generate a synthetic test cloud");
  std::string syn_shape, syn_params, syn_out;
  std::uint64_t syn_seed = 1;
  syn->add_option("--shape", syn_shape,
                  "plane|paraboloid|sphere|hole-plane|decimated-plane")
      ->required();
  syn->add_option("--params", syn_params, "k=v,... (size,radius,coef,noise,n)");
  syn->add_option("--seed", syn_seed, "rng seed");
  syn->add_option("--out", syn_out, "output cloud (.ply keeps normals)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (rec->parsed())
      return cmd_reconstruct(rec_method, rec_input, rec_output, rec_config);
    if (ben->parsed())
      return cmd_bench(ben_dir, ben_methods, ben_out, ben_plots, ben_benchmark,
                       ben_config);
    if (syn->parsed()) return cmd_synth(syn_shape, syn_params, syn_seed, syn_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return 2;
  }
  return 2;
}
