#pragma once

// Evaluation harness: run any method on any leaf cloud, account CPU and
// peak RAM for the reconstruction phase, aggregate per plant, compare areas
// against a benchmark method, and emit CSV reports plus SVG bar charts.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "leafsurf/cloud_io.hpp"
#include "leafsurf/config.hpp"
#include "leafsurf/geo.hpp"
#include "leafsurf/methods.hpp"
#include "leafsurf/resource.hpp"

namespace leafsurf::bench {

struct ReconstructionResult {
  MethodId method = MethodId::Delaunay;
  std::string dataset;
  std::string plant_id;
  std::string leaf_id;
  std::size_t n_points = 0;
  double area = 0.0;
  double area_untrimmed = 0.0;   // spline/poisson alternate convention
  bool has_untrimmed = false;
  double cpu_seconds = 0.0;
  long long peak_ram_bytes = 0;
  std::string status = "ok";     // "ok" or "error:<tag>"
  std::string mesh_path;

  bool ok() const { return status == "ok"; }
};

struct RunOptions {
  std::filesystem::path mesh_path;  // empty: do not save
  const std::vector<Vec3>* normals = nullptr;
  RamMode ram_mode = detect_ram_mode();
};

/// Full pipeline on one cloud: denoise -> PCA align -> method -> area.
/// CPU time and peak RAM cover the reconstruction phase only (everything
/// after the shared preprocessing). Method failures are recorded in the
/// result's status, never thrown.
inline ReconstructionResult run_method(MethodId method, const PointCloud& cloud,
                                       const Config& cfg,
                                       const RunOptions& opts = {}) {
  ReconstructionResult res;
  res.method = method;
  res.leaf_id = cloud.id;
  res.n_points = cloud.points.size();
  res.mesh_path = opts.mesh_path.string();

  PreparedCloud prepared;
  try {
    prepared = prepare_cloud(cloud, opts.normals, cfg);
  } catch (const std::exception& e) {
    res.status = std::string("error:prepare: ") + e.what();
    return res;
  }

  struct Payload {
    double area;
    double area_untrimmed;
    int has_untrimmed;
  };
  std::filesystem::path mesh_path = opts.mesh_path;
  std::function<Payload()> phase = [&]() {
    MethodOutput out = reconstruct_with_method(method, prepared, cfg);
    if (!mesh_path.empty()) save_mesh(out.mesh, mesh_path);
    return Payload{out.area, out.area_untrimmed.value_or(0.0),
                   out.area_untrimmed.has_value() ? 1 : 0};
  };

  Payload payload{};
  PhaseMetrics metrics = run_metered_phase(opts.ram_mode, phase, payload);
  res.cpu_seconds = metrics.cpu_seconds;
  res.peak_ram_bytes = metrics.peak_ram_bytes;
  if (!metrics.ok) {
    res.status = "error:" + metrics.error;
    res.mesh_path.clear();
    return res;
  }
  res.area = payload.area;
  res.area_untrimmed = payload.area_untrimmed;
  res.has_untrimmed = payload.has_untrimmed != 0;
  return res;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail_bench {

inline std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace detail_bench

inline const char* kCsvHeader =
    "dataset,plant_id,leaf_id,method,n_points,area,cpu_s,peak_ram_mb,status,"
    "mesh_path";

inline std::string csv_row(const ReconstructionResult& r) {
  std::string row = r.dataset + "," + r.plant_id + "," + r.leaf_id + "," +
                    method_name(r.method) + "," + std::to_string(r.n_points) +
                    ",";
  if (r.ok()) {
    row += detail_bench::fmt(r.area) + "," +
           detail_bench::fmt(r.cpu_seconds, "%.4f") + "," +
           detail_bench::fmt(static_cast<double>(r.peak_ram_bytes) /
                                 (1024.0 * 1024.0),
                             "%.3f");
  } else {
    row += ",,";  // failures carry no fabricated metrics
  }
  // status may contain commas from nested messages; flatten them
  std::string status = r.status;
  for (char& c : status)
    if (c == ',' || c == '\n') c = ';';
  row += "," + status + "," + r.mesh_path;
  return row;
}

inline void write_leaf_csv(const std::vector<ReconstructionResult>& results,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kCsvHeader << "\n";
  for (const auto& r : results) out << csv_row(r) << "\n";
}

struct PlantAggregate {
  std::string dataset, plant_id;
  MethodId method;
  int leaves_ok = 0;
  int leaves_failed = 0;
  double mean_area = 0.0;
  double mean_cpu = 0.0;
  double mean_ram_mb = 0.0;
};

inline std::vector<PlantAggregate> aggregate_per_plant(
    const std::vector<ReconstructionResult>& results) {
  std::map<std::tuple<std::string, std::string, int>, PlantAggregate> acc;
  for (const auto& r : results) {
    auto key = std::make_tuple(r.dataset, r.plant_id,
                               static_cast<int>(r.method));
    auto& a = acc[key];
    a.dataset = r.dataset;
    a.plant_id = r.plant_id;
    a.method = r.method;
    if (r.ok()) {
      ++a.leaves_ok;
      a.mean_area += r.area;
      a.mean_cpu += r.cpu_seconds;
      a.mean_ram_mb += static_cast<double>(r.peak_ram_bytes) / (1024.0 * 1024.0);
    } else {
      ++a.leaves_failed;
    }
  }
  std::vector<PlantAggregate> out;
  for (auto& [key, a] : acc) {
    if (a.leaves_ok > 0) {
      a.mean_area /= a.leaves_ok;
      a.mean_cpu /= a.leaves_ok;
      a.mean_ram_mb /= a.leaves_ok;
    }
    out.push_back(a);
  }
  return out;
}

inline void write_plant_csv(const std::vector<PlantAggregate>& aggs,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "dataset,plant_id,method,leaves_ok,leaves_failed,mean_area,mean_cpu_s,"
         "mean_peak_ram_mb\n";
  for (const auto& a : aggs) {
    out << a.dataset << "," << a.plant_id << "," << method_name(a.method) << ","
        << a.leaves_ok << "," << a.leaves_failed << ",";
    if (a.leaves_ok > 0)
      out << detail_bench::fmt(a.mean_area) << ","
          << detail_bench::fmt(a.mean_cpu, "%.4f") << ","
          << detail_bench::fmt(a.mean_ram_mb, "%.3f");
    else
      out << ",,";
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Deviation vs a benchmark method

struct DeviationReport {
  MethodId benchmark = MethodId::Poisson;
  // per (plant, method): mean signed percent deviation over that plant's leaves
  std::map<std::pair<std::string, std::string>, double> plant_method_deviation;
  // per (leaf, method) deviations feeding the means
  std::map<std::pair<std::string, std::string>, double> leaf_method_deviation;
};

/// Per leaf, 100*(area_method - area_benchmark)/area_benchmark; per plant,
/// the mean over its leaves. Leaves whose benchmark area is 0 (or whose
/// benchmark run failed) are excluded with a warning.
inline DeviationReport deviation_vs_benchmark(
    const std::vector<ReconstructionResult>& results,
    MethodId benchmark = MethodId::Poisson) {
  DeviationReport report;
  report.benchmark = benchmark;

  std::map<std::string, double> benchmark_area;  // per leaf key
  auto leaf_key = [](const ReconstructionResult& r) {
    return r.dataset + "/" + r.plant_id + "/" + r.leaf_id;
  };
  for (const auto& r : results)
    if (r.method == benchmark && r.ok()) benchmark_area[leaf_key(r)] = r.area;

  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  for (const auto& r : results) {
    if (!r.ok()) continue;
    auto it = benchmark_area.find(leaf_key(r));
    if (it == benchmark_area.end()) {
      std::fprintf(stderr, "deviation: no benchmark area for %s, skipping\n",
                   leaf_key(r).c_str());
      continue;
    }
    if (it->second == 0.0) {
      std::fprintf(stderr, "deviation: zero benchmark area for %s, excluded\n",
                   leaf_key(r).c_str());
      continue;
    }
    double dev = 100.0 * (r.area - it->second) / it->second;
    report.leaf_method_deviation[{leaf_key(r), method_name(r.method)}] = dev;
    auto& slot = acc[{r.plant_id, method_name(r.method)}];
    slot.first += dev;
    slot.second += 1;
  }
  for (auto& [key, slot] : acc)
    report.plant_method_deviation[key] = slot.first / slot.second;
  return report;
}

// ---------------------------------------------------------------------------
// SVG bar charts (self-contained; every bar carries its value in a
// data-value attribute so reports can be cross-checked exactly)

namespace detail_bench {

struct BarGroup {
  std::string label;                                  // e.g. plant id
  std::vector<std::pair<std::string, double>> bars;  // (series, value)
};

inline void write_bar_chart(const std::filesystem::path& path,
                            const std::string& title,
                            const std::vector<BarGroup>& groups) {
  if (groups.empty()) throw ParameterError("empty report: nothing to plot");
  double vmax = 0.0, vmin = 0.0;
  std::size_t nbars = 0;
  for (const auto& g : groups) {
    for (const auto& [name, v] : g.bars) {
      vmax = std::max(vmax, v);
      vmin = std::min(vmin, v);
      ++nbars;
    }
  }
  if (vmax == vmin) vmax = vmin + 1.0;

  const double bar_w = 14.0, gap = 4.0, group_gap = 24.0;
  const double plot_h = 240.0, margin = 50.0;
  double width = margin * 2;
  for (const auto& g : groups)
    width += g.bars.size() * (bar_w + gap) + group_gap;
  double height = plot_h + margin * 2;
  double scale = plot_h / (vmax - vmin);
  double y0 = margin + vmax * scale;  // y of value 0

  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                  "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
                                  "#9c755f"};

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<text x=\"" << margin << "\" y=\"24\" font-size=\"14\">" << title
      << "</text>\n";
  out << "<line x1=\"" << margin - 8 << "\" y1=\"" << y0 << "\" x2=\""
      << width - margin + 8 << "\" y2=\"" << y0
      << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";

  double x = margin;
  std::map<std::string, int> series_color;
  for (const auto& g : groups) {
    double gx0 = x;
    for (const auto& [name, v] : g.bars) {
      auto [it, fresh] = series_color.emplace(
          name, static_cast<int>(series_color.size()) % 9);
      double h = std::abs(v) * scale;
      double ytop = v >= 0 ? y0 - h : y0;
      out << "<rect x=\"" << fmt(x, "%.2f") << "\" y=\"" << fmt(ytop, "%.2f")
          << "\" width=\"" << bar_w << "\" height=\"" << fmt(h, "%.2f")
          << "\" fill=\"" << palette[it->second] << "\" data-series=\"" << name
          << "\" data-group=\"" << g.label << "\" data-value=\""
          << fmt(v, "%.10g") << "\"/>\n";
      x += bar_w + gap;
    }
    out << "<text x=\"" << fmt((gx0 + x - gap) / 2, "%.2f") << "\" y=\""
        << height - margin + 16
        << "\" font-size=\"11\" text-anchor=\"middle\">" << g.label
        << "</text>\n";
    x += group_gap;
  }
  // legend
  double lx = margin, ly = height - 12;
  for (const auto& [name, color] : series_color) {
    out << "<rect x=\"" << lx << "\" y=\"" << ly - 9
        << "\" width=\"10\" height=\"10\" fill=\"" << palette[color]
        << "\"/>\n<text x=\"" << lx + 14 << "\" y=\"" << ly
        << "\" font-size=\"11\">" << name << "</text>\n";
    lx += 14.0 * 2 + 7.0 * name.size();
  }
  out << "</svg>\n";
}

}  // namespace detail_bench

/// Figure analogs: per-plant area deviation bars, per-plant mean CPU bars,
/// per-method peak-RAM interquartile-range bars. One SVG per chart.
inline void emit_plots(const std::vector<ReconstructionResult>& results,
                       const DeviationReport& deviation,
                       const std::filesystem::path& dir) {
  if (results.empty()) throw ParameterError("empty report: nothing to plot");
  std::filesystem::create_directories(dir);

  // deviation chart
  {
    std::map<std::string, detail_bench::BarGroup> groups;
    for (const auto& [key, dev] : deviation.plant_method_deviation) {
      auto& g = groups[key.first];
      g.label = key.first;
      g.bars.emplace_back(key.second, dev);
    }
    std::vector<detail_bench::BarGroup> ordered;
    for (auto& [plant, g] : groups) ordered.push_back(g);
    detail_bench::write_bar_chart(
        dir / "deviation.svg",
        "Mean leaf area deviation per plant (%) vs " +
            method_name(deviation.benchmark),
        ordered);
  }
  // CPU chart
  {
    auto aggs = aggregate_per_plant(results);
    std::map<std::string, detail_bench::BarGroup> groups;
    for (const auto& a : aggs) {
      if (a.leaves_ok == 0) continue;
      auto& g = groups[a.plant_id];
      g.label = a.plant_id;
      g.bars.emplace_back(method_name(a.method), a.mean_cpu);
    }
    std::vector<detail_bench::BarGroup> ordered;
    for (auto& [plant, g] : groups) ordered.push_back(g);
    detail_bench::write_bar_chart(dir / "cpu_mean.svg",
                                  "Mean CPU time per plant (s)", ordered);
  }
  // RAM variability chart (IQR per method across all leaves)
  {
    std::map<std::string, std::vector<double>> per_method;
    for (const auto& r : results)
      if (r.ok())
        per_method[method_name(r.method)].push_back(
            static_cast<double>(r.peak_ram_bytes) / (1024.0 * 1024.0));
    detail_bench::BarGroup g;
    g.label = "all plants";
    for (auto& [name, vals] : per_method) {
      std::sort(vals.begin(), vals.end());
      auto quantile = [&](double q) {
        double pos = q * (vals.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, vals.size() - 1);
        return vals[lo] + (pos - lo) * (vals[hi] - vals[lo]);
      };
      g.bars.emplace_back(name, quantile(0.75) - quantile(0.25));
    }
    detail_bench::write_bar_chart(dir / "ram_iqr.svg",
                                  "Peak RAM IQR per method (MB)", {g});
  }
}

// ---------------------------------------------------------------------------
// Suite runner

struct SuiteOptions {
  std::vector<MethodId> methods{kAllMethods.begin(), kAllMethods.end()};
  MethodId benchmark = MethodId::Poisson;
  std::filesystem::path out_csv = "results.csv";
  std::filesystem::path plots_dir;  // empty: no plots
  RamMode ram_mode = detect_ram_mode();
};

/// Runs every (leaf file, method) pair in a directory of clouds named
/// <plant>__<leaf>.<ext>. Writes the per-leaf CSV, a per-plant aggregate
/// CSV next to it, and optional charts. Unreadable files become error rows.
inline std::vector<ReconstructionResult> run_suite(
    const std::filesystem::path& input_dir, const Config& cfg,
    const SuiteOptions& opts = {}) {
  if (!std::filesystem::is_directory(input_dir))
    throw IoError("input dir does not exist: " + input_dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(input_dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    if (ext == ".xyz" || ext == ".ply" || ext == ".txt")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw EmptyInputError("no cloud files in " + input_dir.string());

  std::string dataset = input_dir.filename().string();
  if (dataset.empty()) dataset = input_dir.parent_path().filename().string();

  std::filesystem::path mesh_dir = opts.out_csv.parent_path() / "meshes";
  std::filesystem::create_directories(mesh_dir);

  std::vector<ReconstructionResult> results;
  for (const auto& file : files) {
    std::string stem = file.stem().string();
    std::string plant = stem, leaf = stem;
    if (auto sep = stem.find("__"); sep != std::string::npos) {
      plant = stem.substr(0, sep);
      leaf = stem.substr(sep + 2);
    }

    PointCloud cloud;
    std::optional<std::vector<Vec3>> normals;
    std::string load_error;
    try {
      if (file.extension() == ".ply" && ply_has_normals(file)) {
        OrientedPointCloud oc = load_oriented_cloud(file);
        cloud.points = std::move(oc.points);
        cloud.id = oc.id;
        normals = std::move(oc.normals);
      } else {
        cloud = load_cloud(file);
      }
    } catch (const std::exception& e) {
      load_error = e.what();
    }

    for (MethodId method : opts.methods) {
      ReconstructionResult res;
      if (!load_error.empty()) {
        res.method = method;
        res.leaf_id = leaf;
        res.status = "error:load: " + load_error;
      } else {
        RunOptions ro;
        ro.normals = normals ? &*normals : nullptr;
        ro.ram_mode = opts.ram_mode;
        ro.mesh_path =
            mesh_dir / (plant + "__" + leaf + "__" + method_name(method) + ".obj");
        res = run_method(method, cloud, cfg, ro);
        res.leaf_id = leaf;
      }
      res.dataset = dataset;
      res.plant_id = plant;
      results.push_back(std::move(res));
    }
  }

  // deterministic row order: (plant, leaf, method)
  std::stable_sort(results.begin(), results.end(),
                   [](const ReconstructionResult& a, const ReconstructionResult& b) {
                     if (a.plant_id != b.plant_id) return a.plant_id < b.plant_id;
                     if (a.leaf_id != b.leaf_id) return a.leaf_id < b.leaf_id;
                     return static_cast<int>(a.method) < static_cast<int>(b.method);
                   });

  write_leaf_csv(results, opts.out_csv);
  auto aggs = aggregate_per_plant(results);
  std::filesystem::path plant_csv = opts.out_csv;
  plant_csv.replace_filename(opts.out_csv.stem().string() + "_plants" +
                             opts.out_csv.extension().string());
  write_plant_csv(aggs, plant_csv);

  if (!opts.plots_dir.empty()) {
    DeviationReport dev = deviation_vs_benchmark(results, opts.benchmark);
    emit_plots(results, dev, opts.plots_dir);
  }
  return results;
}

}  // namespace leafsurf::bench
