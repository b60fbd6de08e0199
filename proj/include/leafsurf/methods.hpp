#pragma once

// The nine reconstruction methods behind one dispatch surface, sharing the
// denoise -> PCA-align preprocessing. Every method consumes an aligned cloud
// (plus normals where needed) and yields a mesh in the original world frame
// together with its reported surface area.

#include <array>
#include <optional>
#include <string>

#include "leafsurf/bpa.hpp"
#include "leafsurf/config.hpp"
#include "leafsurf/d2spline.hpp"
#include "leafsurf/delaunay.hpp"
#include "leafsurf/geo.hpp"
#include "leafsurf/localfit.hpp"
#include "leafsurf/poisson.hpp"
#include "leafsurf/preprocess.hpp"
#include "leafsurf/som.hpp"
#include "leafsurf/spline.hpp"
#include "leafsurf/trim.hpp"

namespace leafsurf {

enum class MethodId { Bspline, Nurbs, D2s, Delaunay, Mls, Loess, Poisson, Bpa, Som };

inline constexpr std::array<MethodId, 9> kAllMethods = {
    MethodId::Bspline, MethodId::Nurbs,    MethodId::D2s,
    MethodId::Delaunay, MethodId::Mls,     MethodId::Loess,
    MethodId::Poisson, MethodId::Bpa,      MethodId::Som};

inline std::string method_name(MethodId m) {
  switch (m) {
    case MethodId::Bspline: return "bspline";
    case MethodId::Nurbs: return "nurbs";
    case MethodId::D2s: return "d2s";
    case MethodId::Delaunay: return "delaunay";
    case MethodId::Mls: return "mls";
    case MethodId::Loess: return "loess";
    case MethodId::Poisson: return "poisson";
    case MethodId::Bpa: return "bpa";
    case MethodId::Som: return "som";
  }
  return "?";
}

inline MethodId parse_method(const std::string& s) {
  for (MethodId m : kAllMethods)
    if (method_name(m) == s) return m;
  throw ParameterError("unknown method: " + s);
}

struct PreparedCloud {
  PointCloud aligned;
  std::vector<Vec3> normals;  // aligned frame; empty when not supplied
  Frame frame;
  std::size_t raw_points = 0;
};

/// Shared preprocessing: statistical outlier removal, then PCA alignment.
/// Supplied normals follow their points through both steps.
inline PreparedCloud prepare_cloud(const PointCloud& raw,
                                   const std::vector<Vec3>* normals,
                                   const Config& cfg) {
  validate(raw);
  PreparedCloud out;
  out.raw_points = raw.points.size();

  int k = static_cast<int>(cfg.get_int("sor.k", 20));
  double ratio = cfg.get_double("sor.std_ratio", 2.0);
  PointCloud kept;
  kept.id = raw.id;
  std::vector<Vec3> kept_normals;
  if (cfg.get_bool("sor.enabled", true) &&
      raw.points.size() > static_cast<std::size_t>(k) + 1) {
    std::vector<char> keep = statistical_outlier_mask(raw, k, ratio);
    for (std::size_t i = 0; i < raw.points.size(); ++i) {
      if (!keep[i]) continue;
      kept.points.push_back(raw.points[i]);
      if (normals) kept_normals.push_back((*normals)[i]);
    }
  } else {
    kept = raw;
    if (normals) kept_normals = *normals;
  }

  auto [aligned, frame] = pca_align(kept);
  out.aligned = std::move(aligned);
  out.frame = frame;
  if (normals) {
    out.normals.resize(kept_normals.size());
    for (std::size_t i = 0; i < kept_normals.size(); ++i)
      out.normals[i] = frame.rotation * kept_normals[i];
  }
  return out;
}

struct MethodOutput {
  TriangleMesh mesh;  // world frame
  double area = 0.0;
  std::optional<double> area_untrimmed;  // spline methods report both
};

namespace detail_methods {

/// Tessellates a fitted surface over the trim region (cell centers inside).
inline TriangleMesh surface_to_mesh(const ParametricSurface& surf,
                                    const TrimCurve* trim, int res) {
  std::vector<int> vid(static_cast<std::size_t>(res + 1) * (res + 1), -1);
  TriangleMesh mesh;
  auto vertex = [&](int i, int j) {
    int& id = vid[static_cast<std::size_t>(i) * (res + 1) + j];
    if (id < 0) {
      id = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(evaluate_surface(
          surf, static_cast<double>(i) / res, static_cast<double>(j) / res));
    }
    return static_cast<std::uint32_t>(id);
  };
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      Vec2 center{(i + 0.5) / res, (j + 0.5) / res};
      if (trim && !trim->contains(center)) continue;
      std::uint32_t a = vertex(i, j), b = vertex(i + 1, j);
      std::uint32_t c = vertex(i + 1, j + 1), d = vertex(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }
  return mesh;
}

inline OrientedPointCloud oriented_from(const PreparedCloud& pc,
                                        const Config& cfg) {
  OrientedPointCloud oc;
  if (!pc.normals.empty()) {
    oc.points = pc.aligned.points;
    oc.normals = pc.normals;
    oc.id = pc.aligned.id;
  } else {
    int k = static_cast<int>(cfg.get_int("normals.k", 20));
    k = std::min<int>(k, static_cast<int>(pc.aligned.points.size()) - 1);
    oc = estimate_normals(pc.aligned, std::max(3, k));
  }
  return oc;
}

inline LocalFitConfig local_config(const Config& cfg, bool loess) {
  LocalFitConfig lc;
  lc.kernel = loess ? KernelKind::Tricube : KernelKind::Gaussian;
  lc.poly_degree = static_cast<int>(
      cfg.get_int(loess ? "loess.degree" : "mls.degree", 2));
  lc.knn_min = static_cast<int>(cfg.get_int("local.knn_min", 30));
  lc.span_frac = cfg.get_double("loess.span_frac", 0.05);
  if (!loess) lc.bandwidth_mult = cfg.get_double("mls.bandwidth_mult", 2.0);
  return lc;
}

}  // namespace detail_methods

/// Runs one reconstruction method on a prepared cloud.
inline MethodOutput reconstruct_with_method(MethodId method,
                                            const PreparedCloud& pc,
                                            const Config& cfg) {
  using namespace detail_methods;
  const PointCloud& aligned = pc.aligned;
  MethodOutput out;

  switch (method) {
    case MethodId::Bspline:
    case MethodId::Nurbs: {
      int gu = static_cast<int>(cfg.get_int("spline.grid_u", 40));
      int gv = static_cast<int>(cfg.get_int("spline.grid_v", 40));
      int p = static_cast<int>(cfg.get_int("spline.degree_u", 3));
      int q = static_cast<int>(cfg.get_int("spline.degree_v", 3));
      int quad = static_cast<int>(cfg.get_int("spline.quadrature_res", 256));
      GridSamples grid = resample_to_grid(aligned, gu, gv);
      ParametricSurface surf;
      if (method == MethodId::Bspline) {
        surf = fit_bspline_interp(grid, p, q);
      } else {
        int cu = static_cast<int>(cfg.get_int("spline.ctrl_u", 20));
        int cv = static_cast<int>(cfg.get_int("spline.ctrl_v", 20));
        std::vector<double> weights(static_cast<std::size_t>(cu) * cv, 1.0);
        surf = fit_nurbs_approx(grid, p, q, cu, cv, weights);
      }
      TrimCurve trim = fit_trim_curve(aligned);
      double trimmed = trimmed_area(surf, &trim, quad);
      double untrimmed = trimmed_area(surf, nullptr, quad);
      bool report_trimmed =
          cfg.get_string("spline.area", "trimmed") == "trimmed";
      out.area = report_trimmed ? trimmed : untrimmed;
      out.area_untrimmed = untrimmed;
      out.mesh = surface_to_mesh(surf, &trim, 128);
      break;
    }
    case MethodId::D2s: {
      D2Options opt;
      opt.max_centers = static_cast<int>(cfg.get_int("d2s.max_centers", 1500));
      opt.trace_seed = static_cast<unsigned>(
          cfg.get_int("d2s.trace_estimator_seed", 1234));
      double alpha;
      if (cfg.has("d2s.alpha")) {
        alpha = cfg.get_double("d2s.alpha", 1.0);
      } else {
        auto grid = default_alpha_grid(
            cfg.get_double("d2s.alpha_grid_min", 1e-6),
            cfg.get_double("d2s.alpha_grid_max", 1e6),
            static_cast<int>(cfg.get_int("d2s.alpha_grid_count", 13)));
        alpha = gcv_select_alpha(aligned, grid, opt).alpha;
      }
      HeightField field = fit_d2_spline(aligned, alpha, opt);
      out.mesh = height_field_to_mesh(
          field, aligned, static_cast<int>(cfg.get_int("d2s.mesh_res", 200)));
      out.area = mesh_area(out.mesh);
      break;
    }
    case MethodId::Delaunay: {
      out.mesh = reconstruct_delaunay25d(aligned);
      out.area = mesh_area(out.mesh);
      break;
    }
    case MethodId::Mls: {
      out.mesh = reconstruct_mls(aligned, local_config(cfg, false));
      out.area = mesh_area(out.mesh);
      break;
    }
    case MethodId::Loess: {
      out.mesh = reconstruct_loess(aligned, local_config(cfg, true));
      out.area = mesh_area(out.mesh);
      break;
    }
    case MethodId::Poisson: {
      OrientedPointCloud oc = oriented_from(pc, cfg);
      int depth = static_cast<int>(cfg.get_int("poisson.depth", 6));
      int cap = static_cast<int>(cfg.get_int("poisson.max_depth", 8));
      depth = std::min(depth, cap);
      double iso = cfg.get_double("poisson.iso", 0.5);
      double trim_mult = cfg.get_double("poisson.trim_mult", 3.0);
      PoissonReconstruction rec =
          reconstruct_poisson(oc, depth, trim_mult, iso);
      bool sheet = cfg.get_string("poisson.area_mode", "sheet") == "sheet";
      out.mesh = sheet ? rec.mesh : rec.untrimmed;
      out.area = mesh_area(out.mesh);
      out.area_untrimmed = mesh_area(rec.untrimmed);
      break;
    }
    case MethodId::Bpa: {
      OrientedPointCloud oc = oriented_from(pc, cfg);
      out.mesh = reconstruct_bpa(oc, cfg.get_double("bpa.radius_mult", 2.0));
      out.area = mesh_area(out.mesh);
      break;
    }
    case MethodId::Som: {
      int rows = static_cast<int>(cfg.get_int("som.rows", 20));
      int cols = static_cast<int>(cfg.get_int("som.cols", 20));
      TrainingSchedule sched;
      sched.epochs = static_cast<int>(cfg.get_int("som.epochs", 100));
      sched.alpha0 = cfg.get_double("som.alpha0", 0.5);
      sched.alpha1 = cfg.get_double("som.alpha1", 0.01);
      sched.sigma0 = cfg.get_double("som.sigma0", 0.0);
      sched.gaussian = cfg.get_bool("som.gaussian", true);
      sched.seed = static_cast<std::uint64_t>(cfg.get_int("som.seed", 42));
      SomLattice lat = init_lattice(aligned, rows, cols);
      lat = som_train(lat, aligned, sched);
      out.mesh = lattice_to_mesh(lat);
      out.area = mesh_area(out.mesh);
      break;
    }
  }

  // back to the original world frame
  for (Vec3& v : out.mesh.vertices) v = pc.frame.to_world(v);
  return out;
}

}  // namespace leafsurf
