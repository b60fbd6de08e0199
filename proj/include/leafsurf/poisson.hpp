#pragma once

// Poisson surface reconstruction on a regular grid. The oriented samples are
// splatted into a node vector field V; the indicator-like scalar chi solves
//   laplacian(chi) = div(V)
// with zero-flux (Neumann) boundaries via Jacobi-preconditioned conjugate
// gradients; the surface is the 0.5 iso-contour of chi after normalization.
// Far-field triangles that the solve produces away from the data (open
// sheets make the field ambiguous there) are removed with a density trim.

#include <cmath>
#include <span>
#include <vector>

#include "leafsurf/geo.hpp"
#include "leafsurf/kdtree.hpp"
#include "leafsurf/marching_cubes.hpp"

namespace leafsurf {

/// Grid covering the cloud's bounding box padded by 10% of its diagonal
/// (5% per side), with roughly `dims` nodes along the longest axis.
inline GridFrame make_grid_frame(const std::vector<Vec3>& pts, int dims) {
  if (pts.empty()) throw EmptyInputError("empty cloud");
  if (dims < 4) throw ParameterError("grid resolution too small");
  Bounds3 box = bounding_box(pts);
  double pad = 0.05 * std::max(box.diagonal(), 1e-12);
  box.min -= Vec3{pad, pad, pad};
  box.max += Vec3{pad, pad, pad};
  Vec3 ext = box.extent();
  double longest = std::max({ext.x, ext.y, ext.z});
  GridFrame f;
  f.spacing = longest / (dims - 1);
  f.origin = box.min;
  f.nx = std::max(2, static_cast<int>(std::ceil(ext.x / f.spacing)) + 1);
  f.ny = std::max(2, static_cast<int>(std::ceil(ext.y / f.spacing)) + 1);
  f.nz = std::max(2, static_cast<int>(std::ceil(ext.z / f.spacing)) + 1);
  return f;
}

/// Distributes each sample's normal onto the 8 surrounding lattice nodes
/// with trilinear weights.
inline VectorGrid splat_normals(const OrientedPointCloud& cloud, int dims) {
  validate(cloud);
  VectorGrid grid;
  grid.frame = make_grid_frame(cloud.points, dims);
  grid.values.assign(grid.frame.node_count(), Vec3{0, 0, 0});
  const GridFrame& f = grid.frame;

  for (std::size_t s = 0; s < cloud.points.size(); ++s) {
    Vec3 local = (cloud.points[s] - f.origin) / f.spacing;
    int i = std::clamp(static_cast<int>(local.x), 0, f.nx - 2);
    int j = std::clamp(static_cast<int>(local.y), 0, f.ny - 2);
    int k = std::clamp(static_cast<int>(local.z), 0, f.nz - 2);
    double fx = std::clamp(local.x - i, 0.0, 1.0);
    double fy = std::clamp(local.y - j, 0.0, 1.0);
    double fz = std::clamp(local.z - k, 0.0, 1.0);
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj)
        for (int dk = 0; dk < 2; ++dk) {
          double w = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
          grid.values[f.index(i + di, j + dj, k + dk)] += w * cloud.normals[s];
        }
  }
  return grid;
}

namespace detail_poisson {

/// Central-difference divergence (one-sided at the grid faces).
inline std::vector<double> divergence(const VectorGrid& v) {
  const GridFrame& f = v.frame;
  std::vector<double> div(f.node_count(), 0.0);
  const double inv2h = 1.0 / (2.0 * f.spacing);
  const double invh = 1.0 / f.spacing;
  for (int k = 0; k < f.nz; ++k)
    for (int j = 0; j < f.ny; ++j)
      for (int i = 0; i < f.nx; ++i) {
        double d = 0.0;
        if (i > 0 && i < f.nx - 1)
          d += (v.at(i + 1, j, k).x - v.at(i - 1, j, k).x) * inv2h;
        else if (i == 0)
          d += (v.at(1, j, k).x - v.at(0, j, k).x) * invh;
        else
          d += (v.at(i, j, k).x - v.at(i - 1, j, k).x) * invh;
        if (j > 0 && j < f.ny - 1)
          d += (v.at(i, j + 1, k).y - v.at(i, j - 1, k).y) * inv2h;
        else if (j == 0)
          d += (v.at(i, 1, k).y - v.at(i, 0, k).y) * invh;
        else
          d += (v.at(i, j, k).y - v.at(i, j - 1, k).y) * invh;
        if (k > 0 && k < f.nz - 1)
          d += (v.at(i, j, k + 1).z - v.at(i, j, k - 1).z) * inv2h;
        else if (k == 0)
          d += (v.at(i, j, 1).z - v.at(i, j, 0).z) * invh;
        else
          d += (v.at(i, j, k).z - v.at(i, j, k - 1).z) * invh;
        div[f.index(i, j, k)] = d;
      }
  return div;
}

/// Node cell volumes for the finite-volume Neumann discretization: boundary
/// nodes own half cells per boundary axis. The volume-weighted 7-point
/// operator W*laplacian is symmetric, which both keeps CG valid and makes
/// the zero-flux boundary second-order accurate.
inline std::vector<double> cell_volumes(const GridFrame& f) {
  std::vector<double> w(f.node_count());
  auto axis_w = [](int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; };
  for (int k = 0; k < f.nz; ++k)
    for (int j = 0; j < f.ny; ++j)
      for (int i = 0; i < f.nx; ++i)
        w[f.index(i, j, k)] =
            axis_w(i, f.nx) * axis_w(j, f.ny) * axis_w(k, f.nz);
  return w;
}

/// out = W * laplacian(x): flux form with zero flux through the grid faces.
/// The transverse face weight of each flux equals the product of the cell
/// half-widths perpendicular to it.
inline void apply_weighted_laplacian(const GridFrame& f,
                                     const std::vector<double>& x,
                                     std::vector<double>& out) {
  const double invh2 = 1.0 / (f.spacing * f.spacing);
  auto axis_w = [](int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; };
  const std::size_t stride = static_cast<std::size_t>(f.nx) * f.ny;
  for (int k = 0; k < f.nz; ++k) {
    double wz = axis_w(k, f.nz);
    for (int j = 0; j < f.ny; ++j) {
      double wy = axis_w(j, f.ny);
      double wyz = wy * wz;
      for (int i = 0; i < f.nx; ++i) {
        double wx = axis_w(i, f.nx);
        std::size_t idx = f.index(i, j, k);
        double c = x[idx];
        double acc = 0.0;
        if (i > 0) acc += wyz * (x[idx - 1] - c);
        if (i < f.nx - 1) acc += wyz * (x[idx + 1] - c);
        if (j > 0) acc += wx * wz * (x[idx - f.nx] - c);
        if (j < f.ny - 1) acc += wx * wz * (x[idx + f.nx] - c);
        if (k > 0) acc += wx * wy * (x[idx - stride] - c);
        if (k < f.nz - 1) acc += wx * wy * (x[idx + stride] - c);
        out[idx] = acc * invh2;
      }
    }
  }
}

inline void subtract_mean(std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  for (double& v : x) v -= m;
}

/// Removes the volume-weighted mean (the null-space component of the
/// weighted operator).
inline void subtract_weighted_mean(std::vector<double>& x,
                                   const std::vector<double>& w, double wsum) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m += w[i] * x[i];
  m /= wsum;
  for (double& v : x) v -= m;
}

}  // namespace detail_poisson

/// Solves laplacian(chi) = div(V) to a 1e-6 relative residual. The Neumann
/// system is singular up to constants, so the right-hand side and iterates
/// are kept mean-free. When `samples` are given, chi is oriented (exterior
/// below) and shifted so its mean over the samples is 0.5.
inline ScalarGrid solve_poisson(const VectorGrid& v,
                                std::span<const Vec3> samples = {}) {
  using namespace detail_poisson;
  const GridFrame& f = v.frame;
  if (f.node_count() == 0) throw EmptyInputError("empty vector grid");

  const std::size_t n = f.node_count();
  std::vector<double> b = divergence(v);
  std::vector<double> w = cell_volumes(f);
  double wsum = 0.0;
  for (double val : w) wsum += val;

  // weighted system: B chi = W b with B = -W*laplacian (symmetric PSD,
  // null space = constants); project b onto the compatible range
  subtract_weighted_mean(b, w, wsum);
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = -w[i] * b[i];

  double bnorm = 0.0;
  for (double val : rhs) bnorm += val * val;
  bnorm = std::sqrt(bnorm);
  double div_norm = 0.0;
  for (double val : b) div_norm += val * val;
  div_norm = std::sqrt(div_norm);

  ScalarGrid chi;
  chi.frame = f;
  if (bnorm == 0.0) {
    chi.values.assign(n, 0.0);  // V = 0: harmonic with Neumann -> constant
  } else {
    std::vector<double> x(n, 0.0), r = rhs, z(n), p(n), Ap(n);

    // Jacobi preconditioner: diagonal of B
    std::vector<double> inv_diag(n);
    {
      const double invh2 = 1.0 / (f.spacing * f.spacing);
      auto axis_w = [](int i, int nn) {
        return (i == 0 || i == nn - 1) ? 0.5 : 1.0;
      };
      for (int k = 0; k < f.nz; ++k)
        for (int j = 0; j < f.ny; ++j)
          for (int i = 0; i < f.nx; ++i) {
            double wx = axis_w(i, f.nx), wy = axis_w(j, f.ny),
                   wz = axis_w(k, f.nz);
            double d = 0.0;
            if (i > 0) d += wy * wz;
            if (i < f.nx - 1) d += wy * wz;
            if (j > 0) d += wx * wz;
            if (j < f.ny - 1) d += wx * wz;
            if (k > 0) d += wx * wy;
            if (k < f.nz - 1) d += wx * wy;
            inv_diag[f.index(i, j, k)] = 1.0 / (d * invh2);
          }
    }

    // margin so the unweighted residual (cells as small as 1/8) still meets
    // the 1e-6 contract
    const double tol = 1.25e-7 * bnorm;
    const int max_iter = 10 * std::max({f.nx, f.ny, f.nz});
    double rz = 0.0;
    for (std::size_t idx = 0; idx < n; ++idx) {
      z[idx] = r[idx] * inv_diag[idx];
      rz += r[idx] * z[idx];
    }
    p = z;
    double rnorm = bnorm;
    for (int it = 0; it < max_iter && rnorm > tol; ++it) {
      apply_weighted_laplacian(f, p, Ap);
      for (std::size_t idx = 0; idx < n; ++idx) Ap[idx] = -Ap[idx];  // B = -WL
      double pAp = 0.0;
      for (std::size_t idx = 0; idx < n; ++idx) pAp += p[idx] * Ap[idx];
      if (!(pAp > 0.0)) break;
      double alpha = rz / pAp;
      for (std::size_t idx = 0; idx < n; ++idx) {
        x[idx] += alpha * p[idx];
        r[idx] -= alpha * Ap[idx];
      }
      subtract_weighted_mean(r, w, wsum);  // stay in range(B)
      double rz_new = 0.0;
      rnorm = 0.0;
      for (std::size_t idx = 0; idx < n; ++idx) {
        z[idx] = r[idx] * inv_diag[idx];
        rz_new += r[idx] * z[idx];
        rnorm += r[idx] * r[idx];
      }
      rnorm = std::sqrt(rnorm);
      double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t idx = 0; idx < n; ++idx) p[idx] = z[idx] + beta * p[idx];
    }
    // contract residual: || laplacian(chi) - div V || / || div V ||
    apply_weighted_laplacian(f, x, Ap);
    double res = 0.0;
    for (std::size_t idx = 0; idx < n; ++idx) {
      double t = Ap[idx] / w[idx] - b[idx];
      res += t * t;
    }
    res = std::sqrt(res) / (div_norm > 0.0 ? div_norm : 1.0);
    if (res > 1e-6) {
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "poisson solve did not converge: relative residual %.3e",
                    res);
      throw NumericalError(buf);
    }
    subtract_mean(x);
    chi.values = std::move(x);
  }

  if (!samples.empty()) {
    // orient: grid boundary (guaranteed exterior) must sit below the samples
    double sample_mean = 0.0;
    for (const Vec3& s : samples) {
      Vec3 local = (s - f.origin) / f.spacing;
      int i = std::clamp(static_cast<int>(std::lround(local.x)), 0, f.nx - 1);
      int j = std::clamp(static_cast<int>(std::lround(local.y)), 0, f.ny - 1);
      int k = std::clamp(static_cast<int>(std::lround(local.z)), 0, f.nz - 1);
      sample_mean += chi.at(i, j, k);
    }
    sample_mean /= static_cast<double>(samples.size());

    double boundary_mean = 0.0;
    std::size_t boundary_n = 0;
    for (int k = 0; k < f.nz; ++k)
      for (int j = 0; j < f.ny; ++j)
        for (int i = 0; i < f.nx; ++i) {
          if (i != 0 && i != f.nx - 1 && j != 0 && j != f.ny - 1 && k != 0 &&
              k != f.nz - 1)
            continue;
          boundary_mean += chi.at(i, j, k);
          ++boundary_n;
        }
    boundary_mean /= static_cast<double>(boundary_n);

    double sign = (boundary_mean <= sample_mean) ? 1.0 : -1.0;
    for (double& val : chi.values) val = sign * val + (0.5 - sign * sample_mean);
  }
  return chi;
}

struct PoissonReconstruction {
  TriangleMesh mesh;      // density-trimmed surface
  TriangleMesh untrimmed; // raw iso-contour (watertight for closed shapes)
  double iso = 0.5;
};

/// Full pipeline: splat -> solve -> extract at the iso value -> density trim
/// (triangles farther than trim_mult x mean NN distance from every input
/// point are dropped).
inline PoissonReconstruction reconstruct_poisson(const OrientedPointCloud& cloud,
                                                 int resolution_exponent,
                                                 double trim_mult = 3.0,
                                                 double iso = 0.5) {
  validate(cloud);
  if (resolution_exponent < 2 || resolution_exponent > 9)
    throw ParameterError("resolution exponent must be in [2, 9]");
  int dims = 1 << resolution_exponent;

  VectorGrid v = splat_normals(cloud, dims);
  ScalarGrid chi = solve_poisson(v, cloud.points);
  PoissonReconstruction out;
  out.iso = iso;
  out.untrimmed = extract_isosurface(chi, iso);

  double mean_nn = cloud.points.size() >= 2
                       ? mean_nearest_neighbor_distance(cloud.points)
                       : v.frame.spacing;
  double keep = std::max(trim_mult * mean_nn, 1.5 * v.frame.spacing);
  double keep2 = keep * keep;

  KdTree3 tree = build_kdtree(cloud.points);
  out.mesh.vertices = out.untrimmed.vertices;
  for (const auto& t : out.untrimmed.triangles) {
    bool near = false;
    for (int e = 0; e < 3 && !near; ++e) {
      const Vec3& p = out.untrimmed.vertices[t[e]];
      near = tree.nearest_dist2({p.x, p.y, p.z}) <= keep2;
    }
    if (near) out.mesh.triangles.push_back(t);
  }
  return out;
}

}  // namespace leafsurf
