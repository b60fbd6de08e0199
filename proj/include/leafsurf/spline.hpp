#pragma once

// Tensor-product spline surfaces: Cox-de Boor basis, chord-length
// parameterization, grid resampling, exact B-spline interpolation and
// least-squares B-spline / rational (NURBS) approximation.
//
// A rational surface with control net P_ij and positive weights w_ij is
//
//            sum_ij N_i(u) N_j(v) w_ij P_ij
//   S(u,v) = ------------------------------
//            sum_ij N_i(u) N_j(v) w_ij
//
// and reduces to the polynomial form when all weights are equal.

#include <Eigen/Dense>
#include <algorithm>
#include <span>
#include <vector>

#include "leafsurf/geo.hpp"
#include "leafsurf/kdtree.hpp"

namespace leafsurf {

// ---------------------------------------------------------------------------
// Knot vectors and basis functions

struct KnotVector {
  std::vector<double> knots;  // non-decreasing, clamped
  int degree = 3;

  int control_count() const {
    return static_cast<int>(knots.size()) - degree - 1;
  }
  double domain_min() const { return knots[degree]; }
  double domain_max() const { return knots[knots.size() - degree - 1]; }

  /// Index of the knot span containing u (clamped to the last real span).
  int find_span(double u) const {
    int n = control_count();
    if (u >= knots[n]) return n - 1;
    if (u <= knots[degree]) return degree;
    auto it = std::upper_bound(knots.begin() + degree, knots.begin() + n, u);
    return static_cast<int>(it - knots.begin()) - 1;
  }
};

inline void validate(const KnotVector& kv) {
  const int p = kv.degree;
  if (p < 1) throw ParameterError("spline degree must be >= 1");
  if (static_cast<int>(kv.knots.size()) < 2 * (p + 1))
    throw ParameterError("knot vector too short");
  for (std::size_t i = 1; i < kv.knots.size(); ++i)
    if (kv.knots[i] < kv.knots[i - 1])
      throw ParameterError("knot vector must be non-decreasing");
  for (int i = 1; i <= p; ++i) {
    if (kv.knots[i] != kv.knots[0] ||
        kv.knots[kv.knots.size() - 1 - i] != kv.knots.back())
      throw ParameterError("knot vector must be clamped");
  }
}

/// Cox-de Boor recursion for a single basis function N_{i,p}(u).
/// The zero-degree case is the half-open span indicator, except at the
/// domain end where the last function is taken to be 1 (standard clamp).
inline double bspline_basis(int i, int p, double u, const KnotVector& kv) {
  const auto& t = kv.knots;
  const int m = static_cast<int>(t.size()) - 1;
  if (i < 0 || i + p + 1 > m) throw ParameterError("basis index out of range");
  if (u < kv.domain_min() - 1e-12 || u > kv.domain_max() + 1e-12)
    throw DomainError("parameter outside knot domain");
  u = std::clamp(u, kv.domain_min(), kv.domain_max());

  if (p == 0) {
    if (t[i] <= u && u < t[i + 1]) return 1.0;
    // the whole-domain right end belongs to the last non-empty span
    if (u == kv.domain_max() && t[i] < u && u == t[i + 1]) return 1.0;
    return 0.0;
  }
  double left = 0.0, right = 0.0;
  if (t[i + p] > t[i])
    left = (u - t[i]) / (t[i + p] - t[i]) * bspline_basis(i, p - 1, u, kv);
  if (t[i + p + 1] > t[i + 1])
    right = (t[i + p + 1] - u) / (t[i + p + 1] - t[i + 1]) *
            bspline_basis(i + 1, p - 1, u, kv);
  return left + right;
}

namespace detail_spline {

/// Nonzero basis functions N_{span-p..span,p}(u) (The de Boor triangle).
inline void basis_funs(const KnotVector& kv, int span, double u,
                       std::span<double> out) {
  const int p = kv.degree;
  const auto& t = kv.knots;
  std::vector<double> left(p + 1), right(p + 1);
  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - t[span + 1 - j];
    right[j] = t[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double tmp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

/// Nonzero basis functions and their first derivatives at u.
inline void basis_funs_derivs(const KnotVector& kv, int span, double u,
                              std::span<double> val, std::span<double> der) {
  const int p = kv.degree;
  const auto& t = kv.knots;
  // triangle of all lower-degree rows
  std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
  std::vector<double> left(p + 1), right(p + 1);
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - t[span + 1 - j];
    right[j] = t[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      double tmp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    ndu[j][j] = saved;
  }
  for (int i = 0; i <= p; ++i) val[i] = ndu[i][p];
  for (int r = 0; r <= p; ++r) {
    double d = 0.0;
    if (r >= 1) d += ndu[r - 1][p - 1] / ndu[p][r - 1];
    if (r <= p - 1) d -= ndu[r][p - 1] / ndu[p][r];
    der[r] = d * p;
  }
}

}  // namespace detail_spline

/// Clamped knots for interpolation at the given parameters (knot averaging,
/// one control point per data point).
inline KnotVector interpolation_knots(std::span<const double> params, int degree) {
  const int m = static_cast<int>(params.size());
  if (m <= degree) throw ParameterError("need more parameters than the degree");
  KnotVector kv;
  kv.degree = degree;
  kv.knots.assign(degree + 1, params.front());
  for (int j = 1; j <= m - degree - 1; ++j) {
    double s = 0.0;
    for (int i = j; i < j + degree; ++i) s += params[i];
    kv.knots.push_back(s / degree);
  }
  kv.knots.insert(kv.knots.end(), degree + 1, params.back());
  return kv;
}

/// Clamped knots for least-squares approximation with n control points
/// (interior knots placed from the data parameter distribution).
inline KnotVector approximation_knots(std::span<const double> params, int degree,
                                      int n_ctrl) {
  const int m = static_cast<int>(params.size());
  if (n_ctrl <= degree) throw ParameterError("control count must exceed degree");
  if (n_ctrl > m) throw ParameterError("control count must not exceed sample count");
  KnotVector kv;
  kv.degree = degree;
  kv.knots.assign(degree + 1, params.front());
  double d = static_cast<double>(m) / static_cast<double>(n_ctrl - degree);
  for (int j = 1; j <= n_ctrl - degree - 1; ++j) {
    int i = static_cast<int>(j * d);
    double a = j * d - i;
    kv.knots.push_back((1.0 - a) * params[i - 1] + a * params[i]);
  }
  kv.knots.insert(kv.knots.end(), degree + 1, params.back());
  return kv;
}

/// Chord-length parameters in [0,1]: increments proportional to consecutive
/// point distances.
inline std::vector<double> chord_length_parameterize(std::span<const Vec3> pts) {
  if (pts.size() < 2)
    throw ParameterError("chord-length parameterization needs >= 2 points");
  std::vector<double> t(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    t[i] = t[i - 1] + dist(pts[i - 1], pts[i]);
  double total = t.back();
  if (total <= 0.0)
    throw DegenerateGeometryError("all points coincide");
  for (double& v : t) v /= total;
  t.back() = 1.0;
  return t;
}

// ---------------------------------------------------------------------------
// Grid samples

/// Complete nu x nv grid of 3D samples with strictly increasing parameter
/// values in [0,1] per direction. Row-major: point(i,j) = pts[i*nv + j],
/// i indexing u and j indexing v.
struct GridSamples {
  int nu = 0, nv = 0;
  std::vector<Vec3> pts;
  std::vector<double> u_params, v_params;

  const Vec3& at(int i, int j) const { return pts[i * nv + j]; }
  Vec3& at(int i, int j) { return pts[i * nv + j]; }
};

inline void validate(const GridSamples& g) {
  if (g.nu < 2 || g.nv < 2) throw ParameterError("grid must be at least 2x2");
  if (static_cast<int>(g.pts.size()) != g.nu * g.nv)
    throw ParameterError("incomplete grid");
  if (static_cast<int>(g.u_params.size()) != g.nu ||
      static_cast<int>(g.v_params.size()) != g.nv)
    throw ParameterError("parameter count mismatch");
  auto check = [](const std::vector<double>& t) {
    if (t.front() < 0.0 || t.back() > 1.0)
      throw ParameterError("parameters must lie in [0,1]");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (t[i] <= t[i - 1]) throw ParameterError("parameters must increase");
  };
  check(g.u_params);
  check(g.v_params);
  for (const Vec3& p : g.pts)
    if (!p.finite()) throw ParameterError("non-finite grid sample");
}

/// Resamples an aligned cloud onto a regular nu x nv grid over its uv
/// bounding box. Each node takes the inverse-square-distance weighted mean
/// height of nearby points; nodes with no points in reach copy the nearest
/// filled node. Parameters come from chord lengths averaged across rows and
/// columns.
inline GridSamples resample_to_grid(const PointCloud& aligned, int nu, int nv) {
  validate(aligned);
  if (nu < 2 || nv < 2) throw ParameterError("grid dims must be >= 2");

  double xmin = aligned.points[0].x, xmax = xmin;
  double ymin = aligned.points[0].y, ymax = ymin;
  for (const Vec3& p : aligned.points) {
    xmin = std::min(xmin, p.x); xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y); ymax = std::max(ymax, p.y);
  }
  if (xmax - xmin <= 0.0 || ymax - ymin <= 0.0)
    throw DegenerateGeometryError("cloud has zero uv extent");

  const double du = (xmax - xmin) / (nu - 1);
  const double dv = (ymax - ymin) / (nv - 1);
  const double scale = std::max(xmax - xmin, ymax - ymin);

  // bin points by nearest node
  std::vector<std::vector<int>> bins(static_cast<std::size_t>(nu) * nv);
  for (std::size_t k = 0; k < aligned.points.size(); ++k) {
    const Vec3& p = aligned.points[k];
    int i = std::clamp(static_cast<int>(std::lround((p.x - xmin) / du)), 0, nu - 1);
    int j = std::clamp(static_cast<int>(std::lround((p.y - ymin) / dv)), 0, nv - 1);
    bins[static_cast<std::size_t>(i) * nv + j].push_back(static_cast<int>(k));
  }

  GridSamples g;
  g.nu = nu;
  g.nv = nv;
  g.pts.resize(static_cast<std::size_t>(nu) * nv);

  const double radius = std::max(du, dv);
  const double r2 = radius * radius;
  std::vector<char> filled(g.pts.size(), 0);

  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const double ux = xmin + i * du;
      const double vy = ymin + j * dv;
      // distance-weighted local height estimate: weighted plane through the
      // neighborhood evaluated at the node (first-order correction keeps
      // one-sided boundary nodes unbiased), plain weighted mean as fallback
      double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
      double sz = 0, sxz = 0, syz = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      double best_h = 0.0;
      for (int bi = std::max(0, i - 1); bi <= std::min(nu - 1, i + 1); ++bi) {
        for (int bj = std::max(0, j - 1); bj <= std::min(nv - 1, j + 1); ++bj) {
          for (int k : bins[static_cast<std::size_t>(bi) * nv + bj]) {
            const Vec3& p = aligned.points[k];
            double dx = p.x - ux, dy = p.y - vy;
            double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
              best_d2 = d2;
              best_h = p.z;
            }
            if (d2 <= r2) {
              double w = 1.0 / (d2 + 1e-12 * r2);
              sw += w;
              sx += w * dx; sy += w * dy;
              sxx += w * dx * dx; sxy += w * dx * dy; syy += w * dy * dy;
              sz += w * p.z; sxz += w * dx * p.z; syz += w * dy * p.z;
            }
          }
        }
      }
      std::size_t idx = static_cast<std::size_t>(i) * nv + j;
      if (best_d2 < 1e-18 * scale * scale) {
        g.pts[idx] = {ux, vy, best_h};  // node coincides with a sample
        filled[idx] = 1;
      } else if (sw > 0.0) {
        double h = sz / sw;
        Eigen::Matrix3d M;
        M << sw, sx, sy, sx, sxx, sxy, sy, sxy, syy;
        Eigen::Vector3d rhs(sz, sxz, syz);
        Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
        lu.setThreshold(1e-7);
        if (lu.rank() == 3) {
          Eigen::Vector3d coef = lu.solve(rhs);
          if (std::isfinite(coef(0))) h = coef(0);  // plane value at the node
        }
        g.pts[idx] = {ux, vy, h};
        filled[idx] = 1;
      } else {
        g.pts[idx] = {ux, vy, 0.0};
      }
    }
  }

  // flood-fill empty nodes from the nearest filled node (BFS rings)
  std::vector<std::size_t> queue;
  for (std::size_t idx = 0; idx < filled.size(); ++idx)
    if (filled[idx]) queue.push_back(idx);
  if (queue.empty()) throw DegenerateGeometryError("no grid node received data");
  std::size_t head = 0;
  std::vector<char> visited = filled;
  while (head < queue.size()) {
    std::size_t idx = queue[head++];
    int i = static_cast<int>(idx) / nv, j = static_cast<int>(idx) % nv;
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      int ni = i + di[d], nj = j + dj[d];
      if (ni < 0 || ni >= nu || nj < 0 || nj >= nv) continue;
      std::size_t nidx = static_cast<std::size_t>(ni) * nv + nj;
      if (visited[nidx]) continue;
      visited[nidx] = 1;
      g.pts[nidx].z = g.pts[idx].z;
      queue.push_back(nidx);
    }
  }

  // parameters: chord lengths averaged across rows / columns
  g.u_params.assign(nu, 0.0);
  g.v_params.assign(nv, 0.0);
  {
    std::vector<Vec3> line(nu);
    for (int j = 0; j < nv; ++j) {
      for (int i = 0; i < nu; ++i) line[i] = g.at(i, j);
      auto t = chord_length_parameterize(line);
      for (int i = 0; i < nu; ++i) g.u_params[i] += t[i] / nv;
    }
    line.resize(nv);
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) line[j] = g.at(i, j);
      auto t = chord_length_parameterize(line);
      for (int j = 0; j < nv; ++j) g.v_params[j] += t[j] / nu;
    }
  }
  g.u_params.front() = 0.0;
  g.u_params.back() = 1.0;
  g.v_params.front() = 0.0;
  g.v_params.back() = 1.0;
  validate(g);
  return g;
}

// ---------------------------------------------------------------------------
// Parametric surfaces

struct ParametricSurface {
  int nu = 0, nv = 0;  // control net dimensions
  std::vector<Vec3> control;   // row-major, control(i,j) = control[i*nv+j]
  std::vector<double> weights; // matching grid, all > 0
  KnotVector knots_u, knots_v;

  const Vec3& ctrl(int i, int j) const { return control[i * nv + j]; }
  double weight(int i, int j) const { return weights[i * nv + j]; }
};

inline void validate(const ParametricSurface& s) {
  if (s.nu != s.knots_u.control_count() || s.nv != s.knots_v.control_count())
    throw ParameterError("control net inconsistent with knot vectors");
  if (static_cast<int>(s.control.size()) != s.nu * s.nv ||
      s.weights.size() != s.control.size())
    throw ParameterError("control net size mismatch");
  for (double w : s.weights)
    if (!(w > 0.0)) throw ParameterError("weights must be strictly positive");
  validate(s.knots_u);
  validate(s.knots_v);
}

inline Vec3 evaluate_surface(const ParametricSurface& s, double u, double v) {
  const int p = s.knots_u.degree, q = s.knots_v.degree;
  if (u < s.knots_u.domain_min() - 1e-12 || u > s.knots_u.domain_max() + 1e-12 ||
      v < s.knots_v.domain_min() - 1e-12 || v > s.knots_v.domain_max() + 1e-12)
    throw DomainError("surface parameter outside knot domain");
  u = std::clamp(u, s.knots_u.domain_min(), s.knots_u.domain_max());
  v = std::clamp(v, s.knots_v.domain_min(), s.knots_v.domain_max());

  int su = s.knots_u.find_span(u), sv = s.knots_v.find_span(v);
  std::vector<double> Nu(p + 1), Nv(q + 1);
  detail_spline::basis_funs(s.knots_u, su, u, Nu);
  detail_spline::basis_funs(s.knots_v, sv, v, Nv);

  Vec3 num{0, 0, 0};
  double den = 0.0;
  for (int a = 0; a <= p; ++a) {
    int i = su - p + a;
    for (int b = 0; b <= q; ++b) {
      int j = sv - q + b;
      double w = Nu[a] * Nv[b] * s.weight(i, j);
      num += w * s.ctrl(i, j);
      den += w;
    }
  }
  if (!(den > 0.0)) throw NumericalError("rational denominator not positive");
  return num / den;
}

/// First partial derivatives of the (rational) surface.
inline std::pair<Vec3, Vec3> surface_partials(const ParametricSurface& s,
                                              double u, double v) {
  const int p = s.knots_u.degree, q = s.knots_v.degree;
  u = std::clamp(u, s.knots_u.domain_min(), s.knots_u.domain_max());
  v = std::clamp(v, s.knots_v.domain_min(), s.knots_v.domain_max());
  int su = s.knots_u.find_span(u), sv = s.knots_v.find_span(v);
  std::vector<double> Nu(p + 1), Du(p + 1), Nv(q + 1), Dv(q + 1);
  detail_spline::basis_funs_derivs(s.knots_u, su, u, Nu, Du);
  detail_spline::basis_funs_derivs(s.knots_v, sv, v, Nv, Dv);

  Vec3 A{0, 0, 0}, Au{0, 0, 0}, Av{0, 0, 0};
  double W = 0.0, Wu = 0.0, Wv = 0.0;
  for (int a = 0; a <= p; ++a) {
    int i = su - p + a;
    for (int b = 0; b <= q; ++b) {
      int j = sv - q + b;
      double wij = s.weight(i, j);
      const Vec3& P = s.ctrl(i, j);
      double nb = Nu[a] * Nv[b] * wij;
      double db_u = Du[a] * Nv[b] * wij;
      double db_v = Nu[a] * Dv[b] * wij;
      A += nb * P;
      Au += db_u * P;
      Av += db_v * P;
      W += nb;
      Wu += db_u;
      Wv += db_v;
    }
  }
  Vec3 S = A / W;
  Vec3 Su = (Au - Wu * S) / W;
  Vec3 Sv = (Av - Wv * S) / W;
  return {Su, Sv};
}

// ---------------------------------------------------------------------------
// Fitting

namespace detail_spline {

inline Eigen::MatrixXd collocation_matrix(const KnotVector& kv,
                                          std::span<const double> params,
                                          int n_ctrl) {
  const int p = kv.degree;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(params.size(), n_ctrl);
  std::vector<double> N(p + 1);
  for (std::size_t r = 0; r < params.size(); ++r) {
    int span = kv.find_span(params[r]);
    basis_funs(kv, span, params[r], N);
    for (int a = 0; a <= p; ++a) A(r, span - p + a) = N[a];
  }
  return A;
}

inline void check_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& B, const char* what) {
  double scale = B.norm();
  double res = (A * X - B).norm();
  if (!std::isfinite(res) || res > 1e-6 * (scale + 1.0))
    throw NumericalError(std::string(what) + ": singular or ill-conditioned system");
}

}  // namespace detail_spline

/// Interpolating tensor-product B-spline: the surface passes through every
/// grid sample. Solves one banded collocation system per direction (columns
/// along u, then rows along v) instead of a dense Kronecker system.
inline ParametricSurface fit_bspline_interp(const GridSamples& grid, int p = 3,
                                            int q = 3) {
  validate(grid);
  if (grid.nu <= p || grid.nv <= q)
    throw ParameterError("grid dims must exceed degrees");

  ParametricSurface s;
  s.nu = grid.nu;
  s.nv = grid.nv;
  s.knots_u = interpolation_knots(grid.u_params, p);
  s.knots_v = interpolation_knots(grid.v_params, q);

  Eigen::MatrixXd Au =
      detail_spline::collocation_matrix(s.knots_u, grid.u_params, grid.nu);
  Eigen::MatrixXd Av =
      detail_spline::collocation_matrix(s.knots_v, grid.v_params, grid.nv);

  // stage 1: interpolate down each column of the grid (u direction)
  Eigen::MatrixXd Dx(grid.nu, grid.nv), Dy(grid.nu, grid.nv), Dz(grid.nu, grid.nv);
  for (int i = 0; i < grid.nu; ++i)
    for (int j = 0; j < grid.nv; ++j) {
      Dx(i, j) = grid.at(i, j).x;
      Dy(i, j) = grid.at(i, j).y;
      Dz(i, j) = grid.at(i, j).z;
    }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_u(Au);
  Eigen::MatrixXd Rx = lu_u.solve(Dx), Ry = lu_u.solve(Dy), Rz = lu_u.solve(Dz);
  detail_spline::check_residual(Au, Rx, Dx, "fit_bspline_interp(u)");

  // stage 2: interpolate across each row of the intermediate net (v direction)
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_v(Av);
  Eigen::MatrixXd Cx = lu_v.solve(Rx.transpose()).transpose();
  Eigen::MatrixXd Cy = lu_v.solve(Ry.transpose()).transpose();
  Eigen::MatrixXd Cz = lu_v.solve(Rz.transpose()).transpose();
  detail_spline::check_residual(Av, Cx.transpose().eval(), Rx.transpose().eval(),
                                "fit_bspline_interp(v)");

  s.control.resize(static_cast<std::size_t>(grid.nu) * grid.nv);
  s.weights.assign(s.control.size(), 1.0);
  for (int i = 0; i < grid.nu; ++i)
    for (int j = 0; j < grid.nv; ++j)
      s.control[i * grid.nv + j] = {Cx(i, j), Cy(i, j), Cz(i, j)};
  validate(s);
  return s;
}

/// Polynomial B-spline least-squares fit with an (cu x cv) control net.
inline ParametricSurface fit_bspline_lsq(const GridSamples& grid, int p, int q,
                                         int cu, int cv) {
  validate(grid);
  if (cu <= p || cv <= q) throw ParameterError("control dims must exceed degrees");
  if (cu > grid.nu || cv > grid.nv)
    throw ParameterError("control dims must not exceed grid dims");

  ParametricSurface s;
  s.nu = cu;
  s.nv = cv;
  s.knots_u = approximation_knots(grid.u_params, p, cu);
  s.knots_v = approximation_knots(grid.v_params, q, cv);

  Eigen::MatrixXd Bu =
      detail_spline::collocation_matrix(s.knots_u, grid.u_params, cu);
  Eigen::MatrixXd Bv =
      detail_spline::collocation_matrix(s.knots_v, grid.v_params, cv);

  Eigen::MatrixXd Dx(grid.nu, grid.nv), Dy(grid.nu, grid.nv), Dz(grid.nu, grid.nv);
  for (int i = 0; i < grid.nu; ++i)
    for (int j = 0; j < grid.nv; ++j) {
      Dx(i, j) = grid.at(i, j).x;
      Dy(i, j) = grid.at(i, j).y;
      Dz(i, j) = grid.at(i, j).z;
    }

  // separable normal equations: first along u, then along v
  Eigen::MatrixXd NuTNu = Bu.transpose() * Bu;
  Eigen::MatrixXd NvTNv = Bv.transpose() * Bv;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_u(NuTNu);
  Eigen::LDLT<Eigen::MatrixXd> ldlt_v(NvTNv);
  if (ldlt_u.info() != Eigen::Success || ldlt_v.info() != Eigen::Success)
    throw NumericalError("fit_bspline_lsq: rank-deficient normal equations");

  auto solve_both = [&](const Eigen::MatrixXd& D) {
    Eigen::MatrixXd Rhs = Bu.transpose() * D;
    Eigen::MatrixXd R = ldlt_u.solve(Rhs);  // cu x nv
    detail_spline::check_residual(NuTNu, R, Rhs, "fit_bspline_lsq");
    Eigen::MatrixXd C = ldlt_v.solve(Bv.transpose() * R.transpose()).transpose();
    return C;  // cu x cv
  };
  Eigen::MatrixXd Cx = solve_both(Dx), Cy = solve_both(Dy), Cz = solve_both(Dz);

  s.control.resize(static_cast<std::size_t>(cu) * cv);
  s.weights.assign(s.control.size(), 1.0);
  for (int i = 0; i < cu; ++i)
    for (int j = 0; j < cv; ++j)
      s.control[i * cv + j] = {Cx(i, j), Cy(i, j), Cz(i, j)};
  validate(s);
  return s;
}

/// Rational least-squares approximation with fixed positive weights.
/// With all weights equal the rational basis collapses to the polynomial
/// one and the result matches fit_bspline_lsq.
inline ParametricSurface fit_nurbs_approx(const GridSamples& grid, int p, int q,
                                          int cu, int cv,
                                          const std::vector<double>& weights) {
  validate(grid);
  if (cu <= p || cv <= q) throw ParameterError("control dims must exceed degrees");
  if (cu > grid.nu || cv > grid.nv)
    throw ParameterError("control dims must not exceed grid dims");
  if (static_cast<int>(weights.size()) != cu * cv)
    throw ParameterError("weight grid must match control dims");
  for (double w : weights)
    if (!(w > 0.0)) throw ParameterError("weights must be strictly positive");

  ParametricSurface s;
  s.nu = cu;
  s.nv = cv;
  s.weights = weights;
  s.knots_u = approximation_knots(grid.u_params, p, cu);
  s.knots_v = approximation_knots(grid.v_params, q, cv);

  // rational basis row per sample: R_ij = N_i N_j w_ij / sum N N w
  const int n_unknown = cu * cv;
  const int n_rows = grid.nu * grid.nv;
  Eigen::MatrixXd AtA = Eigen::MatrixXd::Zero(n_unknown, n_unknown);
  Eigen::MatrixXd AtB = Eigen::MatrixXd::Zero(n_unknown, 3);

  std::vector<double> Nu(p + 1), Nv(q + 1);
  std::vector<int> cols((p + 1) * (q + 1));
  std::vector<double> vals((p + 1) * (q + 1));

  for (int r = 0; r < n_rows; ++r) {
    int gi = r / grid.nv, gj = r % grid.nv;
    double u = grid.u_params[gi], v = grid.v_params[gj];
    int su = s.knots_u.find_span(u), sv = s.knots_v.find_span(v);
    detail_spline::basis_funs(s.knots_u, su, u, Nu);
    detail_spline::basis_funs(s.knots_v, sv, v, Nv);

    int nnz = 0;
    double den = 0.0;
    for (int a = 0; a <= p; ++a) {
      int i = su - p + a;
      for (int b = 0; b <= q; ++b) {
        int j = sv - q + b;
        double w = Nu[a] * Nv[b] * weights[i * cv + j];
        cols[nnz] = i * cv + j;
        vals[nnz] = w;
        den += w;
        ++nnz;
      }
    }
    if (!(den > 0.0)) throw NumericalError("rational denominator vanished");
    const Vec3& d = grid.at(gi, gj);
    for (int a = 0; a < nnz; ++a) {
      double ra = vals[a] / den;
      for (int b = 0; b < nnz; ++b) AtA(cols[a], cols[b]) += ra * (vals[b] / den);
      AtB(cols[a], 0) += ra * d.x;
      AtB(cols[a], 1) += ra * d.y;
      AtB(cols[a], 2) += ra * d.z;
    }
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(AtA);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("fit_nurbs_approx: rank-deficient normal equations");
  Eigen::MatrixXd C = ldlt.solve(AtB);
  if (!((AtA * C - AtB).norm() <= 1e-6 * (AtB.norm() + 1.0)))
    throw NumericalError("fit_nurbs_approx: rank-deficient normal equations");

  s.control.resize(n_unknown);
  for (int k = 0; k < n_unknown; ++k) s.control[k] = {C(k, 0), C(k, 1), C(k, 2)};
  validate(s);
  return s;
}

}  // namespace leafsurf
