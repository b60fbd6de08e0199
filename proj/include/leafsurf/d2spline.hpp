#pragma once

// Penalized scattered-data surface fitting ("discrete smoothing spline"):
// minimize  sum_i (w_i - f(u_i,v_i))^2 + alpha * J(f)
// where J is the bending energy built from the three second-derivative
// terms. The fit uses a thin-plate radial basis phi(r) = r^2 log r with an
// affine part; J then reduces to the quadratic form lambda' K lambda on the
// side-condition subspace C' lambda = 0, and the minimizer solves a
// symmetric KKT system that is positive definite on that subspace.
//
// The smoothing parameter is either given or selected by generalized
// cross-validation,
//   GCV(a) = (|| (I - H_a) w ||^2 / M) / (tr(I - H_a) / M)^2 ,
// with the influence-matrix trace computed exactly through the factored
// system (or by seeded Hutchinson probing for very large center sets).

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <span>
#include <unordered_map>
#include <vector>

#include "leafsurf/geo.hpp"
#include "leafsurf/trim.hpp"

namespace leafsurf {

struct D2Options {
  int max_centers = 1500;       // subsample centers above this site count
  unsigned trace_seed = 1234;   // Hutchinson probe seed (large problems)
  int trace_probes = 32;
  int exact_trace_limit = 2000; // centers above this use the estimator
};

/// Explicit height surface w = f(u,v) over a rectangular uv domain.
struct HeightField {
  Vec2 rect_min, rect_max;
  std::vector<Vec2> centers;       // normalized coordinates
  std::vector<double> rbf_coef;    // one per center
  std::array<double, 3> affine{};  // 1, u, v (normalized)

  double evaluate(double u, double v) const {
    double un = (u - rect_min.x) / (rect_max.x - rect_min.x);
    double vn = (v - rect_min.y) / (rect_max.y - rect_min.y);
    double f = affine[0] + affine[1] * un + affine[2] * vn;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      double dx = un - centers[i].x, dy = vn - centers[i].y;
      double r2 = dx * dx + dy * dy;
      if (r2 > 0.0) f += rbf_coef[i] * 0.5 * r2 * std::log(r2);
    }
    return f;
  }
};

struct SmoothingSelection {
  double alpha = 1.0;
  std::vector<std::pair<double, double>> gcv_scores;
};

struct D2FitResult {
  HeightField field;
  double misfit = 0.0;   // sum of squared residuals
  double bending = 0.0;  // lambda' K lambda
  std::vector<double> fitted;
};

namespace detail_d2s {

inline double tps_kernel(double r2) {
  return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0;  // r^2 log r
}

struct Problem {
  std::vector<Vec2> uv;      // normalized sites
  std::vector<double> w;     // heights
  std::vector<Vec2> centers; // normalized, deduplicated
  Vec2 lo, hi;

  Eigen::MatrixXd K;    // q x q kernel matrix between centers
  Eigen::MatrixXd G;    // (q+3) x (q+3) Gram matrix [A P]'[A P]
  Eigen::VectorXd Utw;  // (q+3) [A P]' w
  double w_scale2 = 0.0;

  int q() const { return static_cast<int>(centers.size()); }
  int M() const { return static_cast<int>(uv.size()); }

  // basis row [phi(|x-c_1|) ... phi(|x-c_q|), 1, u, v]
  void basis_row(Vec2 x, Eigen::RowVectorXd& row) const {
    const int n = q();
    for (int i = 0; i < n; ++i) {
      double dx = x.x - centers[i].x, dy = x.y - centers[i].y;
      row(i) = tps_kernel(dx * dx + dy * dy);
    }
    row(n) = 1.0;
    row(n + 1) = x.x;
    row(n + 2) = x.y;
  }
};

inline Problem build_problem(std::span<const Vec2> uv_world,
                             std::span<const double> heights,
                             const D2Options& opt) {
  const int M = static_cast<int>(uv_world.size());
  if (M < 4) throw ParameterError("d2 spline needs at least 4 sites");

  Problem pb;
  pb.lo = uv_world[0];
  pb.hi = uv_world[0];
  for (Vec2 p : uv_world) {
    pb.lo.x = std::min(pb.lo.x, p.x); pb.lo.y = std::min(pb.lo.y, p.y);
    pb.hi.x = std::max(pb.hi.x, p.x); pb.hi.y = std::max(pb.hi.y, p.y);
  }
  if (pb.hi.x - pb.lo.x <= 0.0 || pb.hi.y - pb.lo.y <= 0.0)
    throw DegenerateGeometryError("uv sites are collinear (degenerate extent)");

  pb.uv.resize(M);
  for (int i = 0; i < M; ++i)
    pb.uv[i] = {(uv_world[i].x - pb.lo.x) / (pb.hi.x - pb.lo.x),
                (uv_world[i].y - pb.lo.y) / (pb.hi.y - pb.lo.y)};
  pb.w.assign(heights.begin(), heights.end());

  // collinearity check on normalized uv
  {
    Vec2 mean{0, 0};
    for (Vec2 p : pb.uv) mean += p;
    mean = mean / M;
    double sxx = 0, sxy = 0, syy = 0;
    for (Vec2 p : pb.uv) {
      double dx = p.x - mean.x, dy = p.y - mean.y;
      sxx += dx * dx; sxy += dx * dy; syy += dy * dy;
    }
    double tr = sxx + syy;
    double det = sxx * syy - sxy * sxy;
    double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    double lmin = tr / 2 - disc, lmax = tr / 2 + disc;
    if (lmax <= 0.0 || lmin <= 1e-12 * lmax)
      throw DegenerateGeometryError("uv sites are collinear");
  }

  // centers: all distinct sites, or a deterministic spatial subsample
  std::unordered_map<std::uint64_t, char> seen;
  auto key_of = [](Vec2 p) {
    auto qx = static_cast<std::uint64_t>(
        std::llround(p.x * (1 << 24)));
    auto qy = static_cast<std::uint64_t>(
        std::llround(p.y * (1 << 24)));
    return (qx << 32) ^ qy;
  };
  std::vector<int> candidates;
  candidates.reserve(M);
  for (int i = 0; i < M; ++i) {
    auto key = key_of(pb.uv[i]);
    if (seen.emplace(key, 1).second) candidates.push_back(i);
  }
  if (static_cast<int>(candidates.size()) > opt.max_centers) {
    std::vector<int> picked;
    picked.reserve(opt.max_centers);
    double stride = static_cast<double>(candidates.size()) / opt.max_centers;
    for (int k = 0; k < opt.max_centers; ++k)
      picked.push_back(candidates[static_cast<std::size_t>(k * stride)]);
    candidates = std::move(picked);
  }
  pb.centers.reserve(candidates.size());
  for (int i : candidates) pb.centers.push_back(pb.uv[i]);

  const int q = pb.q();
  pb.K.resize(q, q);
  for (int i = 0; i < q; ++i) {
    pb.K(i, i) = 0.0;
    for (int j = i + 1; j < q; ++j) {
      double dx = pb.centers[i].x - pb.centers[j].x;
      double dy = pb.centers[i].y - pb.centers[j].y;
      double v = tps_kernel(dx * dx + dy * dy);
      pb.K(i, j) = v;
      pb.K(j, i) = v;
    }
  }

  // accumulate G = U'U and U'w in row blocks to avoid materializing U
  const int nb = q + 3;
  pb.G = Eigen::MatrixXd::Zero(nb, nb);
  pb.Utw = Eigen::VectorXd::Zero(nb);
  const int chunk = 256;
  Eigen::MatrixXd rows(chunk, nb);
  Eigen::RowVectorXd row(nb);
  for (int start = 0; start < M; start += chunk) {
    int len = std::min(chunk, M - start);
    for (int r = 0; r < len; ++r) {
      pb.basis_row(pb.uv[start + r], row);
      rows.row(r) = row;
    }
    auto block = rows.topRows(len);
    pb.G.noalias() += block.transpose() * block;
    Eigen::Map<const Eigen::VectorXd> wv(pb.w.data() + start, len);
    pb.Utw.noalias() += block.transpose() * wv;
  }

  double mean_w = 0.0;
  for (double v : pb.w) mean_w += v;
  mean_w /= M;
  for (double v : pb.w) pb.w_scale2 += (v - mean_w) * (v - mean_w);
  pb.w_scale2 = pb.w_scale2 / M + mean_w * mean_w;
  return pb;
}

struct Factored {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  int q = 0;

  // KKT: [ G + alpha*diag(K,0) ,  C ; C' , 0 ]  with C = [1 uc vc] on centers
  static Factored make(const Problem& pb, double alpha) {
    const int q = pb.q();
    const int n = q + 3 + 3;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    S.topLeftCorner(q + 3, q + 3) = pb.G;
    S.topLeftCorner(q, q) += alpha * pb.K;
    for (int i = 0; i < q; ++i) {
      S(i, q + 3) = S(q + 3, i) = 1.0;
      S(i, q + 4) = S(q + 4, i) = pb.centers[i].x;
      S(i, q + 5) = S(q + 5, i) = pb.centers[i].y;
    }
    Factored f;
    f.q = q;
    f.lu.compute(S);
    return f;
  }

  Eigen::VectorXd solve_coefficients(const Problem& pb) const {
    const int n = q + 6;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs.head(q + 3) = pb.Utw;
    Eigen::VectorXd x = lu.solve(rhs);
    if (!x.allFinite())
      throw NumericalError("d2 spline system is singular");
    return x.head(q + 3);
  }

  // tr(H) = tr(B G) where B is the leading block of S^-1
  double trace_H_exact(const Problem& pb) const {
    const int n = q + 6;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, q + 3);
    rhs.topRows(q + 3) = pb.G;
    Eigen::MatrixXd X = lu.solve(rhs);
    return X.topRows(q + 3).trace();
  }
};

inline double eval_coef(const Problem& pb, const Eigen::VectorXd& coef, Vec2 x) {
  const int q = pb.q();
  double f = coef(q) + coef(q + 1) * x.x + coef(q + 2) * x.y;
  for (int i = 0; i < q; ++i) {
    double dx = x.x - pb.centers[i].x, dy = x.y - pb.centers[i].y;
    f += coef(i) * tps_kernel(dx * dx + dy * dy);
  }
  return f;
}

inline D2FitResult finish_fit(const Problem& pb, const Eigen::VectorXd& coef) {
  D2FitResult out;
  out.field.rect_min = pb.lo;
  out.field.rect_max = pb.hi;
  out.field.centers = pb.centers;
  out.field.rbf_coef.assign(coef.data(), coef.data() + pb.q());
  out.field.affine = {coef(pb.q()), coef(pb.q() + 1), coef(pb.q() + 2)};

  out.fitted.resize(pb.M());
  for (int i = 0; i < pb.M(); ++i)
    out.fitted[i] = eval_coef(pb, coef, pb.uv[i]);
  for (int i = 0; i < pb.M(); ++i) {
    double r = pb.w[i] - out.fitted[i];
    out.misfit += r * r;
  }
  Eigen::Map<const Eigen::VectorXd> lambda(coef.data(), pb.q());
  out.bending = lambda.dot(pb.K * lambda);
  return out;
}

}  // namespace detail_d2s

/// Fit at explicitly given uv sites and heights (the cloud-based overload
/// below uses the aligned cloud's xy as uv and z as height).
inline D2FitResult fit_d2_spline_scattered(std::span<const Vec2> uv,
                                           std::span<const double> heights,
                                           double alpha,
                                           const D2Options& opt = {}) {
  if (alpha <= 0.0) throw ParameterError("alpha must be > 0");
  if (uv.size() != heights.size())
    throw ParameterError("uv/height count mismatch");
  auto pb = detail_d2s::build_problem(uv, heights, opt);
  auto fac = detail_d2s::Factored::make(pb, alpha);
  return detail_d2s::finish_fit(pb, fac.solve_coefficients(pb));
}

inline HeightField fit_d2_spline(const PointCloud& aligned, double alpha,
                                 const D2Options& opt = {}) {
  validate(aligned);
  std::vector<Vec2> uv(aligned.points.size());
  std::vector<double> w(aligned.points.size());
  for (std::size_t i = 0; i < aligned.points.size(); ++i) {
    uv[i] = aligned.points[i].xy();
    w[i] = aligned.points[i].z;
  }
  return fit_d2_spline_scattered(uv, w, alpha, opt).field;
}

/// GCV selection over an alpha grid. Interpolating-grade residuals score 0
/// so the smallest such alpha wins; alphas with tr(I - H) ~ 0 are skipped.
inline SmoothingSelection gcv_select_alpha(const PointCloud& aligned,
                                           std::span<const double> alpha_grid,
                                           const D2Options& opt = {}) {
  validate(aligned);
  if (alpha_grid.empty()) throw ParameterError("alpha grid is empty");
  for (double a : alpha_grid)
    if (!(a > 0.0)) throw ParameterError("alpha grid must be positive");

  std::vector<Vec2> uv(aligned.points.size());
  std::vector<double> w(aligned.points.size());
  for (std::size_t i = 0; i < aligned.points.size(); ++i) {
    uv[i] = aligned.points[i].xy();
    w[i] = aligned.points[i].z;
  }
  auto pb = detail_d2s::build_problem(uv, w, opt);
  const int M = pb.M();

  std::vector<double> alphas(alpha_grid.begin(), alpha_grid.end());
  std::sort(alphas.begin(), alphas.end());

  SmoothingSelection sel;
  double best = std::numeric_limits<double>::infinity();
  bool have = false;

  for (double alpha : alphas) {
    auto fac = detail_d2s::Factored::make(pb, alpha);
    Eigen::VectorXd coef;
    try {
      coef = fac.solve_coefficients(pb);
    } catch (const NumericalError&) {
      std::fprintf(stderr, "gcv: skipping singular alpha=%g\n", alpha);
      continue;
    }
    auto fit = detail_d2s::finish_fit(pb, coef);

    double score;
    if (fit.misfit / M <= 1e-12 * pb.w_scale2) {
      score = 0.0;  // interpolating-grade residual
    } else {
      double trH;
      if (pb.q() <= opt.exact_trace_limit) {
        trH = fac.trace_H_exact(pb);
      } else {
        // Hutchinson probes: tr(H) ~ E[z' H z], z in {-1,+1}^M
        std::uint64_t state = opt.trace_seed * 2654435761u + 1;
        auto next = [&state]() {
          state ^= state << 13; state ^= state >> 7; state ^= state << 17;
          return state;
        };
        double acc = 0.0;
        Eigen::VectorXd z(M);
        Eigen::RowVectorXd row(pb.q() + 3);
        for (int probe = 0; probe < opt.trace_probes; ++probe) {
          for (int i = 0; i < M; ++i) z(i) = (next() & 1) ? 1.0 : -1.0;
          Eigen::VectorXd Utz = Eigen::VectorXd::Zero(pb.q() + 3);
          for (int i = 0; i < M; ++i) {
            pb.basis_row(pb.uv[i], row);
            Utz += row.transpose() * z(i);
          }
          Eigen::VectorXd rhs = Eigen::VectorXd::Zero(pb.q() + 6);
          rhs.head(pb.q() + 3) = Utz;
          Eigen::VectorXd x = fac.lu.solve(rhs);
          double zHz = 0.0;
          for (int i = 0; i < M; ++i) {
            pb.basis_row(pb.uv[i], row);
            zHz += z(i) * row.dot(x.head(pb.q() + 3));
          }
          acc += zHz;
        }
        trH = acc / opt.trace_probes;
      }
      double denom = (M - trH) / M;
      if (denom < 1e-9) {
        std::fprintf(stderr,
                     "gcv: skipping alpha=%g (interpolating, tr(I-H)~0)\n",
                     alpha);
        continue;
      }
      score = (fit.misfit / M) / (denom * denom);
    }
    sel.gcv_scores.emplace_back(alpha, score);
    if (!have || score < best) {
      best = score;
      sel.alpha = alpha;
      have = true;
    }
  }
  if (!have) throw NumericalError("gcv: no usable alpha in the grid");
  return sel;
}

/// Default log-spaced alpha grid (13 values across [1e-6, 1e6]).
inline std::vector<double> default_alpha_grid(double lo = 1e-6, double hi = 1e6,
                                              int count = 13) {
  if (count < 1 || lo <= 0 || hi < lo) throw ParameterError("bad alpha grid");
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i)
    g[i] = count == 1 ? lo
                      : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return g;
}

/// Evaluates the field on a regular uv grid restricted to the cloud's
/// boundary (trim machinery) and triangulates cells whose centers fall
/// inside.
inline TriangleMesh height_field_to_mesh(const HeightField& field,
                                         const PointCloud& aligned,
                                         int resolution = 200) {
  validate(aligned);
  if (resolution < 2) throw ParameterError("resolution must be >= 2");

  TrimCurve trim = fit_trim_curve(
      aligned, std::make_pair(field.rect_min, field.rect_max));

  const int n = resolution;
  const double du = (field.rect_max.x - field.rect_min.x) / n;
  const double dv = (field.rect_max.y - field.rect_min.y) / n;

  std::vector<int> vid(static_cast<std::size_t>(n + 1) * (n + 1), -1);
  TriangleMesh mesh;
  auto vertex = [&](int i, int j) {
    int& id = vid[static_cast<std::size_t>(i) * (n + 1) + j];
    if (id < 0) {
      double u = field.rect_min.x + i * du;
      double v = field.rect_min.y + j * dv;
      id = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back({u, v, field.evaluate(u, v)});
    }
    return static_cast<std::uint32_t>(id);
  };

  std::size_t kept = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double uc = field.rect_min.x + (i + 0.5) * du;
      double vc = field.rect_min.y + (j + 0.5) * dv;
      if (!trim.contains_world({uc, vc})) continue;
      ++kept;
      std::uint32_t a = vertex(i, j), b = vertex(i + 1, j);
      std::uint32_t c = vertex(i + 1, j + 1), d = vertex(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }
  if (kept == 0) throw DegenerateGeometryError("trimmed domain is empty");
  return mesh;
}

}  // namespace leafsurf
