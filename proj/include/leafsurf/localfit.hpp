#pragma once

// Local polynomial height fitting over the projected uv-plane: Gaussian
// weights give moving least squares, tricube weights give LOESS. Fitted
// heights are triangulated with the shared Delaunay machinery.

#include <Eigen/Dense>
#include <cstdio>
#include <vector>

#include "leafsurf/delaunay.hpp"
#include "leafsurf/geo.hpp"
#include "leafsurf/kdtree.hpp"

namespace leafsurf {

/// theta(d) = exp(-d^2 / h^2), in (0, 1].
inline double gaussian_weight(double d, double h) {
  if (!(h > 0.0)) throw ParameterError("gaussian bandwidth must be > 0");
  if (d < 0.0) throw ParameterError("distance must be non-negative");
  return std::exp(-(d * d) / (h * h));
}

/// W(u) = (1 - u^3)^3 for 0 <= u < 1, 0 otherwise.
inline double tricube_weight(double u) {
  if (u < 0.0) throw ParameterError("normalized distance must be non-negative");
  if (u >= 1.0) return 0.0;
  double t = 1.0 - u * u * u;
  return t * t * t;
}

enum class KernelKind { Gaussian, Tricube };

struct LocalFitConfig {
  KernelKind kernel = KernelKind::Gaussian;
  double bandwidth = 0.0;       // Gaussian h; <= 0 derives bandwidth_mult x mean NN
  double bandwidth_mult = 2.0;  // used when bandwidth is not set explicitly
  int knn = 0;                  // neighborhood size; <= 0 derives from degree/span
  double span_frac = 0.05;      // tricube: fraction of the cloud per query
  int knn_min = 30;
  int poly_degree = 2;          // 1 or 2
};

namespace detail_localfit {

inline int basis_size(int degree) { return degree == 2 ? 6 : (degree == 1 ? 3 : 1); }

inline void basis_row(double dx, double dy, int degree, Eigen::RowVectorXd& row) {
  row(0) = 1.0;
  if (degree >= 1) {
    row(1) = dx;
    row(2) = dy;
  }
  if (degree >= 2) {
    row(3) = dx * dx;
    row(4) = dx * dy;
    row(5) = dy * dy;
  }
}

/// Weighted polynomial fit at one query; lowers the degree on rank
/// deficiency (warns through `demotions` when given).
inline double fit_at(const std::vector<Vec3>& pts, const std::vector<int>& nbrs,
                     const std::vector<double>& weights, Vec2 query, int degree,
                     long* demotions) {
  for (int deg = degree; deg >= 0; --deg) {
    const int nb = basis_size(deg);
    if (static_cast<int>(nbrs.size()) < nb) continue;
    Eigen::MatrixXd A(nbrs.size(), nb);
    Eigen::VectorXd b(nbrs.size());
    Eigen::RowVectorXd row(nb);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const Vec3& p = pts[nbrs[k]];
      basis_row(p.x - query.x, p.y - query.y, deg, row);
      double sw = std::sqrt(weights[k]);
      A.row(k) = sw * row;
      b(k) = sw * p.z;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-9);
    if (qr.rank() < nb) {
      if (deg > 0) {
        if (demotions) ++*demotions;
        continue;  // degree lowered: 2 -> 1 -> 0
      }
      // degree 0 with positive weights is always solvable: weighted mean
      double ws = 0.0, hs = 0.0;
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        ws += weights[k];
        hs += weights[k] * pts[nbrs[k]].z;
      }
      return ws > 0.0 ? hs / ws : pts[nbrs[0]].z;
    }
    Eigen::VectorXd coef = qr.solve(b);
    if (!coef.allFinite()) {
      if (demotions) ++*demotions;
      continue;
    }
    return coef(0);  // polynomial value at the query (dx = dy = 0)
  }
  throw ParameterError("neighborhood too small for any polynomial degree");
}

struct Evaluator {
  const std::vector<Vec3>& pts;
  KdTree2 tree;
  LocalFitConfig cfg;
  double mean_nn = 0.0;
  long demotions = 0;

  Evaluator(const std::vector<Vec3>& points, LocalFitConfig config)
      : pts(points), tree(build_kdtree_xy(points)), cfg(config) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      sum += std::sqrt(tree.nearest_dist2({pts[i].x, pts[i].y},
                                          static_cast<int>(i)));
    mean_nn = sum / static_cast<double>(pts.size());
    if (cfg.bandwidth <= 0.0) cfg.bandwidth = cfg.bandwidth_mult * mean_nn;
    if (cfg.knn <= 0) {
      if (cfg.kernel == KernelKind::Tricube) {
        cfg.knn = std::max(cfg.knn_min,
                           static_cast<int>(cfg.span_frac * pts.size()));
      } else {
        cfg.knn = std::max(cfg.knn_min, 3 * basis_size(cfg.poly_degree));
      }
    }
    cfg.knn = std::min<int>(cfg.knn, static_cast<int>(pts.size()));
    if (cfg.knn < basis_size(cfg.poly_degree))
      throw ParameterError("neighborhood smaller than the polynomial basis");
  }

  double operator()(Vec2 q) {
    std::vector<int> nbrs = tree.knn({q.x, q.y}, cfg.knn);
    std::vector<double> weights(nbrs.size());
    if (cfg.kernel == KernelKind::Gaussian) {
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        double d = (pts[nbrs[k]].xy() - q).norm();
        weights[k] = gaussian_weight(d, cfg.bandwidth);
      }
    } else {
      // LOESS span: normalize by the farthest neighbor in the span
      double dmax = 0.0;
      for (int idx : nbrs) dmax = std::max(dmax, (pts[idx].xy() - q).norm());
      if (dmax <= 0.0) dmax = 1.0;
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        double d = (pts[nbrs[k]].xy() - q).norm();
        weights[k] = tricube_weight(d / dmax);
      }
    }
    return fit_at(pts, nbrs, weights, q, cfg.poly_degree, &demotions);
  }
};

}  // namespace detail_localfit

/// Height of the locally weighted polynomial fit at one uv query.
inline double local_poly_fit(const PointCloud& aligned, Vec2 query,
                             const LocalFitConfig& cfg) {
  validate(aligned);
  detail_localfit::Evaluator eval(aligned.points, cfg);
  double h = eval(query);
  if (eval.demotions > 0)
    std::fprintf(stderr, "local_poly_fit: degree lowered at the query\n");
  return h;
}

namespace detail_localfit {

inline TriangleMesh reconstruct_local(const PointCloud& aligned,
                                      LocalFitConfig cfg, const char* tag) {
  validate(aligned);
  Evaluator eval(aligned.points, cfg);
  PointCloud smoothed;
  smoothed.id = aligned.id;
  smoothed.points.resize(aligned.points.size());
  for (std::size_t i = 0; i < aligned.points.size(); ++i) {
    Vec2 q = aligned.points[i].xy();
    smoothed.points[i] = {q.x, q.y, eval(q)};
  }
  if (eval.demotions > 0)
    std::fprintf(stderr, "%s: degree lowered at %ld of %zu sites\n", tag,
                 eval.demotions, aligned.points.size());
  return reconstruct_delaunay25d(smoothed);
}

}  // namespace detail_localfit

/// MLS reconstruction: Gaussian-weighted local polynomial heights at every
/// site, Delaunay connectivity in uv.
inline TriangleMesh reconstruct_mls(const PointCloud& aligned,
                                    LocalFitConfig cfg = {}) {
  cfg.kernel = KernelKind::Gaussian;
  return detail_localfit::reconstruct_local(aligned, cfg, "reconstruct_mls");
}

/// LOESS reconstruction: tricube-weighted local polynomial heights.
inline TriangleMesh reconstruct_loess(const PointCloud& aligned,
                                      LocalFitConfig cfg = {}) {
  cfg.kernel = KernelKind::Tricube;
  return detail_localfit::reconstruct_local(aligned, cfg, "reconstruct_loess");
}

}  // namespace leafsurf
