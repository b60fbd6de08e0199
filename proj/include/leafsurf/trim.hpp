#pragma once

// Closed trim curves in the parametric domain. The boundary of the projected
// cloud is extracted with an alpha-shape over the uv Delaunay triangulation,
// ordered into a loop, pushed slightly outward, and fitted with a closed
// (periodic) cubic B-spline. Containment tests and trimmed surface-area
// quadrature run against a dense polygonization of that curve.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "leafsurf/delaunay.hpp"
#include "leafsurf/geo.hpp"
#include "leafsurf/kdtree.hpp"
#include "leafsurf/spline.hpp"

namespace leafsurf {

/// Closed planar curve in normalized [0,1]^2 parameter space. `rect_min` /
/// `rect_max` record the world-uv rectangle that maps onto the unit square.
struct TrimCurve {
  std::vector<Vec2> control;  // periodic uniform cubic control polygon
  Vec2 rect_min, rect_max;
  std::vector<Vec2> polygon_cache;  // dense evaluation, closed implicitly
  mutable std::vector<Vec2> scratch_;  // lazy polygon when cache not refreshed

  /// Point on the curve at t in [0,1]; evaluate(0) == evaluate(1).
  Vec2 evaluate(double t) const {
    const int m = static_cast<int>(control.size());
    t -= std::floor(t);
    double s = t * m;
    int seg = std::min(static_cast<int>(s), m - 1);
    double x = s - seg;
    auto c = [&](int k) { return control[((seg + k) % m + m) % m]; };
    // uniform cubic B-spline blending of 4 consecutive control points
    double b0 = (1 - x) * (1 - x) * (1 - x) / 6.0;
    double b1 = (3 * x * x * x - 6 * x * x + 4) / 6.0;
    double b2 = (-3 * x * x * x + 3 * x * x + 3 * x + 1) / 6.0;
    double b3 = x * x * x / 6.0;
    return b0 * c(-1) + b1 * c(0) + b2 * c(1) + b3 * c(2);
  }

  std::vector<Vec2> polygon(int n) const {
    std::vector<Vec2> poly(n);
    for (int i = 0; i < n; ++i) poly[i] = evaluate(static_cast<double>(i) / n);
    return poly;
  }

  /// Even-odd containment in normalized coordinates.
  bool contains(Vec2 q) const {
    const std::vector<Vec2>& poly =
        polygon_cache.empty() ? (scratch_ = polygon(512)) : polygon_cache;
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      if ((poly[i].y > q.y) != (poly[j].y > q.y)) {
        double xint = poly[j].x + (q.y - poly[j].y) / (poly[i].y - poly[j].y) *
                                      (poly[i].x - poly[j].x);
        if (q.x < xint) inside = !inside;
      }
    }
    return inside;
  }

  Vec2 to_normalized(Vec2 world) const {
    return {(world.x - rect_min.x) / (rect_max.x - rect_min.x),
            (world.y - rect_min.y) / (rect_max.y - rect_min.y)};
  }
  bool contains_world(Vec2 world) const { return contains(to_normalized(world)); }

  void refresh_polygon() {
    polygon_cache = polygon(std::max<int>(512, 8 * static_cast<int>(control.size())));
  }
};

namespace detail_trim {

/// Ordered boundary loop of the alpha shape (triangles with circumradius
/// <= alpha). Returns the longest closed loop, or empty on failure.
inline std::vector<int> alpha_boundary_loop(const Triangulation2D& tri,
                                            double alpha) {
  auto circumradius2 = [&](const std::array<int, 3>& t) {
    Vec2 a = tri.sites[t[0]], b = tri.sites[t[1]], c = tri.sites[t[2]];
    double d = 2.0 * ((b - a).cross(c - a));
    if (d == 0.0) return std::numeric_limits<double>::infinity();
    double a2 = (b - a).norm2(), b2 = (c - a).norm2();
    Vec2 rel{( (c.y - a.y) * a2 - (b.y - a.y) * b2) / d,
             ( (b.x - a.x) * b2 - (c.x - a.x) * a2) / d};
    return rel.norm2();
  };

  const double alpha2 = alpha * alpha;
  std::unordered_map<std::uint64_t, int> edge_count;
  auto ekey = [](int u, int v) {
    if (u > v) std::swap(u, v);
    return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(v);
  };
  bool any = false;
  for (const auto& t : tri.triangles) {
    if (circumradius2(t) > alpha2) continue;
    any = true;
    edge_count[ekey(t[0], t[1])]++;
    edge_count[ekey(t[1], t[2])]++;
    edge_count[ekey(t[2], t[0])]++;
  }
  if (!any) return {};

  // adjacency over boundary edges (count == 1)
  std::unordered_map<int, std::vector<int>> adj;
  for (auto& [key, cnt] : edge_count) {
    if (cnt != 1) continue;
    int u = static_cast<int>(key >> 32), v = static_cast<int>(key & 0xffffffffu);
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  if (adj.empty()) return {};

  // walk loops; keep the longest
  std::unordered_map<std::uint64_t, char> used;
  std::vector<int> best;
  for (auto& [start, nbrs] : adj) {
    for (int first : nbrs) {
      if (used.count(ekey(start, first))) continue;
      std::vector<int> loop{start, first};
      used[ekey(start, first)] = 1;
      bool closed = false;
      while (true) {
        int cur = loop.back(), prev = loop[loop.size() - 2];
        auto it = adj.find(cur);
        if (it == adj.end()) break;
        int next = -1;
        for (int cand : it->second) {
          if (cand == prev) continue;
          if (used.count(ekey(cur, cand))) continue;
          next = cand;
          break;
        }
        if (next < 0) break;
        used[ekey(cur, next)] = 1;
        if (next == start) {
          closed = true;
          break;
        }
        loop.push_back(next);
        if (loop.size() > adj.size() + 2) break;
      }
      if (closed && loop.size() > best.size()) best = loop;
    }
  }
  return best;
}

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 &&
           (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0)
      --k;
    hull[k++] = pts[i];
  }
  for (int i = n - 2, lower = k + 1; i >= 0; --i) {
    while (k >= lower &&
           (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0)
      --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Resample a closed polygon to n points equally spaced along its perimeter.
inline std::vector<Vec2> resample_closed(const std::vector<Vec2>& poly, int n) {
  std::vector<double> cum{0.0};
  for (std::size_t i = 0; i < poly.size(); ++i) {
    Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    cum.push_back(cum.back() + (b - a).norm());
  }
  double total = cum.back();
  std::vector<Vec2> out(n);
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    double target = total * k / n;
    while (seg < poly.size() - 1 && cum[seg + 1] < target) ++seg;
    double t = (cum[seg + 1] > cum[seg])
                   ? (target - cum[seg]) / (cum[seg + 1] - cum[seg])
                   : 0.0;
    Vec2 a = poly[seg], b = poly[(seg + 1) % poly.size()];
    out[k] = a + t * (b - a);
  }
  return out;
}

/// Least-squares periodic uniform cubic B-spline through closed samples.
inline std::vector<Vec2> fit_periodic_cubic(const std::vector<Vec2>& samples,
                                            int n_ctrl) {
  const int m = static_cast<int>(samples.size());
  Eigen::MatrixXd AtA = Eigen::MatrixXd::Zero(n_ctrl, n_ctrl);
  Eigen::MatrixXd Atb = Eigen::MatrixXd::Zero(n_ctrl, 2);
  for (int k = 0; k < m; ++k) {
    double s = static_cast<double>(k) * n_ctrl / m;
    int seg = std::min(static_cast<int>(s), n_ctrl - 1);
    double x = s - seg;
    double b[4] = {(1 - x) * (1 - x) * (1 - x) / 6.0,
                   (3 * x * x * x - 6 * x * x + 4) / 6.0,
                   (-3 * x * x * x + 3 * x * x + 3 * x + 1) / 6.0,
                   x * x * x / 6.0};
    int idx[4] = {(seg - 1 + n_ctrl) % n_ctrl, seg, (seg + 1) % n_ctrl,
                  (seg + 2) % n_ctrl};
    for (int a = 0; a < 4; ++a) {
      for (int c = 0; c < 4; ++c) AtA(idx[a], idx[c]) += b[a] * b[c];
      Atb(idx[a], 0) += b[a] * samples[k].x;
      Atb(idx[a], 1) += b[a] * samples[k].y;
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(AtA);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("trim curve fit failed");
  Eigen::MatrixXd C = ldlt.solve(Atb);
  std::vector<Vec2> ctrl(n_ctrl);
  for (int i = 0; i < n_ctrl; ++i) ctrl[i] = {C(i, 0), C(i, 1)};
  return ctrl;
}

inline double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
    a += p.cross(q);
  }
  return 0.5 * std::abs(a);
}

}  // namespace detail_trim

/// Fits a closed trim curve around the uv footprint of an aligned cloud.
/// `rect` optionally fixes the world rectangle mapped to [0,1]^2 (defaults to
/// the uv bounding box); pass the same rectangle used for grid resampling so
/// the curve lands in the surface's parameter space.
inline TrimCurve fit_trim_curve(const PointCloud& aligned,
                                std::optional<std::pair<Vec2, Vec2>> rect = {}) {
  validate(aligned);
  if (aligned.points.size() < 10)
    throw ParameterError("fit_trim_curve needs at least 10 points");

  std::vector<Vec2> uv(aligned.points.size());
  for (std::size_t i = 0; i < uv.size(); ++i) uv[i] = aligned.points[i].xy();

  Vec2 lo{uv[0]}, hi{uv[0]};
  for (Vec2 p : uv) {
    lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y);
  }
  if (rect) {
    lo = rect->first;
    hi = rect->second;
  }
  if (hi.x - lo.x <= 0.0 || hi.y - lo.y <= 0.0)
    throw DegenerateGeometryError("degenerate uv extent for trim curve");

  // mean nearest-neighbor distance in uv
  std::vector<std::array<double, 2>> raw(uv.size());
  for (std::size_t i = 0; i < uv.size(); ++i) raw[i] = {uv[i].x, uv[i].y};
  KdTree2 tree(std::move(raw));
  double mean_nn = 0.0;
  for (std::size_t i = 0; i < uv.size(); ++i)
    mean_nn += std::sqrt(tree.nearest_dist2({uv[i].x, uv[i].y},
                                            static_cast<int>(i)));
  mean_nn /= static_cast<double>(uv.size());
  if (mean_nn <= 0.0) throw DegenerateGeometryError("coincident uv points");

  Triangulation2D tri = delaunay_2d(uv);

  std::vector<Vec2> loop_pts;
  double alpha = 3.0 * mean_nn;
  for (int attempt = 0; attempt < 6; ++attempt, alpha *= 1.6) {
    auto loop = detail_trim::alpha_boundary_loop(tri, alpha);
    if (loop.size() >= 3) {
      std::vector<Vec2> poly(loop.size());
      for (std::size_t i = 0; i < loop.size(); ++i) poly[i] = tri.sites[loop[i]];
      // reject loops that miss most of the footprint
      if (detail_trim::polygon_area(poly) >
          0.25 * (hi.x - lo.x) * (hi.y - lo.y)) {
        loop_pts = std::move(poly);
        break;
      }
    }
  }
  if (loop_pts.empty()) loop_pts = detail_trim::convex_hull(uv);
  if (loop_pts.size() < 3)
    throw DegenerateGeometryError("could not extract a boundary loop");

  // ensure CCW order for a consistent outward offset
  double signed_area = 0.0;
  for (std::size_t i = 0; i < loop_pts.size(); ++i)
    signed_area += loop_pts[i].cross(loop_pts[(i + 1) % loop_pts.size()]);
  if (signed_area < 0.0) std::reverse(loop_pts.begin(), loop_pts.end());

  TrimCurve curve;
  curve.rect_min = lo;
  curve.rect_max = hi;

  double offset = 0.25 * mean_nn;
  for (int round = 0; round < 4; ++round, offset *= 2.0) {
    // outward vertex offset, then normalize to the unit square
    std::vector<Vec2> inflated(loop_pts.size());
    for (std::size_t i = 0; i < loop_pts.size(); ++i) {
      Vec2 prev = loop_pts[(i + loop_pts.size() - 1) % loop_pts.size()];
      Vec2 next = loop_pts[(i + 1) % loop_pts.size()];
      Vec2 tangent = next - prev;
      Vec2 normal{tangent.y, -tangent.x};  // outward for CCW loops
      double n = normal.norm();
      inflated[i] = n > 0 ? loop_pts[i] + normal * (offset / n) : loop_pts[i];
    }
    std::vector<Vec2> samples = detail_trim::resample_closed(
        inflated, std::max<int>(64, static_cast<int>(inflated.size())));
    for (Vec2& s : samples)
      s = {(s.x - lo.x) / (hi.x - lo.x), (s.y - lo.y) / (hi.y - lo.y)};

    int n_ctrl = std::clamp(static_cast<int>(samples.size()) / 4, 16, 120);
    curve.control = detail_trim::fit_periodic_cubic(samples, n_ctrl);
    curve.refresh_polygon();

    std::size_t inside = 0;
    for (Vec2 p : uv)
      if (curve.contains(curve.to_normalized(p))) ++inside;
    if (inside >= (uv.size() * 95 + 99) / 100) return curve;
  }
  // final attempt: convex hull, inflated about its centroid
  loop_pts = detail_trim::convex_hull(uv);
  std::vector<Vec2> samples = detail_trim::resample_closed(
      loop_pts, std::max<int>(64, static_cast<int>(loop_pts.size()) * 4));
  for (Vec2& s : samples)
    s = {(s.x - lo.x) / (hi.x - lo.x), (s.y - lo.y) / (hi.y - lo.y)};
  Vec2 centroid{0, 0};
  for (Vec2 s : samples) centroid += s;
  centroid = centroid / static_cast<double>(samples.size());
  double grow = 1.0 + 2.0 * offset / std::max(hi.x - lo.x, hi.y - lo.y);
  for (Vec2& s : samples) s = centroid + (s - centroid) * grow;
  curve.control = detail_trim::fit_periodic_cubic(
      samples, std::clamp(static_cast<int>(samples.size()) / 4, 16, 120));
  curve.refresh_polygon();
  return curve;
}

/// Surface area over the part of the knot domain enclosed by the trim curve:
/// midpoint quadrature of |dS/du x dS/dv| over res x res cells whose centers
/// lie inside the curve. Pass no curve to integrate the full domain.
inline double trimmed_area(const ParametricSurface& surface,
                           const TrimCurve* trim, int resolution) {
  validate(surface);
  if (resolution < 2) throw ParameterError("quadrature resolution must be >= 2");
  const double u0 = surface.knots_u.domain_min(), u1 = surface.knots_u.domain_max();
  const double v0 = surface.knots_v.domain_min(), v1 = surface.knots_v.domain_max();
  const double du = (u1 - u0) / resolution, dv = (v1 - v0) / resolution;

  double area = 0.0;
  std::size_t cells_inside = 0;
  for (int i = 0; i < resolution; ++i) {
    double uc = u0 + (i + 0.5) * du;
    // normalized trim coordinates assume a [0,1] knot domain; rescale
    double un = (uc - u0) / (u1 - u0);
    for (int j = 0; j < resolution; ++j) {
      double vc = v0 + (j + 0.5) * dv;
      double vn = (vc - v0) / (v1 - v0);
      if (trim && !trim->contains({un, vn})) continue;
      ++cells_inside;
      auto [Su, Sv] = surface_partials(surface, uc, vc);
      area += Su.cross(Sv).norm() * du * dv;
    }
  }
  if (trim && cells_inside == 0)
    throw DegenerateGeometryError("trim curve encloses no quadrature cells");
  return area;
}

}  // namespace leafsurf
