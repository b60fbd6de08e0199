#pragma once

// Independent brute-force oracles used by the tests. Everything here is
// deliberately naive (O(n^2) scans, direct sums, dense quadrature) and kept
// apart from the implementation paths it checks.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "leafsurf/geo.hpp"

namespace oracles {

using leafsurf::Vec2;
using leafsurf::Vec3;

// deterministic rng for test data
inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// --- point clouds -----------------------------------------------------------

/// Jittered-grid patch sample of z = f(x,y) over a centered square.
template <typename F>
leafsurf::PointCloud sample_patch(double side, int approx_n, F height,
                                  std::uint64_t seed) {
  leafsurf::PointCloud cloud;
  int g = std::max(2, static_cast<int>(std::lround(std::sqrt(double(approx_n)))));
  std::mt19937_64 r(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double cell = side / g;
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      double x = (i + U(r)) * cell - side / 2;
      double y = (j + U(r)) * cell - side / 2;
      cloud.points.push_back({x, y, height(x, y)});
    }
  return cloud;
}

/// Regular grid including the exact boundary (hull equals the square).
inline leafsurf::PointCloud grid_patch(double side, int g) {
  leafsurf::PointCloud cloud;
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      cloud.points.push_back(
          {side * i / (g - 1) - side / 2, side * j / (g - 1) - side / 2, 0.0});
  return cloud;
}

inline leafsurf::OrientedPointCloud fibonacci_sphere(int n, double radius,
                                                     std::uint64_t seed) {
  leafsurf::OrientedPointCloud cloud;
  std::mt19937_64 r(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / n;
    double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    double th = golden * i + 0.2 * U(r);
    Vec3 nrm{rho * std::cos(th), rho * std::sin(th), z};
    cloud.points.push_back(nrm * radius);
    cloud.normals.push_back(nrm);
  }
  return cloud;
}

// --- brute-force k nearest neighbors ---------------------------------------

inline std::vector<double> brute_mean_knn(const std::vector<Vec3>& pts, int k) {
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> d;
    d.reserve(pts.size() - 1);
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) d.push_back(leafsurf::dist(pts[i], pts[j]));
    std::sort(d.begin(), d.end());
    double s = 0.0;
    for (int t = 0; t < k; ++t) s += d[t];
    out[i] = s / k;
  }
  return out;
}

inline double brute_mean_nn(const std::vector<Vec3>& pts) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) best = std::min(best, leafsurf::dist(pts[i], pts[j]));
    sum += best;
  }
  return sum / pts.size();
}

// --- Delaunay oracle --------------------------------------------------------

/// Strict in-circumcircle violations by the normalized determinant test.
inline int circumcircle_violations(const std::vector<Vec2>& sites,
                                   const std::vector<std::array<int, 3>>& tris,
                                   double tol = 1e-6) {
  double xmin = sites[0].x, xmax = xmin, ymin = sites[0].y, ymax = ymin;
  for (Vec2 s : sites) {
    xmin = std::min(xmin, s.x); xmax = std::max(xmax, s.x);
    ymin = std::min(ymin, s.y); ymax = std::max(ymax, s.y);
  }
  double scale = std::max(xmax - xmin, ymax - ymin);
  auto norm = [&](Vec2 p) {
    return Vec2{(p.x - xmin) / scale, (p.y - ymin) / scale};
  };
  int bad = 0;
  for (const auto& t : tris) {
    Vec2 a = norm(sites[t[0]]), b = norm(sites[t[1]]), c = norm(sites[t[2]]);
    for (std::size_t s = 0; s < sites.size(); ++s) {
      if (static_cast<int>(s) == t[0] || static_cast<int>(s) == t[1] ||
          static_cast<int>(s) == t[2])
        continue;
      Vec2 p = norm(sites[s]);
      double adx = a.x - p.x, ady = a.y - p.y;
      double bdx = b.x - p.x, bdy = b.y - p.y;
      double cdx = c.x - p.x, cdy = c.y - p.y;
      double det = adx * (bdy * (cdx * cdx + cdy * cdy) -
                          cdy * (bdx * bdx + bdy * bdy)) -
                   ady * (bdx * (cdx * cdx + cdy * cdy) -
                          cdx * (bdx * bdx + bdy * bdy)) +
                   (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy);
      if (det > tol) ++bad;
    }
  }
  return bad;
}

inline double convex_hull_area(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(),
            [](Vec2 a, Vec2 b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  int n = static_cast<int>(pts.size()), k = 0;
  std::vector<Vec2> h(2 * n);
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (int i = n - 2, lo = k + 1; i >= 0; --i) {
    while (k >= lo && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  double area = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    area += h[i].cross(h[(i + 1) % h.size()]);
  return 0.5 * std::abs(area);
}

// --- quadrature -------------------------------------------------------------

/// Dense midpoint quadrature of sqrt(1 + fu^2 + fv^2) over a rectangle.
template <typename Fu, typename Fv>
double surface_integral(double x0, double x1, double y0, double y1, Fu fu,
                        Fv fv, int res = 600) {
  double dx = (x1 - x0) / res, dy = (y1 - y0) / res;
  double acc = 0.0;
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j) {
      double x = x0 + (i + 0.5) * dx, y = y0 + (j + 0.5) * dy;
      double gu = fu(x, y), gv = fv(x, y);
      acc += std::sqrt(1.0 + gu * gu + gv * gv) * dx * dy;
    }
  return acc;
}

// --- misc -------------------------------------------------------------------

/// Monte-Carlo area of a polygon-contained region inside a known rectangle.
inline double polygon_area_mc(const std::vector<Vec2>& poly, Vec2 lo, Vec2 hi,
                              int n, std::uint64_t seed) {
  std::mt19937_64 r(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto inside = [&](Vec2 q) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      if ((poly[i].y > q.y) != (poly[j].y > q.y)) {
        double xs = poly[j].x + (q.y - poly[j].y) / (poly[i].y - poly[j].y) *
                                    (poly[i].x - poly[j].x);
        if (q.x < xs) in = !in;
      }
    }
    return in;
  };
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    Vec2 q{lo.x + (hi.x - lo.x) * U(r), lo.y + (hi.y - lo.y) * U(r)};
    if (inside(q)) ++hits;
  }
  return (hi.x - lo.x) * (hi.y - lo.y) * hits / n;
}

/// Icosphere: subdivided icosahedron projected onto the unit sphere.
inline leafsurf::TriangleMesh icosphere(int subdivisions) {
  using leafsurf::TriangleMesh;
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                   {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                   {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : mesh.vertices) v = v.normalized();
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    TriangleMesh next;
    next.vertices = mesh.vertices;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      Vec3 m = ((next.vertices[a] + next.vertices[b]) * 0.5).normalized();
      auto id = static_cast<std::uint32_t>(next.vertices.size());
      next.vertices.push_back(m);
      mid.emplace(key, id);
      return id;
    };
    for (const auto& tr : mesh.triangles) {
      std::uint32_t ab = midpoint(tr[0], tr[1]);
      std::uint32_t bc = midpoint(tr[1], tr[2]);
      std::uint32_t ca = midpoint(tr[2], tr[0]);
      next.triangles.push_back({tr[0], ab, ca});
      next.triangles.push_back({tr[1], bc, ab});
      next.triangles.push_back({tr[2], ca, bc});
      next.triangles.push_back({ab, bc, ca});
    }
    mesh = std::move(next);
  }
  return mesh;
}

}  // namespace oracles
