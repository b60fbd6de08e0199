#pragma once

// 2D Delaunay triangulation (Bowyer-Watson with ghost triangles) and the
// 2.5D back-projection reconstruction built on top of it.
//
// Input coordinates are snapped onto a 2^26 integer lattice spanning the
// bounding box, which makes the orientation and in-circle predicates exact
// (__int128 arithmetic) and the construction robust on grids and other
// degenerate inputs. Insertion follows Morton order with walking point
// location, so construction is close to linear on coherent data.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <unordered_map>
#include <vector>

#include "leafsurf/geo.hpp"

namespace leafsurf {

struct Triangulation2D {
  std::vector<Vec2> sites;  // deduplicated input sites
  std::vector<std::array<int, 3>> triangles;  // CCW index triples into sites
  std::vector<int> source_index;  // sites[i] came from input[source_index[i]]
  int duplicates_removed = 0;
};

namespace detail_delaunay {

using i128 = __int128;

constexpr int kGhost = -1;
constexpr std::int64_t kGridMax = (1LL << 26) - 1;

struct IPoint {
  std::int64_t x, y;
};

// w is to the left of u->v ?  (> 0 left, 0 collinear, < 0 right)
inline i128 orient(const IPoint& u, const IPoint& v, const IPoint& w) {
  return i128(v.x - u.x) * i128(w.y - u.y) - i128(v.y - u.y) * i128(w.x - u.x);
}

// p strictly inside the circumcircle of CCW triangle (a,b,c) ?
inline bool in_circle(const IPoint& a, const IPoint& b, const IPoint& c,
                      const IPoint& p) {
  i128 adx = a.x - p.x, ady = a.y - p.y;
  i128 bdx = b.x - p.x, bdy = b.y - p.y;
  i128 cdx = c.x - p.x, cdy = c.y - p.y;
  i128 ad = adx * adx + ady * ady;
  i128 bd = bdx * bdx + bdy * bdy;
  i128 cd = cdx * cdx + cdy * cdy;
  i128 det = adx * (bdy * cd - cdy * bd) - ady * (bdx * cd - cdx * bd) +
             ad * (bdx * cdy - cdx * bdy);
  return det > 0;
}

inline std::uint64_t morton(std::uint32_t x, std::uint32_t y) {
  auto split = [](std::uint64_t v) {
    v &= 0x3ffffff;  // 26 bits
    v = (v | (v << 16)) & 0x0000ffff0000ffffull;
    v = (v | (v << 8)) & 0x00ff00ff00ff00ffull;
    v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0full;
    v = (v | (v << 2)) & 0x3333333333333333ull;
    v = (v | (v << 1)) & 0x5555555555555555ull;
    return v;
  };
  return split(x) | (split(y) << 1);
}

struct Builder {
  std::vector<IPoint> pts;
  std::vector<std::array<int, 3>> tris;  // vertex -1 = ghost
  std::vector<char> alive;
  std::vector<int> mark;  // cavity membership, keyed by epoch
  int epoch = 0;
  std::unordered_map<std::uint64_t, int> edge_owner;  // directed edge -> tri
  int last_created = -1;

  static std::uint64_t ekey(int u, int v) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u + 1)) << 32) |
           static_cast<std::uint32_t>(v + 1);
  }

  bool is_ghost(int t) const {
    return tris[t][0] == kGhost || tris[t][1] == kGhost || tris[t][2] == kGhost;
  }

  int add_tri(int a, int b, int c) {
    // normalize: ghost vertex, if any, goes to slot 2
    if (a == kGhost) { int t = a; a = b; b = c; c = t; }
    else if (b == kGhost) { int t = b; b = a; a = c; c = t; }
    int id = static_cast<int>(tris.size());
    tris.push_back({a, b, c});
    alive.push_back(1);
    mark.push_back(0);
    edge_owner[ekey(a, b)] = id;
    edge_owner[ekey(b, c)] = id;
    edge_owner[ekey(c, a)] = id;
    last_created = id;
    return id;
  }

  void remove_tri(int t) {
    alive[t] = 0;
    auto& v = tris[t];
    for (int e = 0; e < 3; ++e) {
      auto it = edge_owner.find(ekey(v[e], v[(e + 1) % 3]));
      if (it != edge_owner.end() && it->second == t) edge_owner.erase(it);
    }
  }

  int neighbor_across(int u, int v) const {
    auto it = edge_owner.find(ekey(v, u));
    return it == edge_owner.end() ? -1 : it->second;
  }

  // Does the (closed) circumdisk of triangle t contain point p?
  // A ghost disk is the open half plane left of its hull edge, plus the
  // closed hull segment itself (the edge-split case). Points collinear
  // beyond the segment belong to the neighboring visible ghost instead;
  // including them here would fan out degenerate triangles.
  bool disk_contains(int t, const IPoint& p) const {
    const auto& v = tris[t];
    if (v[2] == kGhost) {
      const IPoint& a = pts[v[0]];
      const IPoint& b = pts[v[1]];
      i128 o = orient(a, b, p);
      if (o != 0) return o > 0;
      i128 t_along = i128(p.x - a.x) * i128(b.x - a.x) +
                     i128(p.y - a.y) * i128(b.y - a.y);
      i128 len2 = i128(b.x - a.x) * i128(b.x - a.x) +
                  i128(b.y - a.y) * i128(b.y - a.y);
      return t_along >= 0 && t_along <= len2;
    }
    return in_circle(pts[v[0]], pts[v[1]], pts[v[2]], p);
  }

  // Walk from the last created triangle toward p; returns a triangle whose
  // disk contains p. Falls back to a linear scan on degenerate walks.
  int locate(const IPoint& p) {
    int t = last_created;
    if (t < 0 || !alive[t]) t = first_alive();
    std::size_t steps = 0, cap = 4 * tris.size() + 64;
    while (t >= 0 && steps++ < cap) {
      if (is_ghost(t)) {
        if (disk_contains(t, p)) return t;
        // step into the hull through the real neighbor
        int nb = neighbor_across(tris[t][0], tris[t][1]);
        if (nb < 0) break;
        t = nb;
        continue;
      }
      const auto& v = tris[t];
      int exit = -1;
      for (int e = 0; e < 3; ++e) {
        if (orient(pts[v[e]], pts[v[(e + 1) % 3]], p) < 0) {
          exit = e;
          break;
        }
      }
      if (exit < 0) return t;  // inside or on boundary; disk contains p
      int nb = neighbor_across(v[exit], v[(exit + 1) % 3]);
      if (nb < 0) break;
      t = nb;
    }
    // Degenerate path: scan everything.
    for (std::size_t i = 0; i < tris.size(); ++i)
      if (alive[i] && disk_contains(static_cast<int>(i), p))
        return static_cast<int>(i);
    return -1;
  }

  int first_alive() const {
    for (std::size_t i = 0; i < tris.size(); ++i)
      if (alive[i]) return static_cast<int>(i);
    return -1;
  }

  void insert(int pi) {
    const IPoint& p = pts[pi];
    int seed = locate(p);
    if (seed < 0 || !disk_contains(seed, p)) {
      // walk settled on a triangle whose disk misses p; try neighbors, then scan
      seed = -1;
      for (std::size_t i = 0; i < tris.size() && seed < 0; ++i)
        if (alive[i] && disk_contains(static_cast<int>(i), p))
          seed = static_cast<int>(i);
      if (seed < 0) throw NumericalError("delaunay insertion lost containment");
    }

    // Grow the cavity of all triangles whose disk contains p.
    ++epoch;
    std::vector<int> cavity{seed};
    mark[seed] = epoch;
    for (std::size_t k = 0; k < cavity.size(); ++k) {
      const auto v = tris[cavity[k]];
      for (int e = 0; e < 3; ++e) {
        int nb = neighbor_across(v[e], v[(e + 1) % 3]);
        if (nb < 0 || mark[nb] == epoch || !alive[nb]) continue;
        if (disk_contains(nb, p)) {
          mark[nb] = epoch;
          cavity.push_back(nb);
        }
      }
    }

    // Boundary = directed edges of cavity triangles whose twin lies outside.
    std::vector<std::pair<int, int>> boundary;
    for (int t : cavity) {
      const auto v = tris[t];
      for (int e = 0; e < 3; ++e) {
        int u = v[e], w = v[(e + 1) % 3];
        int nb = neighbor_across(u, w);
        if (nb < 0 || mark[nb] != epoch) boundary.emplace_back(u, w);
      }
    }
    for (int t : cavity) remove_tri(t);
    for (auto [u, w] : boundary) add_tri(u, w, pi);
  }
};

}  // namespace detail_delaunay

/// Delaunay triangulation of a planar point set. Duplicate sites (identical
/// after lattice snapping) are removed with a warning; fully collinear input
/// raises DegenerateGeometryError.
inline Triangulation2D delaunay_2d(const std::vector<Vec2>& input) {
  using namespace detail_delaunay;
  if (input.size() < 3)
    throw DegenerateGeometryError("delaunay_2d needs at least 3 sites");
  for (const Vec2& s : input)
    if (!std::isfinite(s.x) || !std::isfinite(s.y))
      throw FormatError("non-finite site coordinate");

  double xmin = input[0].x, xmax = xmin, ymin = input[0].y, ymax = ymin;
  for (const Vec2& s : input) {
    xmin = std::min(xmin, s.x); xmax = std::max(xmax, s.x);
    ymin = std::min(ymin, s.y); ymax = std::max(ymax, s.y);
  }
  double span = std::max(xmax - xmin, ymax - ymin);
  if (span <= 0.0) {
    // all points coincide -> also collinear
    throw DegenerateGeometryError("delaunay_2d sites are degenerate");
  }
  double scale = static_cast<double>(kGridMax) / span;

  // Snap and deduplicate.
  Triangulation2D result;
  std::vector<IPoint> snapped;
  std::unordered_map<std::uint64_t, int> seen;
  std::vector<int> unique_ids;  // into result.sites
  for (std::size_t i = 0; i < input.size(); ++i) {
    IPoint ip{static_cast<std::int64_t>(std::llround((input[i].x - xmin) * scale)),
              static_cast<std::int64_t>(std::llround((input[i].y - ymin) * scale))};
    std::uint64_t key = (static_cast<std::uint64_t>(ip.x) << 32) |
                        static_cast<std::uint64_t>(ip.y);
    auto it = seen.find(key);
    if (it != seen.end()) {
      ++result.duplicates_removed;
      continue;
    }
    seen.emplace(key, static_cast<int>(result.sites.size()));
    result.sites.push_back(input[i]);
    result.source_index.push_back(static_cast<int>(i));
    snapped.push_back(ip);
  }
  if (result.duplicates_removed > 0)
    std::fprintf(stderr, "delaunay_2d: removed %d duplicate site(s)\n",
                 result.duplicates_removed);
  const int n = static_cast<int>(snapped.size());
  if (n < 3) throw DegenerateGeometryError("fewer than 3 distinct sites");

  // Morton insertion order.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    std::uint64_t ma = morton(static_cast<std::uint32_t>(snapped[a].x),
                              static_cast<std::uint32_t>(snapped[a].y));
    std::uint64_t mb = morton(static_cast<std::uint32_t>(snapped[b].x),
                              static_cast<std::uint32_t>(snapped[b].y));
    return ma != mb ? ma < mb : a < b;
  });

  // Bootstrap with the first non-collinear triple in insertion order.
  Builder builder;
  builder.pts = snapped;
  int third = -1;
  for (int k = 2; k < n; ++k) {
    if (orient(snapped[order[0]], snapped[order[1]], snapped[order[k]]) != 0) {
      third = k;
      break;
    }
  }
  if (third < 0) throw DegenerateGeometryError("all sites are collinear");

  {
    int a = order[0], b = order[1], c = order[third];
    if (orient(snapped[a], snapped[b], snapped[c]) < 0) std::swap(b, c);
    builder.add_tri(a, b, c);
    builder.add_tri(b, a, kGhost);
    builder.add_tri(c, b, kGhost);
    builder.add_tri(a, c, kGhost);
  }
  for (int k = 2; k < n; ++k) {
    if (k == third) continue;
    builder.insert(order[k]);
  }

  for (std::size_t t = 0; t < builder.tris.size(); ++t) {
    if (!builder.alive[t] || builder.is_ghost(static_cast<int>(t))) continue;
    const auto& v = builder.tris[t];
    result.triangles.push_back({v[0], v[1], v[2]});
  }
  return result;
}

/// Projects the aligned cloud to the uv-plane, triangulates there, and lifts
/// the connectivity back onto the original 3D points.
inline TriangleMesh reconstruct_delaunay25d(const PointCloud& aligned) {
  validate(aligned);
  std::vector<Vec2> uv(aligned.points.size());
  for (std::size_t i = 0; i < aligned.points.size(); ++i)
    uv[i] = aligned.points[i].xy();
  Triangulation2D tri = delaunay_2d(uv);

  TriangleMesh mesh;
  mesh.vertices.reserve(tri.sites.size());
  for (int src : tri.source_index) mesh.vertices.push_back(aligned.points[src]);
  mesh.triangles.reserve(tri.triangles.size());
  for (const auto& t : tri.triangles)
    mesh.triangles.push_back({static_cast<std::uint32_t>(t[0]),
                              static_cast<std::uint32_t>(t[1]),
                              static_cast<std::uint32_t>(t[2])});
  return mesh;
}

}  // namespace leafsurf
