#pragma once

// Ball-pivoting reconstruction: a virtual ball of fixed radius r rolls over
// the oriented cloud. A triangle (u,v,k) is accepted when a ball touching
// the three points encloses no other point; the mesh front then expands by
// pivoting the ball around boundary edges until nothing more can be formed.
// Sparse regions the ball cannot reach are left as holes.

#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "leafsurf/geo.hpp"
#include "leafsurf/kdtree.hpp"

namespace leafsurf {

/// multiplier x mean distance to the nearest other point.
inline double adaptive_ball_radius(const PointCloud& cloud, double multiplier) {
  if (cloud.points.size() < 2)
    throw ParameterError("adaptive_ball_radius needs at least 2 points");
  if (!(multiplier > 0.0)) throw ParameterError("multiplier must be > 0");
  return multiplier * mean_nearest_neighbor_distance(cloud.points);
}

namespace detail_bpa {

/// Circumcenter of a 3D triangle.
inline std::optional<Vec3> circumcenter(Vec3 a, Vec3 b, Vec3 c) {
  Vec3 ab = b - a, ac = c - a;
  Vec3 n = ab.cross(ac);
  double n2 = n.norm2();
  if (n2 <= 0.0) return {};
  Vec3 rel = (ab.norm2() * ac.cross(n) + ac.norm2() * n.cross(ab)) / (2.0 * n2);
  return a + rel;
}

/// Center of a ball of radius r touching a, b, c on the side `side` points
/// to; empty when the circumradius exceeds r.
inline std::optional<Vec3> ball_center(Vec3 a, Vec3 b, Vec3 c, double r,
                                       Vec3 side) {
  auto cc = circumcenter(a, b, c);
  if (!cc) return {};
  double h2 = r * r - (*cc - a).norm2();
  if (h2 < 0.0) return {};
  Vec3 un = (b - a).cross(c - a).normalized();
  if (un.dot(side) < 0.0) un = -un;
  return *cc + std::sqrt(h2) * un;
}

struct PivotHit {
  int vertex = -1;
  Vec3 center;
  double angle = 0.0;
};

}  // namespace detail_bpa

/// One pivot around the directed front edge (u -> v) whose current triangle
/// has third vertex `opp` and ball center `center`. Returns the first point
/// the rolling ball touches, its ball position and the rotation angle, or
/// nothing when no compatible point exists (the edge becomes boundary).
inline std::optional<detail_bpa::PivotHit> bpa_pivot(
    const std::vector<Vec3>& pts, const KdTree3& tree, int u, int v, int opp,
    Vec3 center, double r) {
  using detail_bpa::ball_center;
  Vec3 m = (pts[u] + pts[v]) * 0.5;
  Vec3 axis = (pts[u] - pts[v]).normalized();
  Vec3 dp = center - m;
  dp = dp - axis * dp.dot(axis);
  double dpn = dp.norm();
  if (dpn <= 0.0) return {};
  dp = dp / dpn;

  // both ball positions per candidate, ordered by rolling angle
  auto candidates = tree.radius({m.x, m.y, m.z}, 2.0 * r);
  std::vector<detail_bpa::PivotHit> hits;
  for (int k : candidates) {
    if (k == u || k == v || k == opp) continue;
    for (int s = 0; s < 2; ++s) {
      Vec3 side = s == 0 ? dp : -dp;
      auto c = ball_center(pts[u], pts[v], pts[k], r, side);
      if (!c) break;  // circumradius too large, independent of side
      Vec3 dc = *c - m;
      dc = dc - axis * dc.dot(axis);
      double dcn = dc.norm();
      if (dcn <= 0.0) continue;
      dc = dc / dcn;
      double cosv = std::clamp(dp.dot(dc), -1.0, 1.0);
      double sinv = axis.dot(dp.cross(dc));
      double theta = std::atan2(sinv, cosv);
      if (theta < -1e-12) theta += 2.0 * M_PI;
      if (theta < 0.0) theta = 0.0;
      hits.push_back({k, *c, theta});
    }
  }
  if (hits.empty()) return {};
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.angle != b.angle ? a.angle < b.angle : a.vertex < b.vertex;
  });
  for (const auto& hit : hits) {
    bool empty = true;
    for (int q : tree.radius({hit.center.x, hit.center.y, hit.center.z},
                             r * (1.0 - 1e-9))) {
      if (q != u && q != v && q != hit.vertex) {
        empty = false;
        break;
      }
    }
    if (empty) return hit;
  }
  return {};
}

/// Full ball-pivoting reconstruction with a single adaptive radius.
inline TriangleMesh reconstruct_bpa(const OrientedPointCloud& cloud,
                                    double radius_multiplier = 2.0) {
  validate(cloud);
  const std::vector<Vec3>& pts = cloud.points;
  const std::vector<Vec3>& normals = cloud.normals;
  const int n = static_cast<int>(pts.size());

  TriangleMesh mesh;
  mesh.vertices = pts;
  if (n < 3) return mesh;

  PointCloud pc;
  pc.points = pts;
  const double r = adaptive_ball_radius(pc, radius_multiplier);
  KdTree3 tree = build_kdtree(pts);

  auto ekey = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  };
  std::unordered_map<std::uint64_t, int> edge_count;

  struct FrontEdge {
    int u, v, opp;
    Vec3 center;
  };
  std::deque<FrontEdge> front;
  std::vector<char> used(n, 0);
  const std::size_t max_triangles = 4 * static_cast<std::size_t>(n);

  auto tri_exists = [&](int a, int b, int c) {
    // cheap manifold guard: a triangle may not reuse a full edge
    return edge_count[ekey(a, b)] >= 2 || edge_count[ekey(b, c)] >= 2 ||
           edge_count[ekey(c, a)] >= 2;
  };

  auto add_triangle = [&](int a, int b, int c, Vec3 center) {
    mesh.triangles.push_back({static_cast<std::uint32_t>(a),
                              static_cast<std::uint32_t>(b),
                              static_cast<std::uint32_t>(c)});
    used[a] = used[b] = used[c] = 1;
    edge_count[ekey(a, b)]++;
    edge_count[ekey(b, c)]++;
    edge_count[ekey(c, a)]++;
    // reversed edges continue the front; entries for edges that close in
    // the meantime are dropped as stale when popped
    front.push_back({b, a, c, center});
    front.push_back({c, b, a, center});
    front.push_back({a, c, b, center});
  };

  auto expand_front = [&]() {
    while (!front.empty() && mesh.triangles.size() < max_triangles) {
      FrontEdge e = front.front();
      front.pop_front();
      if (edge_count[ekey(e.u, e.v)] != 1) continue;  // closed meanwhile
      auto hit = bpa_pivot(pts, tree, e.u, e.v, e.opp, e.center, r);
      if (!hit) continue;  // boundary edge
      int k = hit->vertex;
      if (used[k]) {
        // only reconnect through an open (front) vertex
        if (edge_count[ekey(e.u, k)] >= 2 || edge_count[ekey(e.v, k)] >= 2)
          continue;
      }
      if (tri_exists(e.u, e.v, k)) continue;
      add_triangle(e.u, e.v, k, hit->center);
    }
  };

  // seed-and-expand: lowest-index unused point first
  for (int seed = 0; seed < n; ++seed) {
    if (used[seed]) continue;
    if (mesh.triangles.size() >= max_triangles) break;
    auto nbrs = tree.radius({pts[seed].x, pts[seed].y, pts[seed].z}, 2.0 * r,
                            seed);
    bool planted = false;
    for (std::size_t a = 0; a < nbrs.size() && !planted; ++a) {
      if (used[nbrs[a]]) continue;
      for (std::size_t b = a + 1; b < nbrs.size() && !planted; ++b) {
        if (used[nbrs[b]]) continue;
        int q = nbrs[a], t = nbrs[b];
        Vec3 avg_normal = normals[seed] + normals[q] + normals[t];
        auto center = detail_bpa::ball_center(pts[seed], pts[q], pts[t], r,
                                              avg_normal);
        if (!center) continue;
        bool empty = true;
        for (int other : tree.radius({center->x, center->y, center->z},
                                     r * (1.0 - 1e-9))) {
          if (other != seed && other != q && other != t) {
            empty = false;
            break;
          }
        }
        if (!empty) continue;
        // wind the seed so its normal agrees with the vertex normals
        Vec3 tn = (pts[q] - pts[seed]).cross(pts[t] - pts[seed]);
        if (tn.dot(avg_normal) >= 0.0)
          add_triangle(seed, q, t, *center);
        else
          add_triangle(seed, t, q, *center);
        planted = true;
      }
    }
    if (planted) expand_front();
  }
  return mesh;
}

}  // namespace leafsurf
