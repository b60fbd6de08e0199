#pragma once

// Static median-split kd-tree for 2D/3D nearest-neighbor queries.
// Built once over an immutable point set; queries are const and
// safe to run concurrently.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "leafsurf/geo.hpp"

namespace leafsurf {

template <int Dim>
class KdTree {
  static_assert(Dim == 2 || Dim == 3);

public:
  using Point = std::array<double, Dim>;

  KdTree() = default;

  explicit KdTree(std::vector<Point> pts) : pts_(std::move(pts)) {
    index_.resize(pts_.size());
    std::iota(index_.begin(), index_.end(), 0);
    if (!index_.empty()) build(0, index_.size(), 0);
  }

  std::size_t size() const { return pts_.size(); }
  const Point& point(int i) const { return pts_[i]; }

  /// Indices of the k nearest points, ascending by (distance, index).
  /// `skip` excludes one index (typically the query point itself).
  std::vector<int> knn(const Point& q, int k, int skip = -1) const {
    Neighbors heap(k);
    if (!index_.empty()) search_knn(0, index_.size(), 0, q, skip, heap);
    return heap.sorted_indices();
  }

  /// Indices of points with distance <= radius, ascending by (distance, index).
  std::vector<int> radius(const Point& q, double r, int skip = -1) const {
    std::vector<std::pair<double, int>> hits;
    if (!index_.empty()) search_radius(0, index_.size(), 0, q, r * r, skip, hits);
    std::sort(hits.begin(), hits.end());
    std::vector<int> out;
    out.reserve(hits.size());
    for (auto& h : hits) out.push_back(h.second);
    return out;
  }

  /// Squared distance to the nearest point (excluding `skip`).
  double nearest_dist2(const Point& q, int skip = -1) const {
    Neighbors heap(1);
    if (!index_.empty()) search_knn(0, index_.size(), 0, q, skip, heap);
    return heap.worst();
  }

  static double dist2(const Point& a, const Point& b) {
    double s = 0.0;
    for (int d = 0; d < Dim; ++d) {
      double t = a[d] - b[d];
      s += t * t;
    }
    return s;
  }

private:
  // Bounded max-heap of (dist2, index) keeping the k best candidates.
  struct Neighbors {
    explicit Neighbors(int k) : cap(static_cast<std::size_t>(k)) {}

    void offer(double d2, int idx) {
      if (heap.size() < cap) {
        heap.emplace_back(d2, idx);
        std::push_heap(heap.begin(), heap.end());
      } else if (std::make_pair(d2, idx) < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = {d2, idx};
        std::push_heap(heap.begin(), heap.end());
      }
    }
    bool full() const { return heap.size() == cap; }
    double worst() const {
      return full() ? heap.front().first
                    : std::numeric_limits<double>::infinity();
    }
    std::vector<int> sorted_indices() {
      std::sort(heap.begin(), heap.end());
      std::vector<int> out;
      out.reserve(heap.size());
      for (auto& h : heap) out.push_back(h.second);
      return out;
    }

    std::size_t cap;
    std::vector<std::pair<double, int>> heap;
  };

  void build(std::size_t lo, std::size_t hi, int depth) {
    if (hi - lo <= kLeafSize) return;
    std::size_t mid = (lo + hi) / 2;
    int axis = depth % Dim;
    std::nth_element(index_.begin() + lo, index_.begin() + mid,
                     index_.begin() + hi, [&](int a, int b) {
                       return pts_[a][axis] != pts_[b][axis]
                                  ? pts_[a][axis] < pts_[b][axis]
                                  : a < b;
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void search_knn(std::size_t lo, std::size_t hi, int depth, const Point& q,
                  int skip, Neighbors& heap) const {
    if (hi - lo <= kLeafSize) {
      for (std::size_t i = lo; i < hi; ++i) {
        int idx = index_[i];
        if (idx == skip) continue;
        heap.offer(dist2(pts_[idx], q), idx);
      }
      return;
    }
    std::size_t mid = (lo + hi) / 2;
    int axis = depth % Dim;
    int idx = index_[mid];
    if (idx != skip) heap.offer(dist2(pts_[idx], q), idx);
    double delta = q[axis] - pts_[idx][axis];
    if (delta < 0.0) {
      search_knn(lo, mid, depth + 1, q, skip, heap);
      if (delta * delta < heap.worst() || !heap.full())
        search_knn(mid + 1, hi, depth + 1, q, skip, heap);
    } else {
      search_knn(mid + 1, hi, depth + 1, q, skip, heap);
      if (delta * delta < heap.worst() || !heap.full())
        search_knn(lo, mid, depth + 1, q, skip, heap);
    }
  }

  void search_radius(std::size_t lo, std::size_t hi, int depth, const Point& q,
                     double r2, int skip,
                     std::vector<std::pair<double, int>>& hits) const {
    if (hi - lo <= kLeafSize) {
      for (std::size_t i = lo; i < hi; ++i) {
        int idx = index_[i];
        if (idx == skip) continue;
        double d2 = dist2(pts_[idx], q);
        if (d2 <= r2) hits.emplace_back(d2, idx);
      }
      return;
    }
    std::size_t mid = (lo + hi) / 2;
    int axis = depth % Dim;
    int idx = index_[mid];
    if (idx != skip) {
      double d2 = dist2(pts_[idx], q);
      if (d2 <= r2) hits.emplace_back(d2, idx);
    }
    double delta = q[axis] - pts_[idx][axis];
    if (delta < 0.0) {
      search_radius(lo, mid, depth + 1, q, r2, skip, hits);
      if (delta * delta <= r2) search_radius(mid + 1, hi, depth + 1, q, r2, skip, hits);
    } else {
      search_radius(mid + 1, hi, depth + 1, q, r2, skip, hits);
      if (delta * delta <= r2) search_radius(lo, mid, depth + 1, q, r2, skip, hits);
    }
  }

  static constexpr std::size_t kLeafSize = 16;
  std::vector<Point> pts_;
  std::vector<int> index_;
};

using KdTree2 = KdTree<2>;
using KdTree3 = KdTree<3>;

inline KdTree3 build_kdtree(const std::vector<Vec3>& pts) {
  std::vector<std::array<double, 3>> raw(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) raw[i] = {pts[i].x, pts[i].y, pts[i].z};
  return KdTree3(std::move(raw));
}

inline KdTree2 build_kdtree_xy(const std::vector<Vec3>& pts) {
  std::vector<std::array<double, 2>> raw(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) raw[i] = {pts[i].x, pts[i].y};
  return KdTree2(std::move(raw));
}

/// Mean distance from each point to its single nearest neighbor.
inline double mean_nearest_neighbor_distance(const std::vector<Vec3>& pts) {
  if (pts.size() < 2)
    throw ParameterError("need at least 2 points for nearest-neighbor distance");
  KdTree3 tree = build_kdtree(pts);
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::array<double, 3> q{pts[i].x, pts[i].y, pts[i].z};
    sum += std::sqrt(tree.nearest_dist2(q, static_cast<int>(i)));
  }
  return sum / static_cast<double>(pts.size());
}

}  // namespace leafsurf
