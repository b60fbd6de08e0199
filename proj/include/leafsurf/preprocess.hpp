#pragma once

// Shared preprocessing: statistical outlier removal, PCA alignment into a
// leaf-local frame, and k-NN normal estimation with consistent orientation.

#include <Eigen/Dense>
#include <algorithm>
#include <queue>
#include <vector>

#include "leafsurf/geo.hpp"
#include "leafsurf/kdtree.hpp"

namespace leafsurf {

/// Keep-mask of statistical outlier removal: points whose mean distance to
/// their k nearest neighbors is at most mean + std_ratio * std of that
/// statistic over the whole cloud.
inline std::vector<char> statistical_outlier_mask(const PointCloud& cloud,
                                                  int k, double std_ratio) {
  validate(cloud);
  const std::size_t n = cloud.points.size();
  if (k < 1) throw ParameterError("outlier removal needs k >= 1");
  if (static_cast<std::size_t>(k) >= n)
    throw ParameterError("outlier removal needs k < point count");
  if (std_ratio <= 0.0) throw ParameterError("std_ratio must be > 0");

  KdTree3 tree = build_kdtree(cloud.points);
  std::vector<double> mean_knn(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> q{cloud.points[i].x, cloud.points[i].y, cloud.points[i].z};
    auto nbrs = tree.knn(q, k, static_cast<int>(i));
    double sum = 0.0;
    for (int j : nbrs) sum += dist(cloud.points[i], cloud.points[j]);
    mean_knn[i] = sum / static_cast<double>(nbrs.size());
  }

  double mean = 0.0;
  for (double d : mean_knn) mean += d;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double d : mean_knn) var += (d - mean) * (d - mean);
  double stddev = std::sqrt(var / static_cast<double>(n));

  // Small slack so zero-variance clouds (perfect grids) keep every point.
  const double cutoff = mean + std_ratio * stddev + 1e-12 * (mean + 1.0);

  std::vector<char> keep(n, 0);
  for (std::size_t i = 0; i < n; ++i) keep[i] = mean_knn[i] <= cutoff;
  return keep;
}

inline PointCloud remove_statistical_outliers(const PointCloud& cloud, int k = 20,
                                              double std_ratio = 2.0) {
  std::vector<char> keep = statistical_outlier_mask(cloud, k, std_ratio);
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    if (keep[i]) out.points.push_back(cloud.points[i]);
  return out;
}

namespace detail {

inline Eigen::Matrix3d covariance(const std::vector<Vec3>& pts, Vec3 centroid) {
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : pts) {
    Eigen::Vector3d d(p.x - centroid.x, p.y - centroid.y, p.z - centroid.z);
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(pts.size());
}

}  // namespace detail

/// Rotates the cloud into its principal frame: axes ordered by descending
/// variance so a roughly planar leaf ends up flat in the uv-plane with the
/// w (third) axis carrying the least variance. Axis signs are fixed by
/// requiring non-negative skewness, which makes the alignment deterministic.
inline std::pair<PointCloud, Frame> pca_align(const PointCloud& cloud) {
  validate(cloud);
  const std::size_t n = cloud.points.size();
  if (n < 3) throw DegenerateGeometryError("pca_align needs at least 3 points");

  Vec3 centroid{0, 0, 0};
  for (const Vec3& p : cloud.points) centroid += p;
  centroid = centroid / static_cast<double>(n);

  Eigen::Matrix3d cov = detail::covariance(cloud.points, centroid);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericalError("pca_align eigendecomposition failed");

  // Eigen returns ascending eigenvalues; we want descending variance.
  Eigen::Vector3d evals = eig.eigenvalues().reverse();
  Eigen::Matrix3d axes;
  for (int i = 0; i < 3; ++i) axes.col(i) = eig.eigenvectors().col(2 - i);

  double scale2 = evals(0);
  if (scale2 <= 0.0 || evals(1) <= 1e-12 * scale2)
    throw DegenerateGeometryError("points are collinear or coincident");

  // Deterministic sign: flip each axis so the skewness of the projected
  // coordinates is non-negative.
  std::array<double, 3> skew{};
  for (int a = 0; a < 3; ++a) {
    double s = 0.0;
    for (const Vec3& p : cloud.points) {
      Eigen::Vector3d d(p.x - centroid.x, p.y - centroid.y, p.z - centroid.z);
      double t = axes.col(a).dot(d);
      s += t * t * t;
    }
    skew[a] = s;
    if (s < 0.0) {
      axes.col(a) = -axes.col(a);
      skew[a] = -s;
    }
  }
  // Keep a proper rotation: if needed, flip the axis whose skewness is
  // closest to zero (the least meaningful sign).
  if (axes.determinant() < 0.0) {
    int flip = static_cast<int>(std::min_element(skew.begin(), skew.end()) -
                                skew.begin());
    axes.col(flip) = -axes.col(flip);
  }

  Frame frame;
  frame.centroid = centroid;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) frame.rotation(r, c) = axes(c, r);  // rows = axes

  PointCloud aligned;
  aligned.id = cloud.id;
  aligned.points.reserve(n);
  for (const Vec3& p : cloud.points) aligned.points.push_back(frame.to_local(p));
  return {std::move(aligned), frame};
}

/// Per-point normals from local k-NN covariance (least-variance eigenvector),
/// oriented consistently by propagation along a minimum spanning tree of the
/// neighbor graph, then globally flipped so the mean normal points along the
/// cloud's PCA third axis.
inline OrientedPointCloud estimate_normals(const PointCloud& cloud, int k = 20) {
  validate(cloud);
  const std::size_t n = cloud.points.size();
  if (k < 3) throw ParameterError("estimate_normals needs k >= 3");
  if (static_cast<std::size_t>(k) >= n)
    throw ParameterError("estimate_normals needs k < point count");

  Vec3 centroid{0, 0, 0};
  for (const Vec3& p : cloud.points) centroid += p;
  centroid = centroid / static_cast<double>(n);
  Eigen::Matrix3d gcov = detail::covariance(cloud.points, centroid);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> geig(gcov);
  Eigen::Vector3d global_normal = geig.eigenvectors().col(0);  // least variance

  KdTree3 tree = build_kdtree(cloud.points);
  std::vector<Vec3> normals(n);
  std::vector<std::vector<int>> nbrs(n);

  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> q{cloud.points[i].x, cloud.points[i].y, cloud.points[i].z};
    nbrs[i] = tree.knn(q, k, static_cast<int>(i));

    Vec3 lc{0, 0, 0};
    for (int j : nbrs[i]) lc += cloud.points[j];
    lc += cloud.points[i];
    lc = lc / static_cast<double>(nbrs[i].size() + 1);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    auto add = [&](const Vec3& p) {
      Eigen::Vector3d d(p.x - lc.x, p.y - lc.y, p.z - lc.z);
      cov += d * d.transpose();
    };
    add(cloud.points[i]);
    for (int j : nbrs[i]) add(cloud.points[j]);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d nv = eig.eigenvectors().col(0);
    double nn = nv.norm();
    // Degenerate neighborhoods (coincident points) fall back to the global
    // PCA normal so the unit-length contract always holds.
    if (eig.info() != Eigen::Success || nn < 0.5 ||
        !std::isfinite(nv(0) + nv(1) + nv(2)) || eig.eigenvalues().sum() <= 0.0)
      nv = global_normal;
    normals[i] = Vec3{nv(0), nv(1), nv(2)}.normalized();
    if (normals[i].norm() < 0.5) normals[i] = {0, 0, 1};
  }

  // Consistent orientation: Prim-style MST over the k-NN graph, edge weight
  // 1 - |n_i . n_j|, flipping each newly reached normal to agree with its
  // parent.
  std::vector<char> visited(n, 0);
  using QEntry = std::pair<double, std::pair<int, int>>;  // (weight, (from, to))
  std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> pq;
  std::size_t reached = 0;

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (visited[seed]) continue;
    visited[seed] = 1;
    ++reached;
    for (int j : nbrs[seed])
      pq.push({1.0 - std::abs(normals[seed].dot(normals[j])),
               {static_cast<int>(seed), j}});
    while (!pq.empty()) {
      auto [w, edge] = pq.top();
      pq.pop();
      auto [from, to] = edge;
      if (visited[to]) continue;
      visited[to] = 1;
      ++reached;
      if (normals[from].dot(normals[to]) < 0.0) normals[to] = -normals[to];
      for (int j : nbrs[to])
        if (!visited[j])
          pq.push({1.0 - std::abs(normals[to].dot(normals[j])), {to, j}});
    }
  }
  (void)reached;

  // Global flip: mean normal toward the viewpoint above the PCA plane.
  Vec3 mean_normal{0, 0, 0};
  for (const Vec3& nrm : normals) mean_normal += nrm;
  Vec3 up{global_normal(0), global_normal(1), global_normal(2)};
  if (mean_normal.dot(up) < 0.0)
    for (Vec3& nrm : normals) nrm = -nrm;

  OrientedPointCloud out;
  out.points = cloud.points;
  out.normals = std::move(normals);
  out.id = cloud.id;
  return out;
}

}  // namespace leafsurf
