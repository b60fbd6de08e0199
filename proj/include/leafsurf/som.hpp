#pragma once

// Self-organizing map surface fitting: a 2D lattice of neurons adapts in 3D
// to the cloud by competitive learning. For each presented sample x the
// best-matching neuron c moves (with its lattice neighbors) toward x:
//   m_i <- m_i + h_ci (x - m_i),  h_ci = alpha(t) * exp(-d_lat(c,i)^2 / 2 sigma(t)^2)
// Each update is a convex combination, so weights never leave the convex
// hull of the initial lattice and the data.

#include <cstdint>
#include <numeric>
#include <vector>

#include "leafsurf/geo.hpp"

namespace leafsurf {

struct SomLattice {
  int rows = 0, cols = 0;
  std::vector<Vec3> weights;  // row-major

  const Vec3& at(int r, int c) const { return weights[r * cols + c]; }
  Vec3& at(int r, int c) { return weights[r * cols + c]; }
  int size() const { return rows * cols; }
};

struct TrainingSchedule {
  int epochs = 100;
  double alpha0 = 0.5, alpha1 = 0.01;  // linear decay
  double sigma0 = 0.0, sigma1 = 0.5;   // exponential decay; 0 -> max(rows,cols)/2
  bool gaussian = true;                // false: hard cutoff h = alpha inside sigma
  double cutoff_sigmas = 3.0;          // neighborhood truncation
  std::uint64_t seed = 42;

  double alpha(int t) const {
    if (epochs <= 1) return alpha0;
    double f = static_cast<double>(t) / (epochs - 1);
    return alpha0 + (alpha1 - alpha0) * std::min(1.0, f);
  }
  double sigma(int t, int rows, int cols) const {
    double s0 = sigma0 > 0.0 ? sigma0 : std::max(rows, cols) / 2.0;
    if (epochs <= 1) return s0;
    double f = static_cast<double>(t) / (epochs - 1);
    return s0 * std::pow(sigma1 / s0, std::min(1.0, f));
  }
};

/// Neurons on a regular grid spanning the aligned cloud's uv bounding box at
/// the median height.
inline SomLattice init_lattice(const PointCloud& aligned, int rows, int cols) {
  validate(aligned);
  if (rows < 2 || cols < 2) throw ParameterError("lattice must be at least 2x2");

  double xmin = aligned.points[0].x, xmax = xmin;
  double ymin = aligned.points[0].y, ymax = ymin;
  std::vector<double> zs;
  zs.reserve(aligned.points.size());
  for (const Vec3& p : aligned.points) {
    xmin = std::min(xmin, p.x); xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y); ymax = std::max(ymax, p.y);
    zs.push_back(p.z);
  }
  if (xmax - xmin <= 0.0 || ymax - ymin <= 0.0)
    throw DegenerateGeometryError("cloud has zero uv extent");
  std::nth_element(zs.begin(), zs.begin() + zs.size() / 2, zs.end());
  double zmed = zs[zs.size() / 2];

  SomLattice lat;
  lat.rows = rows;
  lat.cols = cols;
  lat.weights.resize(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      lat.at(r, c) = {xmin + (xmax - xmin) * r / (rows - 1),
                      ymin + (ymax - ymin) * c / (cols - 1), zmed};
  return lat;
}

/// Index of the best-matching (closest) neuron; ties break to the lowest index.
inline int find_bmu(const SomLattice& lat, Vec3 x) {
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  const int n = lat.size();
  for (int i = 0; i < n; ++i) {
    double d2 = dist2(lat.weights[i], x);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

/// One presentation: the winner and its lattice neighborhood move toward x.
inline void som_update(SomLattice& lat, Vec3 x, int t,
                       const TrainingSchedule& sched) {
  const int c = find_bmu(lat, x);
  const int cr = c / lat.cols, cc = c % lat.cols;
  const double alpha = sched.alpha(t);
  const double sigma = sched.sigma(t, lat.rows, lat.cols);
  const double cut2 = sched.cutoff_sigmas * sched.cutoff_sigmas * sigma * sigma;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  int reach = static_cast<int>(std::ceil(sched.cutoff_sigmas * sigma));
  int r0 = std::max(0, cr - reach), r1 = std::min(lat.rows - 1, cr + reach);
  int c0 = std::max(0, cc - reach), c1 = std::min(lat.cols - 1, cc + reach);
  for (int r = r0; r <= r1; ++r) {
    for (int col = c0; col <= c1; ++col) {
      double d2 = static_cast<double>((r - cr) * (r - cr) +
                                      (col - cc) * (col - cc));
      if (d2 > cut2) continue;
      double h = sched.gaussian ? alpha * std::exp(-d2 * inv2s2) : alpha;
      Vec3& m = lat.at(r, col);
      m += h * (x - m);
    }
  }
}

/// Mean distance from each point to its best-matching neuron.
inline double quantization_error(const SomLattice& lat, const PointCloud& cloud) {
  double sum = 0.0;
  for (const Vec3& p : cloud.points)
    sum += dist(lat.weights[find_bmu(lat, p)], p);
  return sum / static_cast<double>(cloud.points.size());
}

/// Full training run: per-epoch random-shuffle presentation order with a
/// fixed seed, so identical inputs replay to bitwise-identical lattices.
inline SomLattice som_train(SomLattice lat, const PointCloud& cloud,
                            const TrainingSchedule& sched) {
  validate(cloud);
  if (sched.epochs < 1) throw ParameterError("epochs must be >= 1");
  if (!(sched.alpha0 > 0.0) || sched.alpha0 > 1.0 || sched.alpha1 > sched.alpha0)
    throw ParameterError("alpha schedule must be non-increasing in (0,1]");

  const std::size_t n = cloud.points.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);

  // xorshift shuffle: self-contained so replay is platform-stable
  std::uint64_t state = sched.seed * 6364136223846793005ull + 1442695040888963407ull;
  auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };

  for (int epoch = 0; epoch < sched.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      std::size_t j = next() % (i + 1);
      std::swap(order[i], order[j]);
    }
    for (std::size_t i = 0; i < n; ++i)
      som_update(lat, cloud.points[order[i]], epoch, sched);
  }
  return lat;
}

/// Each lattice quad split into two triangles: (rows-1)*(cols-1)*2 total.
inline TriangleMesh lattice_to_mesh(const SomLattice& lat) {
  if (lat.rows < 2 || lat.cols < 2 ||
      static_cast<int>(lat.weights.size()) != lat.size())
    throw ParameterError("invalid lattice");
  TriangleMesh mesh;
  mesh.vertices = lat.weights;
  mesh.triangles.reserve(static_cast<std::size_t>(lat.rows - 1) *
                         (lat.cols - 1) * 2);
  for (int r = 0; r + 1 < lat.rows; ++r) {
    for (int c = 0; c + 1 < lat.cols; ++c) {
      auto id = [&](int rr, int cc) {
        return static_cast<std::uint32_t>(rr * lat.cols + cc);
      };
      mesh.triangles.push_back({id(r, c), id(r + 1, c), id(r + 1, c + 1)});
      mesh.triangles.push_back({id(r, c), id(r + 1, c + 1), id(r, c + 1)});
    }
  }
  return mesh;
}

}  // namespace leafsurf
