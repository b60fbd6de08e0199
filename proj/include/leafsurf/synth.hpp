#pragma once

// Synthetic oriented clouds with exactly known surface areas, used as
// reconstruction oracles. Sampling mimics scanner output (stratified jitter
// on patches, Fibonacci spiral on spheres) so coverage gaps stay bounded;
// the generator is self-contained and reproducible from its seed on any
// platform.

#include <cmath>
#include <string>
#include <vector>

#include "leafsurf/geo.hpp"

namespace leafsurf {

enum class ShapeKind { Plane, Paraboloid, Sphere, HolePlane, DecimatedPlane };

struct SyntheticShape {
  ShapeKind kind = ShapeKind::Plane;
  double size = 10.0;        // patch side length
  double radius = 1.0;       // sphere radius / hole radius
  double parab_coef = 4.0;   // paraboloid z = (x^2 + y^2) / parab_coef
  double noise_sigma = 0.0;  // Gaussian displacement along the normal
  int samples = 10000;
};

struct SynthResult {
  OrientedPointCloud cloud;
  double analytic_area = 0.0;  // of the noise-free surface
};

inline ShapeKind parse_shape(const std::string& s) {
  if (s == "plane") return ShapeKind::Plane;
  if (s == "paraboloid") return ShapeKind::Paraboloid;
  if (s == "sphere") return ShapeKind::Sphere;
  if (s == "hole-plane" || s == "holeplane") return ShapeKind::HolePlane;
  if (s == "decimated-plane" || s == "decimatedplane")
    return ShapeKind::DecimatedPlane;
  throw ParameterError("unknown shape: " + s);
}

inline std::string shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Plane: return "plane";
    case ShapeKind::Paraboloid: return "paraboloid";
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::HolePlane: return "hole-plane";
    case ShapeKind::DecimatedPlane: return "decimated-plane";
  }
  return "?";
}

namespace detail_synth {

// xorshift64*; uniform doubles from the top 53 bits
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed * 2685821657736338717ull + 1) {
    for (int i = 0; i < 4; ++i) next();
  }
  std::uint64_t next() {
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    return state * 2685821657736338717ull;
  }
  double uniform() {  // [0, 1)
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }
  double normal() {  // Box-Muller
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

/// Adaptive Simpson quadrature in 1D.
template <typename F>
double adaptive_simpson(F f, double a, double b, double fa, double fm, double fb,
                        double eps, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15 * eps)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, eps / 2, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, eps / 2, depth - 1);
}

template <typename F>
double integrate(F f, double a, double b, double eps = 1e-10) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return adaptive_simpson(f, a, b, fa, fm, fb, eps, 40);
}

}  // namespace detail_synth

/// Surface area of z = (x^2+y^2)/c over the centered square of side `side`,
/// by adaptive quadrature of sqrt(1 + |grad z|^2).
inline double paraboloid_patch_area(double side, double coef) {
  double h = side / 2.0;
  auto row = [&](double y) {
    auto f = [&](double x) {
      double zx = 2.0 * x / coef, zy = 2.0 * y / coef;
      return std::sqrt(1.0 + zx * zx + zy * zy);
    };
    return detail_synth::integrate(f, -h, h);
  };
  return detail_synth::integrate(row, -h, h, 1e-9);
}

inline SynthResult synth_generate(const SyntheticShape& shape,
                                  std::uint64_t seed) {
  if (shape.samples < 4) throw ParameterError("need at least 4 samples");
  if (shape.size <= 0.0 || shape.radius <= 0.0 || shape.parab_coef <= 0.0)
    throw ParameterError("shape dimensions must be positive");
  if (shape.noise_sigma < 0.0) throw ParameterError("noise sigma must be >= 0");

  detail_synth::Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  SynthResult out;
  OrientedPointCloud& cloud = out.cloud;

  auto push = [&](Vec3 p, Vec3 n) {
    if (shape.noise_sigma > 0.0) p += (shape.noise_sigma * rng.normal()) * n;
    cloud.points.push_back(p);
    cloud.normals.push_back(n);
  };

  switch (shape.kind) {
    case ShapeKind::Plane:
    case ShapeKind::HolePlane:
    case ShapeKind::DecimatedPlane: {
      const double side = shape.size;
      const double hole_r = shape.radius;
      // stratified jitter over a near-square cell grid
      int gx = std::max(2, static_cast<int>(std::lround(std::sqrt(
                               static_cast<double>(shape.samples)))));
      int gy = std::max(2, (shape.samples + gx - 1) / gx);
      double cx = side / gx, cy = side / gy;
      for (int i = 0; i < gx; ++i) {
        for (int j = 0; j < gy; ++j) {
          double x = (i + rng.uniform()) * cx - side / 2;
          double y = (j + rng.uniform()) * cy - side / 2;
          if (shape.kind == ShapeKind::HolePlane &&
              x * x + y * y < hole_r * hole_r)
            continue;  // punched-out disk
          if (shape.kind == ShapeKind::DecimatedPlane && x > 0.0 &&
              rng.uniform() >= 0.1)
            continue;  // right half decimated 10x
          push({x, y, 0.0}, {0, 0, 1});
        }
      }
      out.analytic_area = side * side;
      if (shape.kind == ShapeKind::HolePlane) {
        if (2.0 * hole_r >= side)
          throw ParameterError("hole does not fit in the plane");
        out.analytic_area -= M_PI * hole_r * hole_r;
      }
      break;
    }
    case ShapeKind::Sphere: {
      const double r = shape.radius;
      const double golden = M_PI * (3.0 - std::sqrt(5.0));
      // Fibonacci spiral with a small tangential jitter
      for (int i = 0; i < shape.samples; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / shape.samples;
        double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        double th = golden * i + 0.2 * rng.uniform();
        Vec3 n{rho * std::cos(th), rho * std::sin(th), z};
        push(n * r, n);
      }
      out.analytic_area = 4.0 * M_PI * r * r;
      break;
    }
    case ShapeKind::Paraboloid: {
      const double side = shape.size;
      int gx = std::max(2, static_cast<int>(std::lround(std::sqrt(
                               static_cast<double>(shape.samples)))));
      int gy = std::max(2, (shape.samples + gx - 1) / gx);
      double cx = side / gx, cy = side / gy;
      for (int i = 0; i < gx; ++i) {
        for (int j = 0; j < gy; ++j) {
          double x = (i + rng.uniform()) * cx - side / 2;
          double y = (j + rng.uniform()) * cy - side / 2;
          double z = (x * x + y * y) / shape.parab_coef;
          Vec3 n = Vec3{-2 * x / shape.parab_coef, -2 * y / shape.parab_coef, 1.0}
                       .normalized();
          push({x, y, z}, n);
        }
      }
      out.analytic_area = paraboloid_patch_area(side, shape.parab_coef);
      break;
    }
  }
  if (cloud.points.empty()) throw ParameterError("shape produced no samples");
  cloud.id = shape_name(shape.kind);
  return out;
}

}  // namespace leafsurf
