#pragma once

// Core data model shared by every reconstruction method: 3D points,
// point clouds, indexed triangle meshes and rigid frames.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace leafsurf {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (carries a 1-based line number when known).
class FormatError : public Error {
public:
  FormatError(const std::string& msg, long line = -1)
      : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  long line() const { return line_; }

private:
  long line_;
};

class EmptyInputError : public Error {
public:
  using Error::Error;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
public:
  using Error::Error;
};

/// Singular or non-converging linear algebra; never silently patched over.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Query outside a parametric domain.
class DomainError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small vectors

struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 operator+(Vec3 o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(Vec3 o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(Vec3 o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(Vec3 o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  double dot(Vec3 o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(Vec3 o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm2() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm2()); }
  Vec3 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{0.0, 0.0, 0.0};
  }
  Vec2 xy() const { return {x, y}; }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Vec3 operator*(double s, Vec3 v) { return v * s; }

inline double dist(Vec3 a, Vec3 b) { return (a - b).norm(); }
inline double dist2(Vec3 a, Vec3 b) { return (a - b).norm2(); }

// ---------------------------------------------------------------------------
// Point clouds

struct PointCloud {
  std::vector<Vec3> points;
  std::string id;  // opaque label, e.g. "pheno4d/tomato/leaf3"

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Throws if the cloud is empty or carries non-finite coordinates.
inline void validate(const PointCloud& cloud) {
  if (cloud.points.empty()) throw EmptyInputError("point cloud is empty");
  for (const Vec3& p : cloud.points)
    if (!p.finite()) throw FormatError("non-finite coordinate in point cloud");
}

struct OrientedPointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // unit length, one per point
  std::string id;

  std::size_t size() const { return points.size(); }
};

inline void validate(const OrientedPointCloud& cloud) {
  if (cloud.points.empty()) throw EmptyInputError("oriented cloud is empty");
  if (cloud.normals.size() != cloud.points.size())
    throw ParameterError("normal count does not match point count");
  for (const Vec3& n : cloud.normals) {
    if (!n.finite() || std::abs(n.norm() - 1.0) > 1e-6)
      throw ParameterError("normals must be unit length");
  }
}

// ---------------------------------------------------------------------------
// Triangle mesh

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  bool empty() const { return triangles.empty(); }
};

inline void validate(const TriangleMesh& mesh) {
  const std::uint32_t n = static_cast<std::uint32_t>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    if (t[0] >= n || t[1] >= n || t[2] >= n)
      throw ParameterError("triangle index out of range");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw ParameterError("triangle with repeated vertex indices");
  }
  for (const Vec3& v : mesh.vertices)
    if (!v.finite()) throw ParameterError("non-finite mesh vertex");
}

/// Total surface area: sum of 0.5 * |(v1-v0) x (v2-v0)| over all triangles.
/// Geometrically degenerate (zero-area) triangles contribute nothing.
inline double mesh_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

/// Edges incident to exactly one triangle. Zero for watertight meshes.
inline std::size_t boundary_edge_count(const TriangleMesh& mesh) {
  std::vector<std::pair<std::uint64_t, int>> edges;
  edges.reserve(mesh.triangles.size() * 3);
  auto key = [](std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  for (const auto& t : mesh.triangles) {
    edges.emplace_back(key(t[0], t[1]), 0);
    edges.emplace_back(key(t[1], t[2]), 0);
    edges.emplace_back(key(t[2], t[0]), 0);
  }
  std::sort(edges.begin(), edges.end());
  std::size_t boundary = 0;
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && edges[j].first == edges[i].first) ++j;
    if (j - i == 1) ++boundary;
    i = j;
  }
  return boundary;
}

/// Boundary edges as vertex index pairs (each incident to exactly one triangle).
inline std::vector<std::pair<std::uint32_t, std::uint32_t>>
boundary_edges(const TriangleMesh& mesh) {
  std::vector<std::uint64_t> edges;
  edges.reserve(mesh.triangles.size() * 3);
  auto key = [](std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  for (const auto& t : mesh.triangles) {
    edges.push_back(key(t[0], t[1]));
    edges.push_back(key(t[1], t[2]));
    edges.push_back(key(t[2], t[0]));
  }
  std::sort(edges.begin(), edges.end());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && edges[j] == edges[i]) ++j;
    if (j - i == 1)
      out.emplace_back(static_cast<std::uint32_t>(edges[i] >> 32),
                       static_cast<std::uint32_t>(edges[i] & 0xffffffffu));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rigid frame (PCA alignment result)

struct Mat3 {
  // row-major
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Vec3 operator*(Vec3 v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }
  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

/// Rigid map into the leaf-local frame: p_local = rotation * (p - centroid).
struct Frame {
  Mat3 rotation;
  Vec3 centroid;

  Vec3 to_local(Vec3 p) const { return rotation * (p - centroid); }
  Vec3 to_world(Vec3 q) const { return rotation.transposed() * q + centroid; }
};

// ---------------------------------------------------------------------------
// Bounding boxes

struct Bounds3 {
  Vec3 min{std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
  Vec3 max{-std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};

  void expand(Vec3 p) {
    min.x = std::min(min.x, p.x); max.x = std::max(max.x, p.x);
    min.y = std::min(min.y, p.y); max.y = std::max(max.y, p.y);
    min.z = std::min(min.z, p.z); max.z = std::max(max.z, p.z);
  }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
  bool contains(Vec3 p, double slack = 0.0) const {
    return p.x >= min.x - slack && p.x <= max.x + slack &&
           p.y >= min.y - slack && p.y <= max.y + slack &&
           p.z >= min.z - slack && p.z <= max.z + slack;
  }
};

inline Bounds3 bounding_box(const std::vector<Vec3>& pts) {
  Bounds3 b;
  for (Vec3 p : pts) b.expand(p);
  return b;
}

}  // namespace leafsurf
