#pragma once

// Point-cloud and mesh file I/O.
//
// Clouds:  ASCII xyz (one point per line, 3+ whitespace-separated columns,
//          extra columns ignored) and ASCII PLY with at least x,y,z vertex
//          properties (nx,ny,nz picked up when present).
// Meshes:  OBJ (v/f records) and ASCII PLY.
//
// Coordinates are written with 9 significant digits.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "leafsurf/geo.hpp"

namespace leafsurf {

enum class CloudFormat { XyzText, PlyAscii };
enum class MeshFormat { Obj, PlyAscii };

inline CloudFormat cloud_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".ply") return CloudFormat::PlyAscii;
  return CloudFormat::XyzText;  // .xyz, .txt, anything else
}

inline MeshFormat mesh_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".ply") return MeshFormat::PlyAscii;
  return MeshFormat::Obj;
}

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

inline std::string fmt_coord(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct PlyVertexData {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty unless nx,ny,nz present
  std::vector<std::array<std::uint32_t, 3>> faces;
};

inline PlyVertexData read_ply_ascii(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  long line_no = 0;
  auto next_line = [&](std::string& out) {
    if (!std::getline(in, out)) return false;
    ++line_no;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  };

  if (!next_line(line) || line != "ply") throw FormatError("missing ply magic", line_no);

  long n_vertex = -1, n_face = 0;
  std::vector<std::string> vertex_props;
  std::string current_element;
  while (next_line(line)) {
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "end_header") break;
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string f;
      ss >> f;
      if (f != "ascii") throw FormatError("only ascii ply is supported", line_no);
    } else if (kw == "element") {
      std::string name;
      long count;
      ss >> name >> count;
      if (!ss) throw FormatError("bad element declaration", line_no);
      current_element = name;
      if (name == "vertex") n_vertex = count;
      else if (name == "face") n_face = count;
    } else if (kw == "property") {
      if (current_element == "vertex") {
        std::string type, name;
        ss >> type >> name;
        if (type == "list") throw FormatError("list property on vertex element", line_no);
        vertex_props.push_back(name);
      }
    }
  }
  if (n_vertex < 0) throw FormatError("ply header has no vertex element", line_no);

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (std::size_t i = 0; i < vertex_props.size(); ++i) {
    const std::string& p = vertex_props[i];
    if (p == "x") ix = static_cast<int>(i);
    else if (p == "y") iy = static_cast<int>(i);
    else if (p == "z") iz = static_cast<int>(i);
    else if (p == "nx") inx = static_cast<int>(i);
    else if (p == "ny") iny = static_cast<int>(i);
    else if (p == "nz") inz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw FormatError("ply vertex element lacks x,y,z properties");

  PlyVertexData data;
  data.points.reserve(n_vertex);
  bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

  std::vector<double> row(vertex_props.size());
  for (long v = 0; v < n_vertex; ++v) {
    if (!next_line(line)) throw FormatError("unexpected end of vertex list", line_no);
    std::istringstream ss(line);
    std::string tok;
    for (std::size_t c = 0; c < vertex_props.size(); ++c) {
      if (!(ss >> tok) || !parse_double(tok, row[c]))
        throw FormatError("bad vertex record", line_no);
    }
    data.points.push_back({row[ix], row[iy], row[iz]});
    if (has_normals) data.normals.push_back({row[inx], row[iny], row[inz]});
  }
  for (long f = 0; f < n_face; ++f) {
    if (!next_line(line)) throw FormatError("unexpected end of face list", line_no);
    std::istringstream ss(line);
    long n, a, b, c;
    if (!(ss >> n >> a >> b >> c) || n != 3)
      throw FormatError("only triangular faces are supported", line_no);
    data.faces.push_back({static_cast<std::uint32_t>(a),
                          static_cast<std::uint32_t>(b),
                          static_cast<std::uint32_t>(c)});
  }
  return data;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Clouds

inline PointCloud load_cloud(const std::filesystem::path& path,
                             std::optional<CloudFormat> format = {}) {
  CloudFormat fmt = format.value_or(cloud_format_from_path(path));
  PointCloud cloud;
  cloud.id = path.stem().string();

  if (fmt == CloudFormat::PlyAscii) {
    auto data = detail::read_ply_ascii(path);
    cloud.points = std::move(data.points);
  } else {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream ss(line);
      std::string a, b, c;
      if (!(ss >> a)) continue;  // blank line
      if (a[0] == '#') continue;
      if (!(ss >> b >> c)) throw FormatError("expected 3 coordinates", line_no);
      Vec3 p;
      if (!detail::parse_double(a, p.x) || !detail::parse_double(b, p.y) ||
          !detail::parse_double(c, p.z))
        throw FormatError("non-numeric or non-finite coordinate", line_no);
      cloud.points.push_back(p);  // extra columns (color, labels) ignored
    }
  }
  if (cloud.points.empty()) throw EmptyInputError("no points in " + path.string());
  return cloud;
}

/// Loads a PLY cloud together with its nx,ny,nz normals.
inline OrientedPointCloud load_oriented_cloud(const std::filesystem::path& path) {
  auto data = detail::read_ply_ascii(path);
  if (data.points.empty()) throw EmptyInputError("no points in " + path.string());
  if (data.normals.size() != data.points.size())
    throw FormatError("ply file carries no per-vertex normals: " + path.string());
  OrientedPointCloud cloud;
  cloud.points = std::move(data.points);
  cloud.normals = std::move(data.normals);
  for (Vec3& n : cloud.normals) n = n.normalized();
  cloud.id = path.stem().string();
  return cloud;
}

inline bool ply_has_normals(const std::filesystem::path& path) {
  try {
    auto data = detail::read_ply_ascii(path);
    return !data.points.empty() && data.normals.size() == data.points.size();
  } catch (const Error&) {
    return false;
  }
}

inline void save_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                       std::optional<CloudFormat> format = {}) {
  CloudFormat fmt = format.value_or(cloud_format_from_path(path));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  if (fmt == CloudFormat::PlyAscii) {
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
        << "\nproperty double x\nproperty double y\nproperty double z\n"
        << "end_header\n";
  }
  for (const Vec3& p : cloud.points)
    out << detail::fmt_coord(p.x) << ' ' << detail::fmt_coord(p.y) << ' '
        << detail::fmt_coord(p.z) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline void save_cloud(const OrientedPointCloud& cloud,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
      << "property double nx\nproperty double ny\nproperty double nz\n"
      << "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const Vec3& n = cloud.normals[i];
    out << detail::fmt_coord(p.x) << ' ' << detail::fmt_coord(p.y) << ' '
        << detail::fmt_coord(p.z) << ' ' << detail::fmt_coord(n.x) << ' '
        << detail::fmt_coord(n.y) << ' ' << detail::fmt_coord(n.z) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Meshes

inline void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path,
                      std::optional<MeshFormat> format = {}) {
  validate(mesh);
  MeshFormat fmt = format.value_or(mesh_format_from_path(path));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());

  if (fmt == MeshFormat::Obj) {
    for (const Vec3& v : mesh.vertices)
      out << "v " << detail::fmt_coord(v.x) << ' ' << detail::fmt_coord(v.y)
          << ' ' << detail::fmt_coord(v.z) << '\n';
    for (const auto& t : mesh.triangles)
      out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  } else {
    out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
        << "\nproperty double x\nproperty double y\nproperty double z\n"
        << "element face " << mesh.triangles.size()
        << "\nproperty list uchar int vertex_indices\nend_header\n";
    for (const Vec3& v : mesh.vertices)
      out << detail::fmt_coord(v.x) << ' ' << detail::fmt_coord(v.y) << ' '
          << detail::fmt_coord(v.z) << '\n';
    for (const auto& t : mesh.triangles)
      out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline TriangleMesh load_mesh(const std::filesystem::path& path,
                              std::optional<MeshFormat> format = {}) {
  MeshFormat fmt = format.value_or(mesh_format_from_path(path));
  TriangleMesh mesh;

  if (fmt == MeshFormat::PlyAscii) {
    auto data = detail::read_ply_ascii(path);
    mesh.vertices = std::move(data.points);
    mesh.triangles = std::move(data.faces);
  } else {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream ss(line);
      std::string kw;
      if (!(ss >> kw)) continue;
      if (kw == "v") {
        std::string a, b, c;
        Vec3 p;
        if (!(ss >> a >> b >> c) || !detail::parse_double(a, p.x) ||
            !detail::parse_double(b, p.y) || !detail::parse_double(c, p.z))
          throw FormatError("bad obj vertex", line_no);
        mesh.vertices.push_back(p);
      } else if (kw == "f") {
        std::array<std::uint32_t, 3> tri;
        for (int i = 0; i < 3; ++i) {
          std::string tok;
          if (!(ss >> tok)) throw FormatError("obj face needs 3 indices", line_no);
          // strip optional /vt/vn suffixes
          auto slash = tok.find('/');
          if (slash != std::string::npos) tok = tok.substr(0, slash);
          long idx = 0;
          try {
            idx = std::stol(tok);
          } catch (...) {
            throw FormatError("bad obj face index", line_no);
          }
          if (idx < 1) throw FormatError("obj face index must be >= 1", line_no);
          tri[i] = static_cast<std::uint32_t>(idx - 1);
        }
        mesh.triangles.push_back(tri);
      }
    }
  }
  validate(mesh);
  return mesh;
}

}  // namespace leafsurf
