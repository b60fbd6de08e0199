#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "leafsurf/delaunay.hpp"
#include "leafsurf/localfit.hpp"
#include "oracles.hpp"

using namespace leafsurf;

TEST_CASE("delaunay of the unit-square corners") {
  std::vector<Vec2> sites{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  Triangulation2D t = delaunay_2d(sites);
  REQUIRE(t.triangles.size() == 2);
  double area = 0.0;
  for (const auto& tr : t.triangles) {
    Vec2 ab = t.sites[tr[1]] - t.sites[tr[0]];
    Vec2 ac = t.sites[tr[2]] - t.sites[tr[0]];
    double a = 0.5 * ab.cross(ac);
    CHECK(a > 0.0);  // positively oriented
    area += a;
  }
  CHECK(area == Catch::Approx(1.0));
}

TEST_CASE("collinear sites raise a degenerate error") {
  std::vector<Vec2> sites{{0, 0}, {1, 1}, {2, 2}};
  CHECK_THROWS_AS(delaunay_2d(sites), DegenerateGeometryError);
}

TEST_CASE("random sites pass the brute-force circumcircle oracle") {
  std::mt19937_64 r(61);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Vec2> sites;
  for (int i = 0; i < 100; ++i) sites.push_back({U(r), U(r)});
  Triangulation2D t = delaunay_2d(sites);
  CHECK(oracles::circumcircle_violations(t.sites, t.triangles) == 0);
  // union of triangles covers the convex hull
  double tri_area = 0.0;
  for (const auto& tr : t.triangles) {
    Vec2 ab = t.sites[tr[1]] - t.sites[tr[0]];
    Vec2 ac = t.sites[tr[2]] - t.sites[tr[0]];
    tri_area += 0.5 * std::abs(ab.cross(ac));
  }
  CHECK(tri_area == Catch::Approx(oracles::convex_hull_area(sites)).margin(1e-9));
}

TEST_CASE("degenerate grids and duplicates triangulate cleanly") {
  std::vector<Vec2> sites;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) sites.push_back({i * 1.0, j * 1.0});
  sites.push_back({5.0, 5.0});  // duplicate
  Triangulation2D t = delaunay_2d(sites);
  CHECK(t.duplicates_removed == 1);
  CHECK(t.sites.size() == 144);
  CHECK(t.triangles.size() == 2 * 144 - 2 - 44);  // hull has all 44 border points
  CHECK(oracles::circumcircle_violations(t.sites, t.triangles) == 0);
}

TEST_CASE("brute-force oracle holds on several site counts") {
  std::mt19937_64 r(67);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int n : {25, 120, 500}) {
    std::vector<Vec2> sites;
    for (int i = 0; i < n; ++i) sites.push_back({U(r), U(r)});
    Triangulation2D t = delaunay_2d(sites);
    CHECK(oracles::circumcircle_violations(t.sites, t.triangles) == 0);
  }
}

TEST_CASE("2.5d reconstruction of an exact planar grid has unit area") {
  PointCloud grid = oracles::grid_patch(1.0, 32);
  TriangleMesh mesh = reconstruct_delaunay25d(grid);
  CHECK(mesh_area(mesh) == Catch::Approx(1.0).margin(1e-6));
  CHECK(mesh.vertex_count() == grid.points.size());
}

TEST_CASE("2.5d on a hemisphere underestimates the true area") {
  // projection to the equatorial plane cannot exceed the disk but the lifted
  // triangles recover part of the slope
  auto sphere = oracles::fibonacci_sphere(30000, 1.0, 71);
  PointCloud hemi;
  for (const Vec3& p : sphere.points)
    if (p.z > 0.02) hemi.points.push_back(p);
  TriangleMesh mesh = reconstruct_delaunay25d(hemi);
  double area = mesh_area(mesh);
  CHECK(area > M_PI);           // strictly more than the flat projection
  CHECK(area < 2.0 * M_PI);     // strictly less than the true hemisphere
}

TEST_CASE("2.5d on stacked sheets connects them incorrectly and overestimates") {
  // two parallel unit-square sheets; the projection interleaves them
  auto bottom = oracles::sample_patch(1.0, 2000, [](double, double) { return 0.0; }, 73);
  auto top = oracles::sample_patch(1.0, 2000, [](double, double) { return 0.05; }, 79);
  PointCloud folded = bottom;
  for (const Vec3& p : top.points) folded.points.push_back(p);

  double single = mesh_area(reconstruct_delaunay25d(bottom));
  double both = mesh_area(reconstruct_delaunay25d(folded));
  CHECK(both > 1.5 * single);  // zig-zag triangles inflate the area
}

TEST_CASE("kernel values match their closed forms") {
  CHECK(gaussian_weight(0.0, 2.0) == 1.0);
  CHECK(gaussian_weight(1.5, 1.5) == Catch::Approx(std::exp(-1.0)).margin(1e-12));
  CHECK(gaussian_weight(3.0, 1.5) == Catch::Approx(std::exp(-4.0)).margin(1e-12));
  CHECK_THROWS_AS(gaussian_weight(1.0, 0.0), ParameterError);

  CHECK(tricube_weight(0.0) == 1.0);
  CHECK(tricube_weight(0.5) == Catch::Approx(0.669921875).margin(1e-12));
  CHECK(tricube_weight(1.0) == 0.0);
  CHECK(tricube_weight(7.0) == 0.0);
}

TEST_CASE("kernels are bounded and monotone non-increasing") {
  double prev_g = 2.0, prev_t = 2.0;
  for (int i = 0; i <= 50; ++i) {
    double d = i * 0.05;
    double g = gaussian_weight(d, 0.8);
    double t = tricube_weight(d);
    CHECK(g > 0.0);
    CHECK(g <= 1.0);
    CHECK(t >= 0.0);
    CHECK(t <= 1.0);
    CHECK(g <= prev_g + 1e-15);
    CHECK(t <= prev_t + 1e-15);
    prev_g = g;
    prev_t = t;
  }
}

TEST_CASE("local quadratic fits reproduce a quadratic surface exactly") {
  auto cloud = oracles::sample_patch(
      2.0, 4000, [](double x, double y) { return x * x + y * y; }, 83);
  for (auto kernel : {KernelKind::Gaussian, KernelKind::Tricube}) {
    LocalFitConfig cfg;
    cfg.kernel = kernel;
    cfg.poly_degree = 2;
    for (Vec2 q : {Vec2{0.0, 0.0}, Vec2{0.3, -0.2}, Vec2{-0.7, 0.6}}) {
      double h = local_poly_fit(cloud, q, cfg);
      CHECK(std::abs(h - (q.x * q.x + q.y * q.y)) < 1e-6);
    }
  }
}

TEST_CASE("constant data is reproduced exactly at degree zero") {
  auto cloud = oracles::sample_patch(1.0, 500, [](double, double) { return 7.0; }, 89);
  LocalFitConfig cfg;
  cfg.poly_degree = 0;
  CHECK(local_poly_fit(cloud, {0.1, 0.1}, cfg) == Catch::Approx(7.0).margin(1e-12));
}

TEST_CASE("tricube zeroes an outlier beyond the span where gaussian cannot") {
  // 50 planar points near the query plus one far outlier with a wild height;
  // the outlier is the farthest member of the span, so tricube gives it
  // weight 0 while the gaussian kernel still feels it
  PointCloud cloud;
  std::mt19937_64 r(97);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  for (int i = 0; i < 50; ++i) cloud.points.push_back({U(r), U(r), 0.0});
  cloud.points.push_back({2.0, 2.0, 50.0});

  LocalFitConfig tri;
  tri.kernel = KernelKind::Tricube;
  tri.knn = 51;
  tri.knn_min = 51;
  tri.poly_degree = 1;
  double h_tri = local_poly_fit(cloud, {0.0, 0.0}, tri);

  LocalFitConfig gau = tri;
  gau.kernel = KernelKind::Gaussian;
  gau.bandwidth = 2.0;
  double h_gau = local_poly_fit(cloud, {0.0, 0.0}, gau);

  CHECK(std::abs(h_tri) < std::abs(h_gau));
  CHECK(std::abs(h_tri) < 1e-6);
}

TEST_CASE("mls and loess rebuild a clean plane at unit area") {
  PointCloud grid = oracles::grid_patch(1.0, 32);
  CHECK(mesh_area(reconstruct_mls(grid)) == Catch::Approx(1.0).margin(1e-6));
  CHECK(mesh_area(reconstruct_loess(grid)) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("local fits cut plane noise by at least half") {
  const double sigma = 0.05;
  std::mt19937_64 r(101);
  std::normal_distribution<double> N(0.0, 1.0);
  auto cloud = oracles::sample_patch(
      4.0, 6000, [&](double, double) { return sigma * N(r); }, 103);

  for (bool loess : {false, true}) {
    TriangleMesh mesh =
        loess ? reconstruct_loess(cloud) : reconstruct_mls(cloud);
    double rms = 0.0;
    for (const Vec3& v : mesh.vertices) rms += v.z * v.z;
    rms = std::sqrt(rms / mesh.vertices.size());
    CHECK(rms < sigma / 2.0);
  }
}

TEST_CASE("loess stays finite across a punched hole") {
  PointCloud cloud;
  std::mt19937_64 r(107);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  while (cloud.points.size() < 4000) {
    double x = U(r), y = U(r);
    if (x * x + y * y < 0.16) continue;  // missing interior disk r=0.4
    cloud.points.push_back({x, y, 0.1 * x});
  }
  TriangleMesh mesh = reconstruct_loess(cloud);
  REQUIRE(mesh.vertex_count() == cloud.points.size());
  for (const Vec3& v : mesh.vertices) REQUIRE(v.finite());
  // sites adjacent to the hole still received sensible heights
  for (const Vec3& v : mesh.vertices)
    CHECK(std::abs(v.z - 0.1 * v.x) < 0.05);
}

TEST_CASE("polynomial reproduction holds for degree one too") {
  auto cloud = oracles::sample_patch(
      2.0, 3000, [](double x, double y) { return 3.0 * x - 2.0 * y + 0.5; }, 109);
  LocalFitConfig cfg;
  cfg.poly_degree = 1;
  for (auto kernel : {KernelKind::Gaussian, KernelKind::Tricube}) {
    cfg.kernel = kernel;
    double h = local_poly_fit(cloud, {0.21, -0.4}, cfg);
    CHECK(std::abs(h - (3.0 * 0.21 + 2.0 * 0.4 + 0.5)) < 1e-6);
  }
}

TEST_CASE("rank-deficient neighborhoods demote the degree instead of failing") {
  // all neighbors on a line in uv: a quadratic in (x,y) is unidentifiable
  PointCloud cloud;
  for (int i = 0; i < 40; ++i) cloud.points.push_back({i * 0.1, 0.0, 2.0});
  LocalFitConfig cfg;
  cfg.poly_degree = 2;
  cfg.knn = 12;
  cfg.knn_min = 12;
  double h = local_poly_fit(cloud, {1.0, 0.0}, cfg);
  CHECK(h == Catch::Approx(2.0).margin(1e-9));
}
