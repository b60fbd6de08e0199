#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "leafsurf/spline.hpp"
#include "leafsurf/trim.hpp"
#include "oracles.hpp"

using namespace leafsurf;

namespace {

KnotVector clamped_uniform(int n_ctrl, int degree) {
  KnotVector kv;
  kv.degree = degree;
  kv.knots.assign(degree + 1, 0.0);
  int interior = n_ctrl - degree - 1;
  for (int i = 1; i <= interior; ++i)
    kv.knots.push_back(static_cast<double>(i) / (interior + 1));
  kv.knots.insert(kv.knots.end(), degree + 1, 1.0);
  return kv;
}

GridSamples grid_from(const PointCloud& cloud, int n) {
  return resample_to_grid(cloud, n, n);
}

/// Direct double-sum evaluation of the rational surface (the naive oracle).
Vec3 naive_eval(const ParametricSurface& s, double u, double v) {
  Vec3 num{0, 0, 0};
  double den = 0.0;
  for (int i = 0; i < s.nu; ++i) {
    double Nu = bspline_basis(i, s.knots_u.degree, u, s.knots_u);
    for (int j = 0; j < s.nv; ++j) {
      double Nv = bspline_basis(j, s.knots_v.degree, v, s.knots_v);
      double w = Nu * Nv * s.weight(i, j);
      num += w * s.ctrl(i, j);
      den += w;
    }
  }
  return num / den;
}

}  // namespace

TEST_CASE("degree-0 basis is the span indicator") {
  KnotVector kv = clamped_uniform(6, 1);  // knots 0,0,.2,.4,.6,.8,1,1
  // treat it as a degree-0 container by querying individual spans
  for (std::size_t i = 0; i + 1 < kv.knots.size(); ++i) {
    double lo = kv.knots[i], hi = kv.knots[i + 1];
    if (hi <= lo) continue;
    double mid = 0.5 * (lo + hi);
    CHECK(bspline_basis(static_cast<int>(i), 0, mid, kv) == 1.0);
    if (hi < 1.0) CHECK(bspline_basis(static_cast<int>(i), 0, hi, kv) == 0.0);
  }
}

TEST_CASE("degree-1 hat function peaks at 0.5 mid-support") {
  KnotVector kv = clamped_uniform(5, 1);  // interior knots at .25 .5 .75
  // N_{1,1} is supported on [0, .5] and peaks at .25
  CHECK(bspline_basis(1, 1, 0.125, kv) == Catch::Approx(0.5));
  CHECK(bspline_basis(1, 1, 0.25, kv) == Catch::Approx(1.0));
}

TEST_CASE("clamped basis forms a partition of unity") {
  KnotVector kv = clamped_uniform(9, 3);
  std::mt19937_64 r(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    double u = (t == 0) ? 0.0 : (t == 1 ? 1.0 : U(r));
    double sum = 0.0;
    for (int i = 0; i < kv.control_count(); ++i)
      sum += bspline_basis(i, 3, u, kv);
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
  }
  CHECK_THROWS_AS(bspline_basis(0, 3, 1.5, kv), DomainError);
}

TEST_CASE("chord-length parameters are proportional to distances") {
  std::vector<Vec3> pts{{0, 0, 0}, {3, 0, 0}, {3, 1, 0}};  // chords 3 and 1
  auto t = chord_length_parameterize(pts);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == Catch::Approx(0.75));
  CHECK(t[2] == 1.0);

  std::vector<Vec3> even{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  auto te = chord_length_parameterize(even);
  for (int i = 0; i < 4; ++i) CHECK(te[i] == Catch::Approx(i / 3.0));

  std::mt19937_64 r(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<Vec3> rnd;
  for (int i = 0; i < 5; ++i) rnd.push_back({U(r), U(r), U(r)});
  auto tr = chord_length_parameterize(rnd);
  double total = 0.0;
  std::vector<double> cum{0.0};
  for (int i = 1; i < 5; ++i) {
    total += dist(rnd[i - 1], rnd[i]);
    cum.push_back(total);
  }
  for (int i = 0; i < 5; ++i)
    CHECK(std::abs(tr[i] - cum[i] / total) < 1e-12);

  std::vector<Vec3> same{{1, 1, 1}, {1, 1, 1}};
  CHECK_THROWS_AS(chord_length_parameterize(same), DegenerateGeometryError);
}

TEST_CASE("resampling an exact grid is the identity") {
  PointCloud c;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j)
      c.points.push_back({i * 0.1, j * 0.1, std::sin(i * 0.3) * 0.2});
  GridSamples g = grid_from(c, 40);
  double worst = 0.0;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j)
      worst = std::max(worst, dist(g.at(i, j), c.points[i * 40 + j]));
  CHECK(worst < 1e-9);
}

TEST_CASE("resampling a flat plane gives zero heights") {
  auto c = oracles::sample_patch(2.0, 5000, [](double, double) { return 0.0; }, 3);
  GridSamples g = grid_from(c, 32);
  for (const Vec3& p : g.pts) CHECK(std::abs(p.z) < 1e-9);
}

TEST_CASE("resampling a paraboloid tracks the analytic surface") {
  auto c = oracles::sample_patch(
      2.0, 20000, [](double x, double y) { return x * x + y * y; }, 7);
  GridSamples g = grid_from(c, 40);
  double range = 2.0;  // z spans [0, 2] on this patch
  double worst = 0.0;
  for (const Vec3& p : g.pts)
    worst = std::max(worst, std::abs(p.z - (p.x * p.x + p.y * p.y)));
  CHECK(worst < 0.02 * range);
}

TEST_CASE("interpolating fit reproduces planes everywhere") {
  auto c = oracles::sample_patch(
      2.0, 8000, [](double x, double y) { return 0.3 * x - 0.2 * y + 1.0; }, 11);
  GridSamples g = grid_from(c, 25);
  ParametricSurface s = fit_bspline_interp(g, 3, 3);
  std::mt19937_64 r(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    Vec3 p = evaluate_surface(s, U(r), U(r));
    worst = std::max(worst, std::abs(p.z - (0.3 * p.x - 0.2 * p.y + 1.0)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("clamped corners interpolate the corner data points") {
  auto c = oracles::sample_patch(
      2.0, 6000, [](double x, double y) { return 0.1 * x * y; }, 13);
  GridSamples g = grid_from(c, 20);
  ParametricSurface s = fit_bspline_interp(g, 3, 3);
  CHECK(dist(s.ctrl(0, 0), g.at(0, 0)) < 1e-9);
  CHECK(dist(evaluate_surface(s, 0.0, 0.0), g.at(0, 0)) < 1e-9);
  CHECK(dist(evaluate_surface(s, 1.0, 0.0), g.at(g.nu - 1, 0)) < 1e-9);
  CHECK(dist(evaluate_surface(s, 0.0, 1.0), g.at(0, g.nv - 1)) < 1e-9);
  CHECK(dist(evaluate_surface(s, 1.0, 1.0), g.at(g.nu - 1, g.nv - 1)) < 1e-9);
}

TEST_CASE("interpolation residual vanishes at the grid parameters") {
  auto c = oracles::sample_patch(
      2.0, 20000, [](double x, double y) { return x * x + y * y; }, 17);
  GridSamples g = grid_from(c, 40);
  ParametricSurface s = fit_bspline_interp(g, 3, 3);
  double worst = 0.0;
  for (int i = 0; i < g.nu; ++i)
    for (int j = 0; j < g.nv; ++j)
      worst = std::max(
          worst, dist(evaluate_surface(s, g.u_params[i], g.v_params[j]),
                      g.at(i, j)));
  CHECK(worst < 1e-6);
}

TEST_CASE("equal-weight rational fit matches the polynomial least squares") {
  auto c = oracles::sample_patch(
      2.0, 20000, [](double x, double y) { return std::sin(x) * 0.5 + y * y * 0.2; },
      19);
  GridSamples g = grid_from(c, 40);
  std::vector<double> w(20 * 20, 3.7);
  ParametricSurface nurbs = fit_nurbs_approx(g, 3, 3, 20, 20, w);
  ParametricSurface lsq = fit_bspline_lsq(g, 3, 3, 20, 20);
  std::mt19937_64 r(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    double u = U(r), v = U(r);
    CHECK(dist(evaluate_surface(nurbs, u, v), evaluate_surface(lsq, u, v)) <
          1e-9);
  }
}

TEST_CASE("planar data is fitted exactly for any weights") {
  auto c = oracles::sample_patch(
      2.0, 12000, [](double x, double y) { return 0.4 * x + 0.1 * y - 2.0; }, 29);
  GridSamples g = grid_from(c, 30);
  std::mt19937_64 r(31);
  std::uniform_real_distribution<double> U(0.5, 4.0);
  std::vector<double> w(15 * 15);
  for (double& x : w) x = U(r);
  ParametricSurface s = fit_nurbs_approx(g, 3, 3, 15, 15, w);
  double worst = 0.0;
  for (int i = 0; i < g.nu; ++i)
    for (int j = 0; j < g.nv; ++j) {
      Vec3 p = evaluate_surface(s, g.u_params[i], g.v_params[j]);
      worst = std::max(worst, std::abs(p.z - (0.4 * p.x + 0.1 * p.y - 2.0)));
    }
  CHECK(worst < 1e-9);
}

TEST_CASE("raising one interior weight pulls the surface toward its point") {
  auto c = oracles::sample_patch(
      2.0, 12000, [](double x, double y) { return x * x - 0.5 * y * y; }, 37);
  GridSamples g = grid_from(c, 30);
  std::vector<double> w(15 * 15, 1.0);
  ParametricSurface before = fit_nurbs_approx(g, 3, 3, 15, 15, w);
  int ci = 7, cj = 7;
  // evaluate at the Greville-ish parameter of the control point
  auto closest_dist = [&](const ParametricSurface& s) {
    Vec3 target = s.ctrl(ci, cj);
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 60; ++a)
      for (int b = 0; b <= 60; ++b)
        best = std::min(best,
                        dist(evaluate_surface(s, a / 60.0, b / 60.0), target));
    return best;
  };
  double d_before = closest_dist(before);
  w[ci * 15 + cj] = 2.0;
  ParametricSurface after = fit_nurbs_approx(g, 3, 3, 15, 15, w);
  // same control net target: distance of the surface to the boosted point
  Vec3 target = before.ctrl(ci, cj);
  auto dist_to = [&](const ParametricSurface& s) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 60; ++a)
      for (int b = 0; b <= 60; ++b)
        best = std::min(best,
                        dist(evaluate_surface(s, a / 60.0, b / 60.0), target));
    return best;
  };
  CHECK(dist_to(after) < dist_to(before));
  (void)d_before;
}

TEST_CASE("surface evaluation edge cases and the naive-sum oracle") {
  // all control points equal -> constant surface
  ParametricSurface s;
  s.nu = s.nv = 5;
  s.knots_u = clamped_uniform(5, 3);
  s.knots_v = clamped_uniform(5, 3);
  s.control.assign(25, Vec3{1.0, -2.0, 3.0});
  s.weights.assign(25, 1.0);
  for (double u : {0.0, 0.3, 0.99, 1.0})
    for (double v : {0.0, 0.5, 1.0})
      CHECK(dist(evaluate_surface(s, u, v), Vec3{1.0, -2.0, 3.0}) < 1e-12);

  // random control net and weights: implementation equals the double sum
  std::mt19937_64 r(41);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_real_distribution<double> W(0.2, 3.0);
  ParametricSurface rs;
  rs.nu = 7;
  rs.nv = 6;
  rs.knots_u = clamped_uniform(7, 3);
  rs.knots_v = clamped_uniform(6, 2);
  for (int i = 0; i < 42; ++i) {
    rs.control.push_back({U(r), U(r), U(r)});
    rs.weights.push_back(W(r));
  }
  CHECK(dist(evaluate_surface(rs, 0.0, 0.0), rs.ctrl(0, 0)) < 1e-12);
  std::uniform_real_distribution<double> P(0.0, 1.0);
  for (int t = 0; t < 40; ++t) {
    double u = P(r), v = P(r);
    CHECK(dist(evaluate_surface(rs, u, v), naive_eval(rs, u, v)) < 1e-12);
  }
  CHECK_THROWS_AS(evaluate_surface(rs, -0.2, 0.5), DomainError);
}

TEST_CASE("evaluation commutes with rigid transforms of the control net") {
  std::mt19937_64 r(43);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ParametricSurface s;
  s.nu = s.nv = 6;
  s.knots_u = clamped_uniform(6, 3);
  s.knots_v = clamped_uniform(6, 3);
  for (int i = 0; i < 36; ++i) {
    s.control.push_back({U(r), U(r), U(r)});
    s.weights.push_back(1.0);
  }
  Mat3 rot;
  double a = 0.8, b = 0.3;
  rot.m = {std::cos(a), -std::sin(a), 0.0,
           std::sin(a) * std::cos(b), std::cos(a) * std::cos(b), -std::sin(b),
           std::sin(a) * std::sin(b), std::cos(a) * std::sin(b), std::cos(b)};
  Vec3 shift{2.0, -1.0, 0.5};
  ParametricSurface st = s;
  for (Vec3& p : st.control) p = rot * p + shift;
  std::uniform_real_distribution<double> P(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    double u = P(r), v = P(r);
    Vec3 expect = rot * evaluate_surface(s, u, v) + shift;
    CHECK(dist(evaluate_surface(st, u, v), expect) < 1e-9);
  }
}

TEST_CASE("trim curve encloses a disk sample with the right area") {
  std::mt19937_64 r(47);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  PointCloud c;
  while (c.points.size() < 6000) {
    double x = U(r), y = U(r);
    if (x * x + y * y <= 1.0) c.points.push_back({x, y, 0.0});
  }
  TrimCurve trim = fit_trim_curve(c);
  // polygon area scaled back to world units
  auto poly = trim.polygon(2048);
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    area += poly[i].cross(poly[(i + 1) % poly.size()]);
  area = 0.5 * std::abs(area) * (trim.rect_max.x - trim.rect_min.x) *
         (trim.rect_max.y - trim.rect_min.y);
  CHECK(area == Catch::Approx(M_PI).epsilon(0.05));

  std::size_t inside = 0;
  for (const Vec3& p : c.points)
    if (trim.contains_world(p.xy())) ++inside;
  CHECK(inside >= c.points.size() * 95 / 100);
}

TEST_CASE("trim curve on a square sample") {
  auto c = oracles::sample_patch(1.0, 6000, [](double, double) { return 0.0; }, 53);
  TrimCurve trim = fit_trim_curve(c);
  auto poly = trim.polygon(2048);
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    area += poly[i].cross(poly[(i + 1) % poly.size()]);
  area = 0.5 * std::abs(area) * (trim.rect_max.x - trim.rect_min.x) *
         (trim.rect_max.y - trim.rect_min.y);
  CHECK(area == Catch::Approx(1.0).epsilon(0.05));
}

TEST_CASE("trim curve through 10 circle points closes") {
  PointCloud c;
  for (int i = 0; i < 10; ++i) {
    double a = 2.0 * M_PI * i / 10;
    c.points.push_back({std::cos(a), std::sin(a), 0.0});
  }
  TrimCurve trim = fit_trim_curve(c);
  CHECK((trim.evaluate(0.0) - trim.evaluate(1.0)).norm() < 1e-12);
  // every input point sits near the curve
  auto poly = trim.polygon(1024);
  for (const Vec3& p : c.points) {
    Vec2 q = trim.to_normalized(p.xy());
    double best = 1e9;
    for (const Vec2& s : poly) best = std::min(best, (s - q).norm());
    CHECK(best < 0.15);
  }
}

namespace {

ParametricSurface flat_unit_surface() {
  PointCloud c;
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j)
      c.points.push_back({i / 24.0, j / 24.0, 0.0});
  GridSamples g = resample_to_grid(c, 25, 25);
  return fit_bspline_interp(g, 3, 3);
}

TrimCurve circle_trim(double radius_param) {
  TrimCurve trim;
  trim.rect_min = {0, 0};
  trim.rect_max = {1, 1};
  const int m = 96;
  double shrink = (2.0 + std::cos(2.0 * M_PI / m)) / 3.0;
  for (int i = 0; i < m; ++i) {
    double a = 2.0 * M_PI * i / m;
    trim.control.push_back({0.5 + radius_param / shrink * std::cos(a),
                            0.5 + radius_param / shrink * std::sin(a)});
  }
  trim.refresh_polygon();
  return trim;
}

}  // namespace

TEST_CASE("trimmed area of a flat patch under simple trims") {
  ParametricSurface s = flat_unit_surface();

  SECTION("full domain") {
    CHECK(trimmed_area(s, nullptr, 128) == Catch::Approx(1.0).margin(1e-6));
  }
  SECTION("square trim of side 0.5") {
    TrimCurve sq;
    sq.rect_min = {0, 0};
    sq.rect_max = {1, 1};
    // dense control polygon hugs the square
    const int per_side = 40;
    for (int side = 0; side < 4; ++side)
      for (int i = 0; i < per_side; ++i) {
        double t = static_cast<double>(i) / per_side;
        double lo = 0.25, hi = 0.75;
        switch (side) {
          case 0: sq.control.push_back({lo + t * (hi - lo), lo}); break;
          case 1: sq.control.push_back({hi, lo + t * (hi - lo)}); break;
          case 2: sq.control.push_back({hi - t * (hi - lo), hi}); break;
          default: sq.control.push_back({lo, hi - t * (hi - lo)});
        }
      }
    sq.refresh_polygon();
    CHECK(trimmed_area(s, &sq, 256) == Catch::Approx(0.25).epsilon(0.01));
  }
  SECTION("circular trim of radius 0.5") {
    TrimCurve disk = circle_trim(0.5);
    CHECK(trimmed_area(s, &disk, 256) == Catch::Approx(M_PI / 4).epsilon(0.01));
  }
  SECTION("trim area agrees with Monte-Carlo point-in-polygon") {
    TrimCurve disk = circle_trim(0.37);
    double montecarlo = oracles::polygon_area_mc(disk.polygon(1024), {0, 0},
                                                 {1, 1}, 400000, 99);
    CHECK(trimmed_area(s, &disk, 256) ==
          Catch::Approx(montecarlo).epsilon(0.01));
  }
  SECTION("empty trim raises") {
    TrimCurve dot = circle_trim(0.0005);
    CHECK_THROWS_AS(trimmed_area(s, &dot, 16), DegenerateGeometryError);
  }
}
