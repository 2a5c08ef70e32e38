#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "stcausal/geom.hpp"
#include "stcausal/rng.hpp"
#include "stcausal/smooth.hpp"
#include "stcausal/surfaces.hpp"

using namespace stcausal;

namespace {
const Window unit_window({0.0, 0.0, 1.0, 1.0});
}

TEST_CASE("bandwidth rule 10*T^(-2/3)") {
  CHECK(bandwidth_rule(500) == doctest::Approx(0.15874010519682).epsilon(1e-10));
  CHECK(std::abs(bandwidth_rule(500) - 0.1587) < 5e-5);
  CHECK(bandwidth_rule(1000) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(bandwidth_rule(1) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_AS(bandwidth_rule(0), std::domain_error);
}

TEST_CASE("rectangle mass is the product of axis CDF differences") {
  PointPattern center(1, {0.5}, {0.5});
  Region corner("corner", {{0.0, 0.0, 0.5, 0.5}}, unit_window);
  // (Phi(0) - Phi(-2))^2, frozen from an independent closed-form evaluation.
  CHECK(smoothed_region_integral(center, {0.25}, corner) ==
        doctest::Approx(0.2277674365554804).epsilon(1e-9));
}

TEST_CASE("tight kernel at the center puts full mass in the window") {
  PointPattern center(1, {0.5}, {0.5});
  const double m =
      smoothed_region_integral(center, {1e-3}, Region::whole_window(unit_window));
  CHECK(std::abs(m - 1.0) < 1e-10);
}

TEST_CASE("empty pattern integrates to zero") {
  CHECK(smoothed_region_integral(PointPattern(), {0.1},
                                 Region::whole_window(unit_window)) == 0.0);
  CHECK(smoothed_surface(PointPattern(), {0.1}).constant_value().value() == 0.0);
}

TEST_CASE("partition masses sum to the window mass; interior points lose < 1e-8") {
  RngStream rng(404);
  std::vector<double> xs, ys;
  const double sigma = 0.03;
  for (int i = 0; i < 40; ++i) {
    // Keep every point at least 6 sigma inside the boundary.
    xs.push_back(0.2 + 0.6 * rng.uniform());
    ys.push_back(0.2 + 0.6 * rng.uniform());
  }
  PointPattern pattern(1, xs, ys);
  KernelSpec k{sigma};

  Region q1("q1", {{0.0, 0.0, 0.5, 0.5}}, unit_window);
  Region q2("q2", {{0.5, 0.0, 1.0, 0.5}}, unit_window);
  Region q3("q3", {{0.0, 0.5, 0.5, 1.0}}, unit_window);
  Region q4("q4", {{0.5, 0.5, 1.0, 1.0}}, unit_window);
  const double parts = smoothed_region_integral(pattern, k, q1) +
                       smoothed_region_integral(pattern, k, q2) +
                       smoothed_region_integral(pattern, k, q3) +
                       smoothed_region_integral(pattern, k, q4);
  const double whole =
      smoothed_region_integral(pattern, k, Region::whole_window(unit_window));
  CHECK(parts == doctest::Approx(whole).epsilon(1e-12));
  CHECK(whole <= pattern.size());
  CHECK(pattern.size() - whole < 1e-8 * pattern.size());
}

TEST_CASE("enlarging the region never decreases the mass") {
  RngStream rng(405);
  std::vector<double> xs, ys;
  for (int i = 0; i < 25; ++i) {
    xs.push_back(rng.uniform());
    ys.push_back(rng.uniform());
  }
  PointPattern pattern(1, xs, ys);
  KernelSpec k{0.2};
  double prev = 0.0;
  for (double half = 0.05; half <= 0.5; half += 0.05) {
    Region r("grow", {{0.5 - half, 0.5 - half, 0.5 + half, 0.5 + half}}, unit_window);
    const double m = smoothed_region_integral(pattern, k, r);
    CHECK(m >= prev);
    prev = m;
  }
}

TEST_CASE("sigma -> 0 recovers the region count for interior points") {
  PointPattern pattern(1, {0.25, 0.6, 0.1, 0.65, 0.5}, {0.45, 0.6, 0.1, 0.75, 0.31});
  Region region("b", {{0.2, 0.3, 0.7, 0.8}}, unit_window);
  REQUIRE(count_in_region(pattern, region) == 4);
  const double m = smoothed_region_integral(pattern, {1e-4}, region);
  CHECK(std::abs(m - 4.0) < 1e-6);
}

TEST_CASE("smoothed surface evaluates the Gaussian mixture") {
  PointPattern pattern(1, {0.3, 0.7}, {0.4, 0.6});
  const double sigma = 0.12, pre = 2.5;
  Surface s = smoothed_surface(pattern, {sigma}, pre);
  auto kernel = [&](double x, double y, double cx, double cy) {
    const double dx = (x - cx) / sigma, dy = (y - cy) / sigma;
    return std::exp(-0.5 * (dx * dx + dy * dy)) / (2.0 * M_PI * sigma * sigma);
  };
  for (Vec2 q : {Vec2{0.3, 0.4}, Vec2{0.5, 0.5}, Vec2{0.05, 0.9}}) {
    const double want =
        pre * (kernel(q.x, q.y, 0.3, 0.4) + kernel(q.x, q.y, 0.7, 0.6));
    CHECK(s(q.x, q.y) == doctest::Approx(want).epsilon(1e-12));
  }
  // Quadrature window mass agrees with the closed-form CDF-product mass.
  QuadratureGrid grid(unit_window, 256, 256);
  const double closed_form =
      pre * smoothed_region_integral(pattern, {sigma}, Region::whole_window(unit_window));
  CHECK(integrate(s, grid) == doctest::Approx(closed_form).epsilon(2e-4));
}

TEST_CASE("scott bandwidth on sd-1 axes is n^(-1/6)") {
  const int n = 64;
  const double a = std::sqrt(63.0 / 64.0);  // sample sd exactly 1 for +-a values
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = (i % 2 == 0) ? a : -a;
    ys[i] = (i < n / 2) ? a : -a;
  }
  auto [sx, sy] = scott_bandwidth(PointPattern(1, xs, ys));
  CHECK(sx == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sy == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("scott bandwidth scales with the coordinates") {
  RngStream rng(406);
  std::vector<double> xs, ys;
  for (int i = 0; i < 30; ++i) {
    xs.push_back(rng.uniform());
    ys.push_back(rng.uniform());
  }
  auto [sx, sy] = scott_bandwidth(PointPattern(1, xs, ys));
  const double c = 2.5;
  std::vector<double> cxs = xs, cys = ys;
  for (auto& v : cxs) v *= c;
  for (auto& v : cys) v *= c;
  auto [tx, ty] = scott_bandwidth(PointPattern(1, cxs, cys));
  CHECK(tx == doctest::Approx(c * sx).epsilon(1e-12));
  CHECK(ty == doctest::Approx(c * sy).epsilon(1e-12));
}

TEST_CASE("scott bandwidth rejects degenerate input") {
  CHECK_THROWS_AS(scott_bandwidth(PointPattern(1, {0.5}, {0.5})), std::domain_error);
  CHECK_THROWS_AS(scott_bandwidth(PointPattern(1, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5})),
                  std::domain_error);
  // Spread on one axis only is still degenerate.
  CHECK_THROWS_AS(scott_bandwidth(PointPattern(1, {0.1, 0.9}, {0.5, 0.5})),
                  std::domain_error);
}

TEST_CASE("scott baseline density has unit window mass") {
  RngStream rng(407);
  std::vector<double> xs, ys;
  for (int i = 0; i < 50; ++i) {
    xs.push_back(0.1 + 0.8 * rng.uniform());
    ys.push_back(0.1 + 0.8 * rng.uniform());
  }
  Surface phi0 = scott_baseline_density(PointPattern(1, xs, ys), unit_window);
  QuadratureGrid grid(unit_window, 256, 256);
  CHECK(integrate(phi0, grid) == doctest::Approx(1.0).epsilon(1e-3));
  // Nonnegative spot checks.
  RngStream probe(408);
  for (int i = 0; i < 100; ++i) {
    CHECK(phi0(probe.uniform(), probe.uniform()) >= 0.0);
  }
}

TEST_CASE("smoothing never produces negative mass") {
  PointPattern pattern(1, {0.9}, {0.9});
  Region far("far", {{0.0, 0.0, 0.1, 0.1}}, unit_window);
  const double m = smoothed_region_integral(pattern, {0.05}, far);
  CHECK(m >= 0.0);
  CHECK(m < 1e-10);
}
