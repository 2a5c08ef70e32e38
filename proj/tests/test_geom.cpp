#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stcausal/geom.hpp"

using namespace stcausal;

namespace {
const Window unit_window({0.0, 0.0, 1.0, 1.0});
}

TEST_CASE("window validation") {
  CHECK(unit_window.area() == 1.0);
  CHECK_THROWS_AS(Window({0, 0, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(Window({0, 0, 1, -1}), std::invalid_argument);
  CHECK(Window({0, 0, 2, 1}).area() == 2.0);
  CHECK(unit_window.contains({1.0, 1.0}));  // closed on all edges
  CHECK_FALSE(unit_window.contains({1.0001, 0.5}));
}

TEST_CASE("point pattern storage and validation") {
  PointPattern p(3, {0.2, 0.8}, {0.1, 0.9});
  CHECK(p.period() == 3);
  CHECK(p.size() == 2);
  CHECK(p.at(1).x == 0.8);
  CHECK_NOTHROW(p.validate_inside(unit_window));
  PointPattern bad(1, {1.5}, {0.5});
  CHECK_THROWS_AS(bad.validate_inside(unit_window), std::domain_error);
  CHECK_THROWS_AS(PointPattern(1, {0.1}, {0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("count_in_region direct membership") {
  Region half("half", {{0.0, 0.0, 0.5, 0.5}}, unit_window);
  PointPattern p(1, {0.2, 0.8}, {0.2, 0.8});
  CHECK(count_in_region(p, half) == 1);
  CHECK(count_in_region(PointPattern(), half) == 0);

  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(7), ys(7);
  for (int i = 0; i < 7; ++i) {
    xs[i] = u(gen);
    ys[i] = u(gen);
  }
  PointPattern seven(1, xs, ys);
  CHECK(count_in_region(seven, Region::whole_window(unit_window)) == 7);
}

TEST_CASE("half-open convention counts shared edges once") {
  Region left("left", {{0.0, 0.0, 0.5, 1.0}}, unit_window);
  Region right("right", {{0.5, 0.0, 1.0, 1.0}}, unit_window);
  Region both("both", {{0.0, 0.0, 0.5, 1.0}, {0.5, 0.0, 1.0, 1.0}}, unit_window);
  PointPattern on_edge(1, {0.5}, {0.3});
  CHECK(count_in_region(on_edge, left) == 0);
  CHECK(count_in_region(on_edge, right) == 1);
  CHECK(count_in_region(on_edge, both) == 1);
  // The window's max edges are closed.
  PointPattern corner(1, {1.0, 0.3}, {1.0, 1.0});
  CHECK(count_in_region(corner, Region::whole_window(unit_window)) == 2);
  CHECK(count_in_region(corner, right) == 1);
}

TEST_CASE("count additivity over disjoint regions") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(200), ys(200);
  for (int i = 0; i < 200; ++i) {
    xs[i] = u(gen);
    ys[i] = u(gen);
  }
  PointPattern p(1, xs, ys);
  Region a("a", {{0.0, 0.0, 0.37, 1.0}}, unit_window);
  Region b("b", {{0.37, 0.0, 1.0, 1.0}}, unit_window);
  Region ab("ab", {{0.0, 0.0, 0.37, 1.0}, {0.37, 0.0, 1.0, 1.0}}, unit_window);
  CHECK(count_in_region(p, a) + count_in_region(p, b) == count_in_region(p, ab));

  SUBCASE("reordering pattern points leaves the count unchanged") {
    std::vector<double> rx(xs.rbegin(), xs.rend()), ry(ys.rbegin(), ys.rend());
    CHECK(count_in_region(PointPattern(1, rx, ry), a) == count_in_region(p, a));
  }
}

TEST_CASE("region geometry validation and normalization") {
  CHECK_THROWS_AS(Region("out", {{0.5, 0.5, 1.5, 1.0}}, unit_window), std::domain_error);
  CHECK_THROWS_AS(Region("deg", {{0.2, 0.2, 0.2, 0.8}}, unit_window), std::domain_error);
  CHECK_THROWS_AS(Region("none", {}, unit_window), std::domain_error);

  // Overlapping inputs are subdivided; the union measure is preserved.
  Region overlap("o", {{0.0, 0.0, 0.6, 1.0}, {0.4, 0.0, 1.0, 1.0}}, unit_window);
  CHECK(overlap.area() == doctest::Approx(1.0).epsilon(1e-15));
  PointPattern mid(1, {0.5}, {0.5});
  CHECK(count_in_region(mid, overlap) == 1);

  CHECK(Region::whole_window(unit_window).is_whole_window());
  CHECK_FALSE(overlap.is_whole_window());
  CHECK(same_geometry(Region::whole_window(unit_window),
                      Region::whole_window(unit_window)));
}

TEST_CASE("segment distances") {
  Segment base{{0.0, 0.0}, {1.0, 0.0}};
  CHECK(point_segment_distance({0.5, 1.0}, base) == doctest::Approx(1.0));
  CHECK(point_segment_distance({0.3, 0.0}, base) == doctest::Approx(0.0));
  CHECK(point_segment_distance({2.0, 0.0}, base) == doctest::Approx(1.0));
  CHECK(point_segment_distance({-3.0, 4.0}, base) == doctest::Approx(5.0));
  Segment degenerate{{0.3, 0.4}, {0.3, 0.4}};
  CHECK(point_segment_distance({0.0, 0.0}, degenerate) == doctest::Approx(0.5));
}

TEST_CASE("arc distances via angular projection") {
  // Quarter circle from angle 0 to π/2, radius 0.5, centered at the origin.
  Arc quarter{{0.0, 0.0}, 0.5, 0.0, 1.5707963267948966};
  CHECK(point_arc_distance({0.5, 0.0}, quarter) == doctest::Approx(0.0));
  CHECK(point_arc_distance({0.0, 0.0}, quarter) == doctest::Approx(0.5));
  // Inside the angular span: radial distance.
  const double c = std::cos(0.7), s = std::sin(0.7);
  CHECK(point_arc_distance({0.8 * c, 0.8 * s}, quarter) == doctest::Approx(0.3));
  // Beyond the span: distance to the nearest endpoint (0, 0.5).
  CHECK(point_arc_distance({-0.3, 0.5}, quarter) == doctest::Approx(0.3));
}

TEST_CASE("segment set distance and validation") {
  SegmentSet set;
  CHECK(set.empty());
  CHECK_THROWS_AS(set.distance({0.5, 0.5}), std::domain_error);
  set.add_segment({0.0, 0.0}, {1.0, 0.0});
  set.add_arc({0.5, 0.5}, 0.25, 0.0, 3.141592653589793);
  CHECK_FALSE(set.empty());
  CHECK(set.distance({0.5, 1.0}) == doctest::Approx(0.25));
  CHECK(set.distance({0.5, 0.0}) == doctest::Approx(0.0));

  SUBCASE("batch agrees with scalar") {
    std::vector<double> xs{0.1, 0.5, 0.9}, ys{0.2, 0.9, 0.1}, out(3);
    set.distance_batch(xs.data(), ys.data(), 3, out.data());
    for (int i = 0; i < 3; ++i) {
      CHECK(out[i] == set.distance({xs[i], ys[i]}));
    }
  }

  SUBCASE("distance to a union is the min over members") {
    SegmentSet only_seg, only_arc;
    only_seg.add_segment({0.0, 0.0}, {1.0, 0.0});
    only_arc.add_arc({0.5, 0.5}, 0.25, 0.0, 3.141592653589793);
    for (double x : {0.05, 0.4, 0.77}) {
      for (double y : {0.1, 0.52, 0.95}) {
        CHECK(set.distance({x, y}) ==
              doctest::Approx(std::min(only_seg.distance({x, y}),
                                       only_arc.distance({x, y}))));
      }
    }
  }

  CHECK_NOTHROW(set.validate_inside(unit_window));
  SegmentSet outside;
  outside.add_segment({0.0, 0.0}, {2.0, 0.0});
  CHECK_THROWS_AS(outside.validate_inside(unit_window), std::domain_error);
  CHECK_THROWS_AS(set.add_arc({0.5, 0.5}, -1.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(set.add_arc({0.5, 0.5}, 0.2, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("distance_to_set is 1-Lipschitz in the query") {
  SegmentSet set;
  set.add_segment({0.1, 0.2}, {0.9, 0.4});
  set.add_arc({0.4, 0.6}, 0.3, 0.5, 2.5);
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    Vec2 p{u(gen), u(gen)}, q{u(gen), u(gen)};
    const double dpq = std::hypot(p.x - q.x, p.y - q.y);
    CHECK(std::abs(set.distance(p) - set.distance(q)) <= dpq + 1e-12);
  }
}

TEST_CASE("distance to pattern") {
  PointPattern target(1, {0.3}, {0.4});
  CHECK(distance_to_pattern({0.0, 0.0}, target) == doctest::Approx(0.5));
  CHECK(distance_to_pattern({0.3, 0.4}, target) == doctest::Approx(0.0));
  CHECK_THROWS_AS(distance_to_pattern({0.0, 0.0}, PointPattern()), std::domain_error);
}
