#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stcausal/errors.hpp"
#include "stcausal/pointprocess.hpp"

using namespace stcausal;

namespace {
const Window unit_window({0.0, 0.0, 1.0, 1.0});
const double kE = 2.718281828459045235360;

PoissonProcess homogeneous(double h) {
  return PoissonProcess(Surface::constant(h), unit_window, h);
}

double mean_count(const PoissonProcess& p, int draws, std::uint64_t seed) {
  RngStream root(seed);
  double total = 0.0;
  for (int r = 0; r < draws; ++r) {
    RngStream stream = root.child(r);
    total += static_cast<double>(sample(p, stream).size());
  }
  return total / draws;
}

}  // namespace

TEST_CASE("homogeneous sampling hits the Poisson mean") {
  CHECK(mean_count(homogeneous(5.0), 10000, 1001) == doctest::Approx(5.0).epsilon(0.02));
}

TEST_CASE("zero intensity always yields the empty pattern") {
  PoissonProcess null = homogeneous(0.0);
  RngStream root(7);
  for (int r = 0; r < 1000; ++r) {
    RngStream s = root.child(r);
    CHECK(sample(null, s).empty());
  }
}

TEST_CASE("thinning reproduces an inhomogeneous intensity") {
  LogLinearIntensity li({1.0, 1.0},
                        {Surface::constant(1.0),
                         Surface::from_function([](double x, double) { return x; })});
  QuadratureGrid grid(unit_window, 128, 128);
  PoissonProcess p(li, unit_window, grid);
  CHECK(p.upper_bound() == doctest::Approx(1.05 * std::exp(1.0 + (1.0 - 0.5 / 128))));

  const double truth = kE * (kE - 1.0);  // ∫ exp(1+x)
  const int draws = 10000;
  const double m = mean_count(p, draws, 2002);
  CHECK(m == doctest::Approx(truth).epsilon(0.1 / truth));
  // Spec tolerance: within 3·sqrt(∫λ/R) of the quadrature integral.
  CHECK(std::abs(m - p.intensity_integral(grid)) <= 3.0 * std::sqrt(truth / draws));
}

TEST_CASE("sampling is deterministic given the stream") {
  LogLinearIntensity li({0.5, 1.2},
                        {Surface::constant(1.0),
                         Surface::from_function([](double, double y) { return y; })});
  QuadratureGrid grid(unit_window, 64, 64);
  PoissonProcess p(li, unit_window, grid);
  RngStream a(55), b(55);
  PointPattern pa = sample(p, a, 9), pb = sample(p, b, 9);
  REQUIRE(pa.size() == pb.size());
  CHECK(pa.period() == 9);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa.xs()[i] == pb.xs()[i]);
    CHECK(pa.ys()[i] == pb.ys()[i]);
  }
}

TEST_CASE("an understated bound raises BoundBreach instead of clamping") {
  // from_function hides the constancy, forcing the thinning path.
  Surface five = Surface::from_function([](double, double) { return 5.0; });
  PoissonProcess lying(five, unit_window, 2.0);
  RngStream root(31);
  bool thrown = false;
  for (int attempt = 0; attempt < 50 && !thrown; ++attempt) {
    RngStream s = root.child(attempt);
    try {
      (void)sample(lying, s);
    } catch (const BoundBreach&) {
      thrown = true;
    }
  }
  CHECK(thrown);
}

TEST_CASE("log density closed forms") {
  QuadratureGrid grid(unit_window, 64, 64);
  // Empty pattern, h=3: log f = (1 − 3) = −2.
  CHECK(log_density(homogeneous(3.0), PointPattern(), grid) ==
        doctest::Approx(-2.0).epsilon(1e-12));
  // One point, h=2: (1 − 2) + log 2.
  PointPattern one(1, {0.62}, {0.31});
  CHECK(log_density(homogeneous(2.0), one, grid) ==
        doctest::Approx(-1.0 + std::log(2.0)).epsilon(1e-12));
  // Unit-rate process: exactly zero for any pattern.
  PointPattern any(1, {0.1, 0.5, 0.9}, {0.2, 0.6, 0.8});
  CHECK(log_density(homogeneous(1.0), any, grid) == 0.0);
}

TEST_CASE("homogeneous densities sum to one over pattern space") {
  // Σ_n P_unit(n)·f_h(n-point pattern) = Σ_n e^{−1}/n!·e^{1−h}h^n = 1.
  QuadratureGrid grid(unit_window, 32, 32);
  PoissonProcess p = homogeneous(3.0);
  const double integral = p.intensity_integral(grid);
  double total = 0.0;
  double log_unit_weight = -1.0;  // log e^{−1}/0!
  for (int n = 0; n <= 50; ++n) {
    if (n > 0) log_unit_weight -= std::log(static_cast<double>(n));  // /n!
    std::vector<double> xs(n, 0.5), ys(n, 0.5);
    const double ld = log_density_given_integral(p, PointPattern(1, xs, ys), integral);
    total += std::exp(log_unit_weight + ld);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("log density ratio closed forms and antisymmetry") {
  QuadratureGrid grid(unit_window, 64, 64);
  PoissonProcess h2 = homogeneous(2.0), h1 = homogeneous(1.0), h5 = homogeneous(5.0);
  PointPattern one(1, {0.25}, {0.75});

  CHECK(log_density_ratio(h2, h2, one, grid) == 0.0);
  CHECK(log_density_ratio(h2, h1, one, grid) ==
        doctest::Approx(-1.0 + std::log(2.0)).epsilon(1e-12));
  CHECK(log_density_ratio(h2, h5, PointPattern(), grid) ==
        doctest::Approx(3.0).epsilon(1e-12));

  // Exact antisymmetry.
  PointPattern some(1, {0.1, 0.8}, {0.3, 0.9});
  const double ab = log_density_ratio(h2, h5, some, grid);
  const double ba = log_density_ratio(h5, h2, some, grid);
  CHECK(ab == -ba);
}

TEST_CASE("zero-intensity point: numerator signals, denominator throws") {
  QuadratureGrid grid(unit_window, 64, 64);
  // Intensity vanishing on the left half.
  Surface half = Surface::from_function([](double x, double) { return x < 0.5 ? 0.0 : 2.0; });
  PoissonProcess hp(half, unit_window, 2.0);
  PointPattern left(4, {0.25}, {0.5});

  CHECK(log_density(hp, left, grid) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(log_density_ratio(homogeneous(2.0), hp, left, grid),
                  PositivityViolation);
  // In the numerator the zero density is a weight-0 signal, not an error.
  CHECK(log_density_ratio(hp, homogeneous(2.0), left, grid) ==
        -std::numeric_limits<double>::infinity());
  try {
    (void)log_density_ratio(homogeneous(2.0), hp, left, grid);
  } catch (const PositivityViolation& e) {
    CHECK(e.period() == 4);
  }
}
