#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "stcausal/rng.hpp"

using namespace stcausal;

TEST_CASE("same seed reproduces the same stream") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("different seeds give different streams") {
  RngStream a(1), b(2);
  int agree = 0;
  for (int i = 0; i < 100; ++i) {
    if (a.engine()() == b.engine()()) ++agree;
  }
  CHECK(agree == 0);
}

TEST_CASE("child streams are keyed, not order-dependent") {
  RngStream root(7);
  RngStream c1 = root.child(3, rngtag::treatment);
  // Deriving other children in between must not disturb the keyed stream.
  RngStream unrelated = root.child(9, rngtag::outcome);
  (void)unrelated.uniform();
  RngStream c2 = root.child(3, rngtag::treatment);
  CHECK(c1.key() == c2.key());
  for (int i = 0; i < 50; ++i) CHECK(c1.uniform() == c2.uniform());
}

TEST_CASE("children with distinct tags are distinct") {
  RngStream root(7);
  CHECK(root.child(3, rngtag::treatment).key() != root.child(3, rngtag::outcome).key());
  CHECK(root.child(1, 2, 3).key() != root.child(1, 3, 2).key());
  CHECK(root.child(1).key() != root.key());
}

TEST_CASE("uniform lies in [0,1) with the right mean") {
  RngStream r(123);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // SE of the mean is 1/sqrt(12 n) ≈ 6.5e-4; allow 5 sigma.
  CHECK(std::abs(sum / n - 0.5) < 5 * 6.5e-4);
}

TEST_CASE("uniform(lo,hi) respects the range") {
  RngStream r(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    REQUIRE(u >= -2.0);
    REQUIRE(u < 3.0);
  }
}

TEST_CASE("poisson draws have the right first two moments") {
  RngStream r(99);
  const double lambda = 4.7;
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double k = r.poisson(lambda);
    sum += k;
    sumsq += k * k;
  }
  const double m = sum / n;
  const double var = sumsq / n - m * m;
  const double se_mean = std::sqrt(lambda / n);
  CHECK(std::abs(m - lambda) < 5 * se_mean);
  CHECK(std::abs(var - lambda) < 0.15);
  CHECK(r.poisson(0.0) == 0);
  CHECK(r.poisson(-1.0) == 0);
}
