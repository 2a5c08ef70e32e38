#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "stcausal/numerics.hpp"

using namespace stcausal;

TEST_CASE("normal cdf basics") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  for (double x : {-2.5, -0.7, 0.3, 1.9}) {
    CHECK(norm_cdf(x) + norm_cdf(-x) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("normal quantile matches the reference z-values") {
  // 1.959964 is the 97.5% point used by 95% confidence intervals.
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(norm_quantile(0.995) == doctest::Approx(2.575829303548901).epsilon(1e-10));
  SUBCASE("roundtrip against the cdf") {
    for (double p : {1e-6, 0.01, 0.2, 0.5, 0.9, 0.999, 1 - 1e-9}) {
      CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-11));
    }
  }
  CHECK_THROWS_AS(norm_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(1.0), std::domain_error);
}

TEST_CASE("log_sum_exp is stable") {
  std::vector<double> two{0.0, 0.0};
  CHECK(log_sum_exp(two) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  std::vector<double> shifted{1000.0, 1000.0};
  CHECK(log_sum_exp(shifted) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  std::vector<double> mixed{-1e9, 3.0};
  CHECK(log_sum_exp(mixed) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::isinf(log_sum_exp(std::vector<double>{})));
  CHECK(logaddexp(std::log(2.0), std::log(3.0)) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));
}

TEST_CASE("pairwise_sum tracks a long-double reference") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> xs(50000);
  long double ref = 0.0L;
  for (auto& x : xs) {
    x = u(gen);
    ref += x;
  }
  CHECK(pairwise_sum(xs) ==
        doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
}

TEST_CASE("descriptive statistics") {
  std::vector<double> xs{1.0, 2.0, 3.0};
  CHECK(mean(xs) == doctest::Approx(2.0));
  CHECK(sample_sd(xs) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(median(std::vector<double>{5.0, 1.0, 3.0}) == doctest::Approx(3.0));
  CHECK(median(std::vector<double>{4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
  // R type-7 interpolation: quantile({1,2,3,4}, 0.9) = 3.7.
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.9) == doctest::Approx(3.7).epsilon(1e-12));
  CHECK(quantile({2.0}, 0.75) == doctest::Approx(2.0));
  CHECK_THROWS_AS(quantile({}, 0.5), std::domain_error);
}

TEST_CASE("solve_spd and invert_spd on a random SPD system") {
  const std::size_t k = 7;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> b0(k * k);
  for (auto& v : b0) v = u(gen);
  // A = B·Bᵀ + I is SPD.
  std::vector<double> a(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = i == j ? 1.0 : 0.0;
      for (std::size_t m = 0; m < k; ++m) s += b0[i * k + m] * b0[j * k + m];
      a[i * k + j] = s;
    }
  }
  std::vector<double> rhs(k);
  for (auto& v : rhs) v = u(gen);

  std::vector<double> a_copy = a, x = rhs;
  REQUIRE(solve_spd(a_copy, x, k));
  for (std::size_t i = 0; i < k; ++i) {
    double r = -rhs[i];
    for (std::size_t j = 0; j < k; ++j) r += a[i * k + j] * x[j];
    CHECK(std::abs(r) < 1e-10);
  }

  std::vector<double> inv = a;
  REQUIRE(invert_spd(inv, k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < k; ++m) s += a[i * k + m] * inv[m * k + j];
      CHECK(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-9);
    }
  }
}

TEST_CASE("solve_spd rejects a singular matrix") {
  std::vector<double> a{1.0, 1.0, 1.0, 1.0};  // rank 1
  std::vector<double> b{1.0, 2.0};
  CHECK_FALSE(solve_spd(a, b, 2));
}
