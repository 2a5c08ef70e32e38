#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

#include "stcausal/parallel.hpp"

using namespace stcausal;

TEST_CASE("parallel_for visits every index exactly once") {
  const std::int64_t n = 20000;
  std::vector<std::atomic<int>> hits(n);
  parallel_for(n, [&](std::int64_t i) { hits[i].fetch_add(1); }, 8);
  for (std::int64_t i = 0; i < n; ++i) REQUIRE(hits[i].load() == 1);
}

TEST_CASE("slot-style results are identical across thread counts") {
  const std::int64_t n = 5000;
  auto run = [&](int threads) {
    std::vector<double> out(n);
    parallel_for(n, [&](std::int64_t i) { out[i] = 0.5 * i * i - 3.0 * i; }, threads);
    return out;
  };
  CHECK(run(1) == run(8));
}

TEST_CASE("exceptions from tasks are rethrown") {
  CHECK_THROWS_AS(
      parallel_for(1000, [](std::int64_t i) {
        if (i == 500) throw std::runtime_error("boom");
      }, 4),
      std::runtime_error);
  CHECK_THROWS_AS(
      parallel_for(10, [](std::int64_t) { throw std::runtime_error("serial"); }, 1),
      std::runtime_error);
}

TEST_CASE("default thread count is settable") {
  set_default_threads(3);
  CHECK(default_threads() == 3);
  set_default_threads(1);
  CHECK(default_threads() == 1);
  CHECK(hardware_threads() >= 1);
}

TEST_CASE("degenerate sizes") {
  int calls = 0;
  parallel_for(0, [&](std::int64_t) { ++calls; }, 4);
  CHECK(calls == 0);
  parallel_for(1, [&](std::int64_t) { ++calls; }, 4);
  CHECK(calls == 1);
}
