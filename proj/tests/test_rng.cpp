#include <doctest.h>

#include <cmath>
#include <set>

#include "cpm/rng.hpp"

using namespace cpm;

TEST_SUITE("rng") {
  TEST_CASE("engine output is the standard mt19937_64 sequence") {
    // The 10000th output of a default-seeded mt19937_64 is fixed by the C++ standard.
    Rng r(5489u);
    std::uint64_t x = 0;
    for (int i = 0; i < 10000; ++i) x = r.next_u64();
    CHECK(x == 9981545732273789042ULL);
  }

  TEST_CASE("same seed, same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
      CHECK(a.uniform01() == b.uniform01());
      CHECK(a.normal() == b.normal());
    }
  }

  TEST_CASE("uniform bounds and degenerate interval") {
    Rng r(1);
    for (int i = 0; i < 10000; ++i) {
      const double u = r.uniform01();
      CHECK((u >= 0.0 && u < 1.0));
      const double v = r.uniform(60.0, 75.0);
      CHECK((v >= 60.0 && v <= 75.0));
    }
    CHECK(r.uniform(70.0, 70.0) == 70.0);
  }

  TEST_CASE("uniform_index covers the range without bias") {
    Rng r(9);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
      const auto k = r.uniform_index(7);
      REQUIRE(k < 7);
      ++counts[k];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  }

  TEST_CASE("normal moments") {
    Rng r(3);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double z = r.normal();
      s += z;
      s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
  }

  TEST_CASE("derived seeds separate substreams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 20; ++a) {
      for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, {a, b}));
    }
    CHECK(seen.size() == 400);
    CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
    CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
    CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
  }
}
