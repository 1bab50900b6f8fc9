#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <random>

#include "cpm/rng.hpp"
#include "cpm/simd/kernels.hpp"

using namespace cpm;
using namespace cpm::simd;

namespace {

std::vector<double> randv(Rng& r, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.uniform(-2.0, 2.0);
  return v;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

const std::size_t kShapes[][2] = {{1, 1}, {3, 5}, {4, 4}, {7, 9}, {48, 14}, {48, 24}, {2, 12}, {13, 31}};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar kernels match naive loops") {
    const auto& k = scalar_kernels();
    Rng r(1);
    for (const auto& sh : kShapes) {
      const std::size_t rows = sh[0], cols = sh[1];
      const auto w = randv(r, rows * cols);
      const auto x = randv(r, cols);
      const auto b = randv(r, rows);
      const auto d = randv(r, rows);
      std::vector<double> y(rows);
      k.gemv(w.data(), rows, cols, x.data(), b.data(), y.data());
      for (std::size_t i = 0; i < rows; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < cols; ++j) s += w[i * cols + j] * x[j];
        CHECK(y[i] == doctest::Approx(s).epsilon(1e-13));
      }
      std::vector<double> out(cols, 0.5);
      k.gemv_t_acc(w.data(), rows, cols, d.data(), out.data());
      for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.5;
        for (std::size_t i = 0; i < rows; ++i) s += w[i * cols + j] * d[i];
        CHECK(out[j] == doctest::Approx(s).epsilon(1e-13));
      }
      auto w2 = w;
      k.ger_acc(w2.data(), rows, cols, d.data(), x.data());
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) CHECK(w2[i * cols + j] == w[i * cols + j] + d[i] * x[j]);
      }
      auto y2 = x;
      k.axpy(cols, 0.3, b.data(), y2.data());
      for (std::size_t j = 0; j < std::min(cols, rows); ++j) CHECK(y2[j] == x[j] + 0.3 * b[j]);
    }
  }

  TEST_CASE("CPM_SIMD selects the named variant") {
    const char* forced = std::getenv("CPM_SIMD");
    if (forced != nullptr && std::strcmp(forced, "scalar") == 0) {
      CHECK(active_kernels().isa == Isa::Scalar);
    } else {
      CHECK(active_kernels().isa == available_kernels().back()->isa);
    }
  }

  TEST_CASE("every available variant is bit-identical to scalar") {
    const auto variants = available_kernels();
    REQUIRE(variants.front()->isa == Isa::Scalar);
    MESSAGE("variants: " << variants.size() << ", active: " << active_kernels().name);
    const auto& ref = scalar_kernels();
    Rng r(2);
    for (const KernelTable* k : variants) {
      for (const auto& sh : kShapes) {
        const std::size_t rows = sh[0], cols = sh[1];
        const auto w = randv(r, rows * cols);
        const auto x = randv(r, cols);
        const auto b = randv(r, rows);
        const auto d = randv(r, rows);

        std::vector<double> y1(rows), y2(rows);
        ref.gemv(w.data(), rows, cols, x.data(), b.data(), y1.data());
        k->gemv(w.data(), rows, cols, x.data(), b.data(), y2.data());
        CHECK(bits_equal(y1, y2));
        ref.gemv(w.data(), rows, cols, x.data(), nullptr, y1.data());
        k->gemv(w.data(), rows, cols, x.data(), nullptr, y2.data());
        CHECK(bits_equal(y1, y2));

        std::vector<double> o1(cols, 0.25), o2(cols, 0.25);
        ref.gemv_t_acc(w.data(), rows, cols, d.data(), o1.data());
        k->gemv_t_acc(w.data(), rows, cols, d.data(), o2.data());
        CHECK(bits_equal(o1, o2));

        auto g1 = w, g2 = w;
        ref.ger_acc(g1.data(), rows, cols, d.data(), x.data());
        k->ger_acc(g2.data(), rows, cols, d.data(), x.data());
        CHECK(bits_equal(g1, g2));

        auto a1 = w, a2 = w;
        ref.axpy(a1.size(), -0.7, g1.data(), a1.data());
        k->axpy(a2.size(), -0.7, g1.data(), a2.data());
        CHECK(bits_equal(a1, a2));

        AdamCoeffs c;
        c.bias1 = 1 - 0.9 * 0.9;
        c.bias2 = 1 - 0.999 * 0.999;
        auto p1 = w, p2 = w;
        auto m1 = randv(r, w.size()), m2 = m1;
        auto v1 = w, v2 = w;
        for (auto& v : v1) v = v * v;
        v2 = v1;
        ref.adam(p1.size(), p1.data(), g1.data(), m1.data(), v1.data(), c);
        k->adam(p2.size(), p2.data(), g1.data(), m2.data(), v2.data(), c);
        CHECK(bits_equal(p1, p2));
        CHECK(bits_equal(m1, m2));
        CHECK(bits_equal(v1, v2));
      }
    }
  }
}
