#include <doctest.h>

#include <cmath>

#include "cpm/lstm.hpp"
#include "cpm/rng.hpp"
#include "gradcheck.hpp"
#include "oracle.hpp"

using namespace cpm;

TEST_SUITE("lstm") {
  TEST_CASE("layout of the default network") {
    const ParamLayout l(LstmConfig{});
    REQUIRE(l.layers.size() == 2);
    CHECK(l.layers[0].rows == 48);
    CHECK(l.layers[0].cols == 14);
    CHECK(l.layers[1].cols == 24);
    CHECK(l.total == 48 * 14 + 48 + 48 * 24 + 48 + 2 * 12 + 2);
    CHECK(l.head_b_offset == l.total - 2);
  }

  TEST_CASE("config validation") {
    CHECK_THROWS((LstmConfig{0, 12, 2, 2}.validate()));
    CHECK_THROWS((LstmConfig{2, 0, 2, 2}.validate()));
    CHECK_THROWS((LstmConfig{2, 12, 0, 2}.validate()));
    CHECK_THROWS((LstmConfig{2, 12, 2, 0}.validate()));
  }

  TEST_CASE("cell step at zero weights") {
    const auto m = ForecastModel::zeros(LstmConfig{1, 3, 2, 2}, 4);
    const auto layer = m.layer(0);
    const std::vector<double> x{0.3, -0.2}, zero(3, 0.0);
    auto s = lstm_cell_step(x, zero, zero, layer);
    for (double v : s.h) CHECK(v == 0.0);
    for (double v : s.c) CHECK(v == 0.0);
    const std::vector<double> c{0.8, -1.2, 2.0};
    s = lstm_cell_step(x, zero, c, layer);
    for (std::size_t u = 0; u < 3; ++u) {
      CHECK(s.c[u] == doctest::Approx(0.5 * c[u]).epsilon(1e-15));
      CHECK(s.h[u] == doctest::Approx(0.5 * std::tanh(0.5 * c[u])).epsilon(1e-15));
    }
  }

  TEST_CASE("cell step matches the textbook recurrence") {
    Rng r(5);
    const auto m = gradcheck::random_model(r, 1, 4, 3, 2, 1);
    const auto g = oracle::unpack(m, 0);
    std::vector<double> x{0.1, -0.7, 0.4}, h{0.2, 0.0, -0.3, 0.5}, c{1.0, -0.5, 0.25, 0.0};
    const auto got = lstm_cell_step(x, h, c, m.layer(0));
    oracle::step(g, x, h, c);
    for (std::size_t u = 0; u < 4; ++u) {
      CHECK(got.h[u] == doctest::Approx(h[u]).epsilon(1e-13));
      CHECK(got.c[u] == doctest::Approx(c[u]).epsilon(1e-13));
    }
  }

  TEST_CASE("cell step rejects wrong shapes") {
    const auto m = ForecastModel::zeros(LstmConfig{1, 3, 2, 2}, 4);
    const std::vector<double> x3(3), h3(3), h2(2);
    CHECK_THROWS_AS(lstm_cell_step(x3, h3, h3, m.layer(0)), ShapeError);
    CHECK_THROWS_AS(lstm_cell_step(std::vector<double>(2), h2, h3, m.layer(0)), ShapeError);
  }

  TEST_CASE("forward: zero model, lookback 1, oracle") {
    const auto z = ForecastModel::zeros(LstmConfig{}, 24);
    const std::vector<double> window(48, 0.3);
    for (double v : forward(z, window)) CHECK(v == 0.0);

    Rng r(6);
    const auto m1 = gradcheck::random_model(r, 1, 5, 2, 2, 1);
    const std::vector<double> x{0.4, -0.9};
    const std::vector<double> zero(5, 0.0);
    const auto s = lstm_cell_step(x, zero, zero, m1.layer(0));
    const ParamLayout l(m1.config);
    const auto y = forward(m1, x);
    for (std::size_t o = 0; o < 2; ++o) {
      double e = m1.params[l.head_b_offset + o];
      for (std::size_t j = 0; j < 5; ++j) e += m1.params[l.head_w_offset + o * 5 + j] * s.h[j];
      CHECK(y[o] == doctest::Approx(e).epsilon(1e-14));
    }

    for (int layers : {1, 2, 3}) {
      const auto m = gradcheck::random_model(r, layers, 6, 2, 2, 7);
      std::vector<double> w(14);
      for (auto& v : w) v = r.uniform(-1, 1);
      const auto got = forward(m, w);
      const auto want = oracle::forward(m, w);
      for (std::size_t o = 0; o < 2; ++o) CHECK(got[o] == doctest::Approx(want[o]).epsilon(1e-12));
    }
  }

  TEST_CASE("forward rejects malformed input") {
    auto m = ForecastModel::zeros(LstmConfig{}, 24);
    CHECK_THROWS_AS(forward(m, std::vector<double>(47)), ShapeError);
    CHECK_THROWS_AS(forward(m, std::vector<double>{}), ShapeError);
    m.params.pop_back();
    CHECK_THROWS_AS(forward(m, std::vector<double>(48)), ShapeError);
    CHECK_THROWS_AS(m.validate(), ShapeError);
  }

  TEST_CASE("mse loss") {
    const std::vector<double> a{1.0, 2.0}, b{0.0, 1.0};
    CHECK(mse_loss(a, a) == 0.0);
    CHECK(mse_loss(a, b) == 1.0);
    Rng r(8);
    std::vector<double> p(9), t(9);
    double s = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      p[i] = r.uniform(-3, 3);
      t[i] = r.uniform(-3, 3);
      s += (p[i] - t[i]) * (p[i] - t[i]);
    }
    CHECK(mse_loss(p, t) == doctest::Approx(s / 9).epsilon(1e-14));
    CHECK(mse_loss(p, t) >= 0.0);
    CHECK_THROWS_AS(mse_loss(a, std::vector<double>{1.0}), ShapeError);
  }

  TEST_CASE("zero gradient at an exact fit") {
    Rng r(9);
    const auto m = gradcheck::random_model(r, 2, 3, 2, 2, 4);
    auto b = gradcheck::random_batch(r, m, 3);
    for (std::size_t i = 0; i < b.inputs.size(); ++i) b.targets[i] = forward(m, b.inputs[i]);
    const auto g = backward(m, b.examples());
    CHECK(g.loss == 0.0);
    for (double v : g.grads) CHECK(v == 0.0);
  }

  TEST_CASE("backward is pure and reports the batch loss") {
    Rng r(10);
    const auto m = gradcheck::random_model(r, 2, 3, 2, 2, 4);
    const auto b = gradcheck::random_batch(r, m, 5);
    const auto g1 = backward(m, b.examples());
    const auto g2 = backward(m, b.examples());
    CHECK(g1.grads == g2.grads);
    CHECK(g1.loss == doctest::Approx(gradcheck::batch_loss(m, b)).epsilon(1e-13));
  }

  TEST_CASE("gradients agree with central differences") {
    Rng r(11);
    for (int trial = 0; trial < 4; ++trial) {
      const int layers = 1 + trial % 2;
      const auto m = gradcheck::random_model(r, layers, 3, 2, 2, 4);
      const auto b = gradcheck::random_batch(r, m, 3);
      const auto res = gradcheck::check(m, b);
      CHECK(res.failed == 0);
      CHECK(res.worst_rel < 1e-4);
    }
  }

  TEST_CASE("backward shape errors") {
    const auto m = ForecastModel::zeros(LstmConfig{1, 3, 2, 2}, 4);
    CHECK_THROWS_AS(backward(m, {}), ShapeError);
    const std::vector<double> x(8), x2(6), t(2), t3(3);
    std::vector<Example> mixed{{x, t}, {x2, t}};
    CHECK_THROWS_AS(backward(m, mixed), ShapeError);
    std::vector<Example> bad_t{{x, t3}};
    CHECK_THROWS_AS(backward(m, bad_t), ShapeError);
  }

  TEST_CASE("normalization") {
    NormStats n{{10.0, 0.0}, {90.0, 0.0}};
    for (double x : {10.0, 33.3, 90.0, 57.123456789}) {
      CHECK(n.denormalize(0, n.normalize(0, x)) == doctest::Approx(x).epsilon(1e-15));
    }
    CHECK(n.normalize(0, 10.0) == 0.0);
    CHECK(n.normalize(0, 90.0) == 1.0);
    CHECK(n.normalize(1, 5.0) == 0.0);    // degenerate feature
    CHECK(n.denormalize(1, 0.7) == 0.0);  // back to min
  }
}
