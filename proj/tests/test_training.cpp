#include <doctest.h>

#include <cmath>

#include "cpm/traffic.hpp"
#include "cpm/training.hpp"

using namespace cpm;

namespace {

KpiSeries constant_series(std::size_t n, double prb, double tput) {
  KpiSeries s(CellId{0, 0, 0});
  for (std::size_t i = 0; i < n; ++i) s.append({static_cast<Hour>(i), prb, tput});
  return s;
}

KpiSeries clean_cell(int days, std::uint64_t seed) {
  SyntheticProfile p;
  p.n_enb = 1;
  p.cells_per_enb = 1;
  p.n_days = days;
  p.noise_std = 0.0;
  p.congested_cell_fraction = 0.0;
  p.seed = seed;
  return generate_synthetic(p).front();
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("config validation") {
    TrainingConfig c;
    CHECK_NOTHROW(c.validate());
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.train_fraction = 1.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.lookback = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }

  TEST_CASE("window counts and targets") {
    TrainingConfig cfg;
    const NormStats unit{{0.0, 0.0}, {100.0, 10.0}};
    CHECK(make_windows(constant_series(25, 50, 2), cfg, unit).size() == 1);
    CHECK(make_windows(constant_series(600, 50, 2), cfg, unit).size() == 576);
    CHECK_THROWS_AS(make_windows(constant_series(24, 50, 2), cfg, unit), TrainingError);

    KpiSeries ramp(CellId{0, 0, 0});
    for (int i = 0; i < 30; ++i) ramp.append({i, static_cast<double>(i), 10.0 - 0.1 * i});
    cfg.lookback = 4;
    const auto ds = make_windows(ramp, cfg, unit);
    REQUIRE(ds.size() == 26);
    for (std::size_t w = 0; w < ds.size(); ++w) {
      const auto ex = ds.example(w);
      CHECK(ex.input.size() == 8);
      CHECK(ex.target[0] == doctest::Approx((w + 4) / 100.0));
      CHECK(ex.input[6] == doctest::Approx((w + 3) / 100.0));
    }

    const auto flat = make_windows(constant_series(40, 30, 3), TrainingConfig{}, unit);
    for (std::size_t i = 0; i < flat.inputs.size(); i += 2) CHECK(flat.inputs[i] == flat.inputs[0]);
  }

  TEST_CASE("norm is fitted on training hours only") {
    KpiSeries s(CellId{0, 0, 0});
    for (int i = 0; i < 10; ++i) s.append({i, i < 8 ? 10.0 + i : 99.0, 1.0 + i});
    const std::vector<KpiSeries> v{s};
    const std::vector<std::size_t> hours{8};
    const auto n = fit_norm(v, hours);
    CHECK(n.min[0] == 10.0);
    CHECK(n.max[0] == 17.0);
    CHECK(n.max[1] == 8.0);
  }

  TEST_CASE("adam: zero gradient keeps parameters") {
    std::vector<double> p{0.5, -1.0, 2.0};
    const std::vector<double> g(3, 0.0);
    AdamState st;
    adam_step(p, g, st, AdamHyper{});
    CHECK(p == std::vector<double>{0.5, -1.0, 2.0});
    CHECK(st.step == 1);
  }

  TEST_CASE("adam: first step moves by about lr against the gradient sign") {
    std::vector<double> p{0.5, -1.0, 2.0};
    const std::vector<double> g{3.0, -0.01, 1e-3};
    AdamState st;
    adam_step(p, g, st, AdamHyper{});
    CHECK(p[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-1.0 + 1e-3).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(2.0 - 1e-3).epsilon(1e-5));
  }

  TEST_CASE("adam: three steps on w^2 match a hand iteration") {
    const AdamHyper h;
    std::vector<double> w{1.0};
    AdamState st;
    double ow = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      const std::vector<double> g{2.0 * w[0]};
      adam_step(w, g, st, h);
      const double og = 2.0 * ow;
      m = h.beta1 * m + (1 - h.beta1) * og;
      v = h.beta2 * v + (1 - h.beta2) * og * og;
      const double mh = m / (1 - std::pow(h.beta1, t));
      const double vh = v / (1 - std::pow(h.beta2, t));
      ow -= h.lr * mh / (std::sqrt(vh) + h.epsilon);
      CHECK(w[0] == doctest::Approx(ow).epsilon(1e-14));
    }
    CHECK(std::abs(w[0]) < 1.0);
    CHECK(w[0] == doctest::Approx(1.0 - 3e-3).epsilon(1e-6));
  }

  TEST_CASE("adam rejects mismatched sizes") {
    std::vector<double> p(3);
    AdamState st;
    CHECK_THROWS_AS(adam_step(p, std::vector<double>(2), st, AdamHyper{}), ShapeError);
  }

  TEST_CASE("initialization bounds and forget bias") {
    const LstmConfig cfg;
    const auto p = init_params(cfg, 3);
    const ParamLayout l(cfg);
    for (const auto& L : l.layers) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(L.cols));
      for (std::size_t i = 0; i < L.rows * L.cols; ++i) CHECK(std::abs(p[L.w_offset + i]) <= bound);
      for (std::size_t u = 0; u < L.hidden; ++u) {
        CHECK(p[L.b_offset + u] == 0.0);
        CHECK(p[L.b_offset + L.hidden + u] == 1.0);
      }
    }
    CHECK(init_params(cfg, 3) == p);
    CHECK_FALSE(init_params(cfg, 4) == p);
  }

  TEST_CASE("training is deterministic and reduces loss on a clean cell") {
    const auto s = clean_cell(10, 21);
    TrainingConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 5;
    const auto a = train(s, LstmConfig{}, cfg);
    const auto b = train(s, LstmConfig{}, cfg);
    CHECK(a.model == b.model);
    REQUIRE(a.log.epochs.size() == 30);
    CHECK(a.log.epochs.back().train_loss < 0.1 * a.log.epochs.front().train_loss);
    CHECK(a.model.trained_epochs == 30);
    CHECK(a.log.train_windows + a.log.validation_windows == s.size() - 24);
    CHECK(holdout_accuracy(a.model, s, cfg) == doctest::Approx(a.log.holdout_accuracy).epsilon(1e-12));
    CHECK(holdout_predictions(a.model, s, cfg).size() == a.log.validation_windows);
  }

  TEST_CASE("insufficient data") {
    TrainingConfig cfg;
    CHECK_THROWS_AS(train(constant_series(24, 50, 2), LstmConfig{}, cfg), TrainingError);
    CHECK_THROWS_AS(train(constant_series(29, 50, 2), LstmConfig{}, cfg), TrainingError);
    CHECK_THROWS_AS(train(std::span<const KpiSeries>{}, LstmConfig{}, cfg), TrainingError);
    CHECK_THROWS_AS(train(constant_series(100, 50, 2), LstmConfig{1, 3, 3, 2}, cfg), ShapeError);
  }

  TEST_CASE("constant series predicts the constant") {
    TrainingConfig cfg;
    cfg.epochs = 3;
    const auto s = constant_series(80, 42.0, 3.5);
    const auto r = train(s, LstmConfig{}, cfg);
    const auto p = predict_next_hour(r.model, s);
    CHECK(p.prb_util == doctest::Approx(42.0).epsilon(1e-3));
    CHECK(p.ip_throughput == doctest::Approx(3.5).epsilon(1e-3));
    CHECK(p.timestamp == 80);
  }

  TEST_CASE("prediction clamps and zero model returns the minimum") {
    CHECK(to_kpi_sample(std::vector<double>{105.0, 2.0}, 0).prb_util == 100.0);
    CHECK(to_kpi_sample(std::vector<double>{-3.0, -2.0}, 0).prb_util == 0.0);
    CHECK(to_kpi_sample(std::vector<double>{50.0, -2.0}, 0).ip_throughput == 0.0);
    CHECK_THROWS_AS(to_kpi_sample(std::vector<double>{std::nan(""), 2.0}, 0), ShapeError);

    auto m = ForecastModel::zeros(LstmConfig{}, 24);
    m.norm = NormStats{{12.0, 0.75}, {80.0, 6.0}};
    const auto p = predict_next_hour(m, constant_series(30, 50, 2));
    CHECK(p.prb_util == 12.0);
    CHECK(p.ip_throughput == 0.75);
    CHECK_THROWS_AS(predict_next_hour(m, constant_series(23, 50, 2)), ShapeError);
  }

  TEST_CASE("accuracy metric") {
    const std::vector<double> a{2.0, 4.0}, p{1.0, 5.0};
    CHECK(accuracy(a, a) == 100.0);
    CHECK(accuracy(p, a) == doctest::Approx(62.5));
    const std::vector<double> twice{4.0, 8.0};
    CHECK(accuracy(twice, a) == 0.0);
    const std::vector<double> triple{6.0, 12.0};
    CHECK(accuracy(triple, a) == 0.0);  // floored
    const std::vector<double> kp{3.0, 15.0}, ka{6.0, 12.0};
    CHECK(accuracy(kp, ka) == doctest::Approx(accuracy(std::vector<double>{1.0, 5.0}, std::vector<double>{2.0, 4.0})));
    const std::vector<double> with_zero{0.0, 4.0}, pz{7.0, 5.0};
    CHECK(accuracy(pz, with_zero) == doctest::Approx(75.0));
    const std::vector<double> zeros{0.0, 1e-9};
    CHECK_THROWS_AS(accuracy(zeros, zeros), MetricError);
    CHECK_THROWS_AS(accuracy(std::vector<double>{}, std::vector<double>{}), MetricError);
    CHECK_THROWS_AS(accuracy(a, std::vector<double>{1.0}), MetricError);

    const std::vector<KpiSample> sa{{0, 50.0, 2.0}}, sp{{0, 25.0, 2.0}};
    CHECK(accuracy(sp, sa) == doctest::Approx(75.0));
  }

  TEST_CASE("train_each keeps input order and isolates failures") {
    TrainingConfig cfg;
    cfg.epochs = 2;
    auto good = clean_cell(3, 1);
    KpiSeries short_one(CellId{0, 1, 0});
    for (int i = 0; i < 10; ++i) short_one.append({i, 10.0, 1.0});
    const std::vector<KpiSeries> v{short_one, good};
    const auto r = train_each(v, LstmConfig{}, cfg);
    REQUIRE(r.size() == 2);
    CHECK(r[0].cell == CellId{0, 1, 0});
    CHECK_FALSE(r[0].result.has_value());
    CHECK(r[0].error.find("lookback") != std::string::npos);
    CHECK(r[1].result.has_value());
    TrainingConfig direct = cfg;
    direct.seed = cell_seed(cfg.seed, good.cell());
    CHECK(train(good, LstmConfig{}, direct).model == r[1].result->model);
  }
}
