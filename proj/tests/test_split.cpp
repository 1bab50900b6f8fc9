#include <doctest.h>

#include <sstream>

#include "cpm/split.hpp"

using namespace cpm;

namespace {

CellLoadState cell(LoadUnits load, int rounds = 0) {
  CellLoadState s;
  s.cell = CellId{1, 4, rounds};
  s.load = load;
  s.family_load = 100;
  s.split_rounds = rounds;
  return s;
}

}  // namespace

TEST_SUITE("split") {
  TEST_CASE("policy validation") {
    CHECK_NOTHROW(SplitPolicy{}.validate());
    CHECK_THROWS_AS((SplitPolicy{0.0, 75.0, 2, 0}.validate()), ValidationError);
    CHECK_THROWS_AS((SplitPolicy{80.0, 75.0, 2, 0}.validate()), ValidationError);
    CHECK_THROWS_AS((SplitPolicy{60.0, 100.0, 2, 0}.validate()), ValidationError);
    CHECK_THROWS_AS((SplitPolicy{60.0, 75.0, 3, 0}.validate()), ValidationError);
    CHECK(SplitPolicy{60, 75, 8, 0}.max_rounds() == 3);
  }

  TEST_CASE("draw_r") {
    SplitPolicy fixed{70.0, 70.0, 2, 0};
    Rng r(1);
    CHECK(draw_r(fixed, r) == 70.0);
    SplitPolicy p;
    Rng a(5), b(5);
    for (int i = 0; i < 1000; ++i) {
      const double x = draw_r(p, a);
      CHECK((x >= 60.0 && x <= 75.0));
      CHECK(x == draw_r(p, b));
    }
  }

  TEST_CASE("split arithmetic") {
    const SplitPolicy p;
    auto o = split_cell(cell(100), 70.0, p, 5, 9);
    CHECK(o.child.load == 70);
    CHECK(o.parent.load == 30);
    CHECK(o.child.cell == CellId{1, 9, 1});
    CHECK(o.parent.cell == CellId{1, 4, 0});
    CHECK(o.event.parent == CellId{1, 4, 0});
    CHECK(o.event.child == CellId{1, 9, 1});
    CHECK(o.event.r == 70.0);
    CHECK(o.event.hour == 5);
    CHECK(o.event.round == 1);
    CHECK(o.parent.split_factor() == 2);

    o = split_cell(cell(0), 65.0, p, 5, 9);
    CHECK(o.child.load == 0);
    CHECK(o.parent.load == 0);
    CHECK_THROWS_AS(split_cell(cell(100), 59.0, p, 5, 9), ValidationError);
  }

  TEST_CASE("factor cap") {
    SplitPolicy p;
    Rng r(2);
    const auto first = split_cell(cell(100), p, 0, r, 10);
    CHECK_THROWS_AS(split_cell(first.parent, p, 1, r, 11), SplitRefused);
    CHECK_THROWS_AS(split_cell(first.child, p, 1, r, 11), SplitRefused);
    p.max_factor = 4;
    const auto second = split_cell(first.parent, p, 1, r, 11);
    CHECK(second.parent.split_factor() == 4);
    CHECK_THROWS_AS(split_cell(second.parent, p, 2, r, 12), SplitRefused);
  }

  TEST_CASE("load is conserved exactly over many splits") {
    SplitPolicy p;
    p.max_factor = 8;
    Rng r(3);
    for (LoadUnits load : {LoadUnits{0}, LoadUnits{1}, LoadUnits{7}, LoadUnits{999'983}, kCellLoadUnits}) {
      auto s = cell(load);
      for (int round = 0; round < 3; ++round) {
        const auto o = split_cell(s, p, round, r, 20 + round);
        CHECK(o.parent.load + o.child.load == s.load);
        CHECK(o.child.cell.generation == s.cell.generation + 1);
        CHECK(o.child.cell.generation <= p.max_rounds());
        s = o.parent;
      }
    }
  }

  TEST_CASE("split effects") {
    const KpiSample pre{3, 90.0, 0.9};
    const auto o = split_cell(cell(100), 60.0, SplitPolicy{}, 3, 7);
    const auto [parent, child] = apply_split_effects(pre, o.parent, o.child);
    CHECK(parent.prb_util == doctest::Approx(36.0));
    CHECK(child.prb_util == doctest::Approx(54.0));
    CHECK(parent.ip_throughput == doctest::Approx(0.9 * 90.0 / 36.0));
    CHECK(parent.ip_throughput == doctest::Approx(2.25));
    CHECK(child.ip_throughput == doctest::Approx(1.5));
    CHECK(parent.timestamp == 3);
    const CongestionRule rule;
    CHECK_FALSE(evaluate_congestion(parent, rule));
    CHECK_FALSE(evaluate_congestion(child, rule));
    CHECK(parent.prb_util <= pre.prb_util);
    CHECK(child.prb_util <= pre.prb_util);
  }

  TEST_CASE("kpi_at_share caps throughput and handles empty cells") {
    const KpiSample pre{0, 50.0, 4.0};
    CHECK(kpi_at_share(pre, 1.0, 8.0) == pre);
    CHECK(kpi_at_share(pre, 0.25, 8.0).ip_throughput == 8.0);  // 16 capped at the zero-load value
    CHECK(kpi_at_share(pre, 0.0, 8.0).ip_throughput == 8.0);
    CHECK(kpi_at_share(pre, 0.0, 8.0).prb_util == 0.0);
    CHECK(kpi_at_share(pre, 0.25, 3.0).ip_throughput == 4.0);  // never below the unsplit value
    const KpiSample idle{0, 0.0, 6.0};
    CHECK(kpi_at_share(idle, 0.5, 8.0) == idle);
    CHECK(kpi_at_share(pre, 3.0, 8.0).prb_util == 100.0);
  }

  TEST_CASE("histograms") {
    const std::vector<double> edges{0.0, 1.0, 2.0};
    KpiSeries a(CellId{0, 0, 0});
    for (int i = 0; i < 6; ++i) a.append({i, 50.0, 0.5});
    KpiSeries empty(CellId{0, 1, 0});
    KpiSeries mixed(CellId{0, 2, 0});
    const double v[] = {0.0, 0.99, 1.0, 1.5, 2.0, 7.0, 1.999};
    for (int i = 0; i < 7; ++i) mixed.append({i, 10.0, v[i]});
    const std::vector<KpiSeries> set{a, empty, mixed};
    const auto h = histogram_hours(set, edges);
    REQUIRE(h.size() == 3);
    CHECK(h[0].counts == std::vector<std::size_t>{6, 0, 0});
    CHECK(h[1].counts == std::vector<std::size_t>{0, 0, 0});
    CHECK(h[2].counts == std::vector<std::size_t>{2, 3, 2});
    for (std::size_t i = 0; i < 3; ++i) {
      std::size_t sum = 0;
      for (auto c : h[i].counts) sum += c;
      CHECK(sum == set[i].size());
    }
    CHECK(hours_below(h, edges, 1.0) == 8);
    CHECK_THROWS_AS(histogram_hours(set, std::vector<double>{1.0}), ValidationError);
    CHECK_THROWS_AS(histogram_hours(set, std::vector<double>{0.0, 1.0, 1.0}), ValidationError);

    const auto def = default_bin_edges();
    CHECK(def.size() == 11);
    CHECK(def.back() == 5.0);

    std::ostringstream csv;
    export_histogram_csv(csv, std::span<const CellHistogram>(h).first(1), edges);
    CHECK(csv.str() == "cell,bin_low,bin_high,hours\n0:0:0,0,1,6\n0:0:0,1,2,0\n0:0:0,2,inf,0\n");
  }
}
