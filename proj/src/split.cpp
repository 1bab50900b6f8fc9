#include "cpm/split.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cpm/traffic.hpp"

namespace cpm {

void SplitPolicy::validate() const {
  if (!(r_min > 0.0 && r_min <= r_max && r_max < 100.0)) {
    throw ValidationError("split policy: need 0 < r_min <= r_max < 100");
  }
  if (max_factor != 2 && max_factor != 4 && max_factor != 8) {
    throw ValidationError("split policy: max_factor must be 2, 4 or 8");
  }
}

int SplitPolicy::max_rounds() const { return max_factor == 8 ? 3 : max_factor == 4 ? 2 : 1; }

double CellLoadState::share() const {
  return family_load > 0 ? static_cast<double>(load) / static_cast<double>(family_load) : 0.0;
}

double draw_r(const SplitPolicy& policy, Rng& rng) {
  policy.validate();
  return rng.uniform(policy.r_min, policy.r_max);
}

SplitOutcome split_cell(const CellLoadState& state, double r, const SplitPolicy& policy, Hour hour,
                        int child_cell_index) {
  policy.validate();
  if (!(r >= policy.r_min && r <= policy.r_max)) throw ValidationError("split: R outside the policy interval");
  if (state.load < 0) throw ValidationError("split: negative load");
  if (state.split_factor() >= policy.max_factor) {
    throw SplitRefused("cell " + state.cell.to_string() + " already at split factor " +
                       std::to_string(state.split_factor()));
  }
  SplitOutcome out;
  out.parent = state;
  out.child = state;
  const auto moved = static_cast<LoadUnits>(std::llround(static_cast<double>(state.load) * r / 100.0));
  out.child.load = moved;
  out.parent.load = state.load - moved;
  out.parent.split_rounds = state.split_rounds + 1;
  out.child.split_rounds = out.parent.split_rounds;
  out.child.cell = CellId{state.cell.enb, child_cell_index, state.cell.generation + 1};
  out.event = SplitEvent{state.cell, out.child.cell, r, hour, out.parent.split_rounds};
  return out;
}

SplitOutcome split_cell(const CellLoadState& state, const SplitPolicy& policy, Hour hour, Rng& rng,
                        int child_cell_index) {
  if (state.split_factor() >= policy.max_factor) {
    throw SplitRefused("cell " + state.cell.to_string() + " already at split factor " +
                       std::to_string(state.split_factor()));
  }
  return split_cell(state, draw_r(policy, rng), policy, hour, child_cell_index);
}

KpiSample kpi_at_share(const KpiSample& unsplit, double share, double cap) {
  if (share == 1.0) return unsplit;
  KpiSample out = unsplit;
  out.prb_util = std::clamp(share * unsplit.prb_util, 0.0, 100.0);
  const double ceiling = std::max(cap, unsplit.ip_throughput);
  if (out.prb_util > 0.0) {
    out.ip_throughput = std::min(unsplit.ip_throughput * (unsplit.prb_util / out.prb_util), ceiling);
  } else if (unsplit.prb_util > 0.0) {
    out.ip_throughput = ceiling;  // no load left
  }
  return out;
}

std::pair<KpiSample, KpiSample> apply_split_effects(const KpiSample& pre_split, const CellLoadState& parent,
                                                    const CellLoadState& child) {
  const LoadUnits before = parent.load + child.load;
  if (before <= 0) return {pre_split, pre_split};
  const double cap = parent.throughput_cap;
  return {kpi_at_share(pre_split, static_cast<double>(parent.load) / static_cast<double>(before), cap),
          kpi_at_share(pre_split, static_cast<double>(child.load) / static_cast<double>(before), cap)};
}

std::vector<double> default_bin_edges() {
  std::vector<double> edges;
  for (int i = 0; i <= 10; ++i) edges.push_back(0.5 * i);
  return edges;
}

std::vector<CellHistogram> histogram_hours(std::span<const KpiSeries> series, std::span<const double> edges) {
  if (edges.size() < 2) throw ValidationError("histogram: need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ValidationError("histogram: bin edges must be strictly increasing");
  }
  std::vector<CellHistogram> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    CellHistogram h{s.cell(), std::vector<std::size_t>(edges.size(), 0)};
    for (const auto& k : s.samples()) {
      // Index of the last edge <= value; the first bin also takes values below edges[0].
      const auto it = std::upper_bound(edges.begin(), edges.end(), k.ip_throughput);
      const auto bin = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
      ++h.counts[bin];
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::size_t hours_below(std::span<const CellHistogram> hist, std::span<const double> edges, double threshold) {
  std::size_t total = 0;
  for (const auto& h : hist) {
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      if (edges[b + 1] <= threshold) total += h.counts[b];
    }
  }
  return total;
}

void export_histogram_csv(std::ostream& out, std::span<const CellHistogram> hist, std::span<const double> edges) {
  out << "cell,bin_low,bin_high,hours\n";
  for (const auto& h : hist) {
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out << h.cell.to_string() << ',' << format_double(edges[b]) << ','
          << (b + 1 < edges.size() ? format_double(edges[b + 1]) : std::string("inf")) << ',' << h.counts[b]
          << '\n';
    }
  }
}

}  // namespace cpm
