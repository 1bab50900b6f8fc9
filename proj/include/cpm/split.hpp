#pragma once

// Cell-splitting remedy: draw the migration share R, move R% of a congested
// cell's load to a new cell, and derive both cells' KPIs from their shares.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cpm/kpi.hpp"
#include "cpm/rng.hpp"

namespace cpm {

struct SplitPolicy {
  double r_min = 60.0;  // percent
  double r_max = 75.0;  // percent
  int max_factor = 2;   // 2, 4 or 8
  std::uint64_t seed = 0;

  void validate() const;
  int max_rounds() const;  // log2(max_factor)
  friend bool operator==(const SplitPolicy&, const SplitPolicy&) = default;
};

/// Abstract offered load (user population proxy). Integer units make load
/// conservation across a split exact.
using LoadUnits = std::int64_t;
inline constexpr LoadUnits kCellLoadUnits = 1'000'000;

struct CellLoadState {
  CellId cell;
  LoadUnits load = kCellLoadUnits;
  /// Split rounds this cell's load has been through; split factor = 2^rounds.
  int split_rounds = 0;
  /// Load of the original (unsplit) cell this one descends from.
  LoadUnits family_load = kCellLoadUnits;
  /// Zero-load throughput cap, Mbps.
  double throughput_cap = 8.0;

  int split_factor() const { return 1 << split_rounds; }
  double share() const;
  friend bool operator==(const CellLoadState&, const CellLoadState&) = default;
};

struct SplitEvent {
  CellId parent;
  CellId child;
  double r = 0.0;  // percent of the parent's load moved to the child
  Hour hour = 0;
  int round = 0;   // parent's split round count after this split
};

class SplitRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform in [r_min, r_max] from `rng`.
double draw_r(const SplitPolicy& policy, Rng& rng);

struct SplitOutcome {
  CellLoadState parent;
  CellLoadState child;
  SplitEvent event;
};

/// Child takes round(load * r / 100) units, the parent keeps the rest; the
/// child is (enb, child_cell_index, generation + 1). Throws SplitRefused when
/// the parent's split factor already equals policy.max_factor.
SplitOutcome split_cell(const CellLoadState& state, double r, const SplitPolicy& policy, Hour hour,
                        int child_cell_index);
SplitOutcome split_cell(const CellLoadState& state, const SplitPolicy& policy, Hour hour, Rng& rng,
                        int child_cell_index);

/// KPIs of a cell carrying `share` of the load behind `unsplit`: utilization
/// scales with the share (clamped to [0, 100]); throughput scales inversely
/// with utilization and never exceeds max(cap, unsplit throughput).
KpiSample kpi_at_share(const KpiSample& unsplit, double share, double cap);

/// Post-split KPIs of (parent, child) given the pre-split sample.
std::pair<KpiSample, KpiSample> apply_split_effects(const KpiSample& pre_split, const CellLoadState& parent,
                                                    const CellLoadState& child);

/// 0.5 Mbps bins from 0 to 5 Mbps.
std::vector<double> default_bin_edges();

struct CellHistogram {
  CellId cell;
  /// counts[i] covers [edges[i], edges[i+1]); the last entry is the overflow
  /// bin [edges.back(), inf). Values below edges[0] land in the first bin.
  std::vector<std::size_t> counts;
};

/// Hours per IP-throughput bin, one histogram per series.
std::vector<CellHistogram> histogram_hours(std::span<const KpiSeries> series, std::span<const double> edges);

/// Total hours (over all cells) in bins whose upper edge is <= threshold.
std::size_t hours_below(std::span<const CellHistogram> hist, std::span<const double> edges, double threshold);

/// CSV with header cell,bin_low,bin_high,hours; the overflow bin's high is "inf".
void export_histogram_csv(std::ostream& out, std::span<const CellHistogram> hist, std::span<const double> edges);

}  // namespace cpm
