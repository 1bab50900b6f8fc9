#pragma once

// Core KPI vocabulary: cell identities, hourly KPI samples and series, and
// the congestion predicate consumed by every other module.

#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpm {

/// Hours since the scenario epoch.
using Hour = std::int64_t;

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Identifies a cell within a scenario. `generation` counts split rounds
/// between the original cell and this one (0 for original cells).
struct CellId {
  int enb = 0;
  int cell = 0;
  int generation = 0;

  friend auto operator<=>(const CellId&, const CellId&) = default;

  /// "enb:cell:generation", the form used in logs and histogram files.
  std::string to_string() const;
  static CellId parse(const std::string& text);
};

std::ostream& operator<<(std::ostream& os, const CellId& id);

struct KpiSample {
  Hour timestamp = 0;
  double prb_util = 0.0;       // percent, [0, 100]
  double ip_throughput = 0.0;  // Mbps, >= 0

  friend bool operator==(const KpiSample&, const KpiSample&) = default;
};

/// Throws ValidationError if the sample breaks the KPI range invariants.
void validate(const KpiSample& sample);

/// Hourly KPI series of one cell. Timestamps are consecutive integers.
class KpiSeries {
 public:
  KpiSeries() = default;
  explicit KpiSeries(CellId cell) : cell_(cell) {}
  KpiSeries(CellId cell, std::vector<KpiSample> samples);

  const CellId& cell() const { return cell_; }
  const std::vector<KpiSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const KpiSample& operator[](std::size_t i) const { return samples_[i]; }
  const KpiSample& back() const { return samples_.back(); }

  Hour first_hour() const;
  /// One past the last timestamp.
  Hour end_hour() const;

  /// Appends a sample; its timestamp must be end_hour() (or anything when empty).
  void append(const KpiSample& sample);

  /// Samples with timestamps in [start, start + length).
  KpiSeries slice(Hour start, Hour length) const;

  friend bool operator==(const KpiSeries&, const KpiSeries&) = default;

 private:
  CellId cell_{};
  std::vector<KpiSample> samples_;
};

/// A cell is congested when throughput is below `throughput_max` AND PRB
/// utilization exceeds `prb_min`. Both comparisons are strict.
struct CongestionRule {
  double throughput_max = 1.0;  // Mbps
  double prb_min = 80.0;        // percent

  void validate() const;
  friend bool operator==(const CongestionRule&, const CongestionRule&) = default;
};

bool evaluate_congestion(const KpiSample& sample, const CongestionRule& rule);

struct KpiMeans {
  double prb_util = 0.0;
  double ip_throughput = 0.0;
};

/// Arithmetic means over the hours [start, start + length).
/// Throws RangeError when the window leaves the series or length < 1.
KpiMeans window_average(const KpiSeries& series, Hour start, Hour length);

std::size_t congested_hours(const KpiSeries& series, const CongestionRule& rule);

}  // namespace cpm
