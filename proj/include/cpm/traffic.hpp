#pragma once

// KPI time-series sources: a seeded synthetic fleet generator and the CSV
// interchange format (ingest + bit-exact export).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpm/kpi.hpp"

namespace cpm {

/// Parameters of the synthetic fleet. Each cell's PRB utilization is a
/// diurnal sinusoid with a weekly modulation and Gaussian noise; throughput
/// falls linearly with utilization from `throughput_at_zero_load`.
struct SyntheticProfile {
  int n_enb = 17;
  int cells_per_enb = 18;
  int n_days = 25;
  double diurnal_amplitude = 0.4;       // fraction of mean load
  double base_prb_util = 45.0;          // percent, mean load of ordinary cells
  double peak_prb_util = 91.0;          // percent, waveform maximum of elevated cells
  double throughput_at_zero_load = 8.0; // Mbps
  double noise_std = 0.02;              // relative to mean load / throughput
  double congested_cell_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t cell_count() const { return static_cast<std::size_t>(n_enb) * cells_per_enb; }
  Hour hours() const { return static_cast<Hour>(n_days) * 24; }
};

/// Floor applied to generated throughput, Mbps.
inline constexpr double kMinThroughput = 0.05;

/// Cells whose mean load is raised so their daily peak reaches peak_prb_util.
/// Selection depends on (seed, enb, cell) keys only, ascending CellId order.
std::vector<CellId> elevated_cells(const SyntheticProfile& profile);

/// One series per cell, ascending CellId, hours [0, 24 * n_days).
std::vector<KpiSeries> generate_synthetic(const SyntheticProfile& profile);

enum class TimestampFormat {
  Iso8601Hour,  // YYYY-MM-DDTHH:00 relative to DatasetSchema::epoch
  HourIndex,    // plain integer hours
};

struct DatasetSchema {
  /// Column names for enb_id, cell_id, timestamp, prb_util, ip_throughput.
  std::array<std::string, 5> columns{"enb_id", "cell_id", "timestamp", "prb_util", "ip_throughput"};
  TimestampFormat timestamp_format = TimestampFormat::Iso8601Hour;
  /// Hour zero for Iso8601Hour timestamps on export.
  std::string epoch = "2019-08-01T00:00";

  void validate() const;
};

class IngestError : public std::runtime_error {
 public:
  IngestError(std::size_t row, const std::string& reason);
  /// 1-based line number in the file (1 is the header).
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Parses "YYYY-MM-DDTHH[:00[:00]]" into hours since 1970-01-01T00.
Hour parse_iso_hour(const std::string& text);
std::string format_iso_hour(Hour hours_since_unix_epoch);

/// Rows are grouped by (enb, cell), sorted by time and rebased so the
/// earliest timestamp in the file becomes hour 0.
std::vector<KpiSeries> ingest_csv(std::istream& in, const DatasetSchema& schema = {});
std::vector<KpiSeries> ingest_csv_file(const std::string& path, const DatasetSchema& schema = {});

/// Writes the header then every sample, series in ascending CellId order.
/// Numbers use the shortest representation that round-trips.
void export_csv(std::ostream& out, const std::vector<KpiSeries>& series, const DatasetSchema& schema = {});
std::string export_csv(const std::vector<KpiSeries>& series, const DatasetSchema& schema = {});

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace cpm
