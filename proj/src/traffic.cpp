#include "cpm/traffic.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "cpm/rng.hpp"

namespace cpm {

namespace {

constexpr double kPeakHour = 20.0;      // evening busy hour
constexpr double kPhaseJitter = 1.5;    // hours, per-cell peak offset
constexpr double kWeeklyShare = 0.125;  // weekly amplitude as a share of the diurnal one

std::uint64_t cell_key(int enb, int cell) {
  return (static_cast<std::uint64_t>(enb) << 32) | static_cast<std::uint32_t>(cell);
}

}  // namespace

void SyntheticProfile::validate() const {
  if (n_enb < 1) throw ValidationError("profile: n_enb must be >= 1");
  if (cells_per_enb < 1) throw ValidationError("profile: cells_per_enb must be >= 1");
  if (n_days < 2) throw ValidationError("profile: n_days must be >= 2");
  if (!(base_prb_util >= 0.0 && base_prb_util <= peak_prb_util && peak_prb_util <= 100.0)) {
    throw ValidationError("profile: need 0 <= base_prb_util <= peak_prb_util <= 100");
  }
  if (!(diurnal_amplitude >= 0.0 && diurnal_amplitude <= 1.0)) {
    throw ValidationError("profile: diurnal_amplitude must lie in [0, 1]");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ValidationError("profile: noise_std must be >= 0");
  if (!(congested_cell_fraction >= 0.0 && congested_cell_fraction <= 1.0)) {
    throw ValidationError("profile: congested_cell_fraction must lie in [0, 1]");
  }
  if (!(throughput_at_zero_load > 0.0) || !std::isfinite(throughput_at_zero_load)) {
    throw ValidationError("profile: throughput_at_zero_load must be > 0");
  }
}

std::vector<CellId> elevated_cells(const SyntheticProfile& profile) {
  profile.validate();
  const auto total = profile.cell_count();
  if (profile.congested_cell_fraction <= 0.0) return {};
  auto wanted = static_cast<std::size_t>(std::llround(profile.congested_cell_fraction * static_cast<double>(total)));
  wanted = std::clamp<std::size_t>(wanted, 1, total);

  std::vector<std::pair<std::uint64_t, CellId>> ranked;
  ranked.reserve(total);
  for (int e = 0; e < profile.n_enb; ++e) {
    for (int c = 0; c < profile.cells_per_enb; ++c) {
      ranked.emplace_back(derive_seed(profile.seed, {cell_key(e, c), 0xE1E7}), CellId{e, c, 0});
    }
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<CellId> out;
  for (std::size_t i = 0; i < wanted; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<KpiSeries> generate_synthetic(const SyntheticProfile& profile) {
  profile.validate();
  const auto elevated_list = elevated_cells(profile);
  const std::set<CellId> elevated(elevated_list.begin(), elevated_list.end());
  const double amp = profile.diurnal_amplitude;
  const double weekly_amp = amp * kWeeklyShare;
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<KpiSeries> fleet;
  fleet.reserve(profile.cell_count());
  for (int e = 0; e < profile.n_enb; ++e) {
    for (int c = 0; c < profile.cells_per_enb; ++c) {
      const CellId id{e, c, 0};
      Rng rng(derive_seed(profile.seed, {cell_key(e, c)}));
      const double phase = rng.uniform(-kPhaseJitter, kPhaseJitter);
      const double mean = elevated.contains(id)
                              ? profile.peak_prb_util / ((1.0 + amp) * (1.0 + weekly_amp))
                              : profile.base_prb_util;

      std::vector<KpiSample> samples;
      samples.reserve(static_cast<std::size_t>(profile.hours()));
      for (Hour t = 0; t < profile.hours(); ++t) {
        const double th = static_cast<double>(t);
        const double diurnal = std::sin(two_pi * (th - kPeakHour + 6.0 - phase) / 24.0);
        const double weekly = 1.0 + weekly_amp * std::sin(two_pi * th / 168.0);
        const double n1 = rng.normal();
        const double n2 = rng.normal();
        const double util = std::clamp(mean * (1.0 + amp * diurnal) * weekly + mean * profile.noise_std * n1, 0.0, 100.0);
        double tput = profile.throughput_at_zero_load * (1.0 - util / 100.0) * (1.0 + profile.noise_std * n2);
        tput = std::max(tput, kMinThroughput);
        samples.push_back({t, util, tput});
      }
      fleet.emplace_back(id, std::move(samples));
    }
  }
  return fleet;
}

// ---------------------------------------------------------------------------
// CSV

void DatasetSchema::validate() const {
  std::set<std::string> names(columns.begin(), columns.end());
  if (names.size() != columns.size()) throw ValidationError("schema: column names must be distinct");
  for (const auto& c : columns) {
    if (c.empty() || c.find(',') != std::string::npos) throw ValidationError("schema: bad column name '" + c + "'");
  }
  if (timestamp_format == TimestampFormat::Iso8601Hour) (void)parse_iso_hour(epoch);
}

IngestError::IngestError(std::size_t row, const std::string& reason)
    : std::runtime_error("row " + std::to_string(row) + ": " + reason), row_(row) {}

namespace {

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && p == text.data() + text.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Hour parse_iso_hour(const std::string& text) {
  // YYYY-MM-DDTHH with optional :00 and :00 suffixes.
  int y = 0;
  unsigned mo = 0;
  unsigned d = 0;
  int h = 0;
  std::string_view s(text);
  auto fail = [&]() -> Hour { throw ValidationError("bad ISO-8601 hour timestamp '" + text + "'"); };
  if (s.size() < 13 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ')) return fail();
  if (!parse_number(s.substr(0, 4), y) || !parse_number(s.substr(5, 2), mo) ||
      !parse_number(s.substr(8, 2), d) || !parse_number(s.substr(11, 2), h)) {
    return fail();
  }
  auto rest = s.substr(13);
  while (!rest.empty()) {
    if (rest.size() < 3 || rest[0] != ':' || rest.substr(1, 2) != "00") {
      throw ValidationError("timestamp '" + text + "' is not on the hourly grid");
    }
    rest.remove_prefix(3);
  }
  if (h < 0 || h > 23) return fail();
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok()) return fail();
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<Hour>(days) * 24 + h;
}

std::string format_iso_hour(Hour hours) {
  const auto days = static_cast<long>(hours >= 0 ? hours / 24 : (hours - 23) / 24);
  const auto hour = static_cast<int>(hours - static_cast<Hour>(days) * 24);
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour);
  return buf;
}

std::string format_double(double value) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, p);
}

std::vector<KpiSeries> ingest_csv(std::istream& in, const DatasetSchema& schema) {
  schema.validate();
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw IngestError(1, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_fields(line);
  std::array<std::size_t, 5> index{};
  for (std::size_t role = 0; role < 5; ++role) {
    auto it = std::find(header.begin(), header.end(), schema.columns[role]);
    if (it == header.end()) throw IngestError(1, "missing column '" + schema.columns[role] + "'");
    index[role] = static_cast<std::size_t>(it - header.begin());
  }
  const std::size_t needed = *std::max_element(index.begin(), index.end()) + 1;

  struct Row {
    Hour time;
    std::size_t line;
    double prb;
    double tput;
  };
  std::map<std::pair<int, int>, std::vector<Row>> groups;
  std::optional<Hour> earliest;

  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() < needed) throw IngestError(row, "expected at least " + std::to_string(needed) + " fields");

    int enb = 0;
    int cell = 0;
    if (!parse_number(f[index[0]], enb) || enb < 0) throw IngestError(row, "unparsable " + schema.columns[0]);
    if (!parse_number(f[index[1]], cell) || cell < 0) throw IngestError(row, "unparsable " + schema.columns[1]);

    Hour t = 0;
    if (schema.timestamp_format == TimestampFormat::HourIndex) {
      if (!parse_number(f[index[2]], t)) throw IngestError(row, "unparsable " + schema.columns[2]);
    } else {
      try {
        t = parse_iso_hour(std::string(f[index[2]]));
      } catch (const ValidationError& e) {
        throw IngestError(row, e.what());
      }
    }

    double prb = 0.0;
    double tput = 0.0;
    if (!parse_number(f[index[3]], prb)) throw IngestError(row, "unparsable " + schema.columns[3]);
    if (!parse_number(f[index[4]], tput)) throw IngestError(row, "unparsable " + schema.columns[4]);
    try {
      validate(KpiSample{t, prb, tput});
    } catch (const ValidationError& e) {
      throw IngestError(row, std::string("range: ") + e.what());
    }
    groups[{enb, cell}].push_back({t, row, prb, tput});
    earliest = earliest ? std::min(*earliest, t) : t;
  }

  std::vector<KpiSeries> out;
  out.reserve(groups.size());
  for (auto& [key, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
    const CellId id{key.first, key.second, 0};
    KpiSeries series(id);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].time == rows[i - 1].time) {
        throw IngestError(rows[i].line, "duplicate timestamp for cell " + id.to_string());
      }
      if (i > 0 && rows[i].time != rows[i - 1].time + 1) {
        throw IngestError(rows[i].line, "gap in hourly grid for cell " + id.to_string() + " (" +
                                            std::to_string(rows[i].time - rows[i - 1].time - 1) +
                                            " missing hours)");
      }
      series.append({rows[i].time - *earliest, rows[i].prb, rows[i].tput});
    }
    out.push_back(std::move(series));
  }
  return out;
}

std::vector<KpiSeries> ingest_csv_file(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return ingest_csv(in, schema);
}

void export_csv(std::ostream& out, const std::vector<KpiSeries>& series, const DatasetSchema& schema) {
  schema.validate();
  const Hour epoch = schema.timestamp_format == TimestampFormat::Iso8601Hour ? parse_iso_hour(schema.epoch) : 0;
  out << schema.columns[0] << ',' << schema.columns[1] << ',' << schema.columns[2] << ','
      << schema.columns[3] << ',' << schema.columns[4] << '\n';

  std::vector<const KpiSeries*> ordered;
  for (const auto& s : series) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const KpiSeries* a, const KpiSeries* b) { return a->cell() < b->cell(); });

  for (const auto* s : ordered) {
    const auto prefix = std::to_string(s->cell().enb) + ',' + std::to_string(s->cell().cell) + ',';
    for (const auto& k : s->samples()) {
      out << prefix;
      if (schema.timestamp_format == TimestampFormat::Iso8601Hour) {
        out << format_iso_hour(epoch + k.timestamp);
      } else {
        out << k.timestamp;
      }
      out << ',' << format_double(k.prb_util) << ',' << format_double(k.ip_throughput) << '\n';
    }
  }
}

std::string export_csv(const std::vector<KpiSeries>& series, const DatasetSchema& schema) {
  std::ostringstream out;
  export_csv(out, series, schema);
  return out.str();
}

}  // namespace cpm
