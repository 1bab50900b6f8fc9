#include "cpm/kpi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace cpm {

std::string CellId::to_string() const {
  return std::to_string(enb) + ":" + std::to_string(cell) + ":" + std::to_string(generation);
}

CellId CellId::parse(const std::string& text) {
  CellId id;
  int* fields[3] = {&id.enb, &id.cell, &id.generation};
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 3; ++i) {
    auto [next, ec] = std::from_chars(p, end, *fields[i]);
    if (ec != std::errc{} || *fields[i] < 0) throw ValidationError("bad cell id '" + text + "'");
    p = next;
    if (i < 2) {
      if (p == end || *p != ':') throw ValidationError("bad cell id '" + text + "'");
      ++p;
    }
  }
  if (p != end) throw ValidationError("bad cell id '" + text + "'");
  return id;
}

std::ostream& operator<<(std::ostream& os, const CellId& id) { return os << id.to_string(); }

void validate(const KpiSample& sample) {
  if (!(sample.prb_util >= 0.0 && sample.prb_util <= 100.0)) {
    std::ostringstream msg;
    msg << "prb_util " << sample.prb_util << " outside [0,100] at hour " << sample.timestamp;
    throw ValidationError(msg.str());
  }
  if (!(sample.ip_throughput >= 0.0) || !std::isfinite(sample.ip_throughput)) {
    std::ostringstream msg;
    msg << "ip_throughput " << sample.ip_throughput << " not finite and >= 0 at hour "
        << sample.timestamp;
    throw ValidationError(msg.str());
  }
}

KpiSeries::KpiSeries(CellId cell, std::vector<KpiSample> samples) : cell_(cell) {
  samples_.reserve(samples.size());
  for (const auto& s : samples) append(s);
}

Hour KpiSeries::first_hour() const {
  if (samples_.empty()) throw RangeError("empty series has no first hour");
  return samples_.front().timestamp;
}

Hour KpiSeries::end_hour() const {
  if (samples_.empty()) throw RangeError("empty series has no end hour");
  return samples_.back().timestamp + 1;
}

void KpiSeries::append(const KpiSample& sample) {
  validate(sample);
  if (!samples_.empty() && sample.timestamp != samples_.back().timestamp + 1) {
    throw ValidationError("series " + cell_.to_string() + ": hour " +
                          std::to_string(sample.timestamp) + " does not follow hour " +
                          std::to_string(samples_.back().timestamp));
  }
  samples_.push_back(sample);
}

KpiSeries KpiSeries::slice(Hour start, Hour length) const {
  KpiSeries out(cell_);
  if (samples_.empty() || length <= 0) return out;
  const Hour lo = std::max(start, first_hour());
  const Hour hi = std::min(start + length, end_hour());
  for (Hour h = lo; h < hi; ++h) out.samples_.push_back(samples_[static_cast<std::size_t>(h - first_hour())]);
  return out;
}

void CongestionRule::validate() const {
  if (!(throughput_max > 0.0)) throw ValidationError("congestion rule: throughput_max must be > 0");
  if (!(prb_min > 0.0 && prb_min < 100.0)) {
    throw ValidationError("congestion rule: prb_min must lie in (0, 100)");
  }
}

bool evaluate_congestion(const KpiSample& sample, const CongestionRule& rule) {
  return sample.ip_throughput < rule.throughput_max && sample.prb_util > rule.prb_min;
}

KpiMeans window_average(const KpiSeries& series, Hour start, Hour length) {
  if (length < 1) throw RangeError("window length must be >= 1");
  if (series.empty() || start < series.first_hour() || start + length > series.end_hour()) {
    throw RangeError("window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside series " + series.cell().to_string());
  }
  double prb = 0.0;
  double tput = 0.0;
  const auto offset = static_cast<std::size_t>(start - series.first_hour());
  for (std::size_t i = 0; i < static_cast<std::size_t>(length); ++i) {
    prb += series[offset + i].prb_util;
    tput += series[offset + i].ip_throughput;
  }
  const auto n = static_cast<double>(length);
  return {prb / n, tput / n};
}

std::size_t congested_hours(const KpiSeries& series, const CongestionRule& rule) {
  std::size_t count = 0;
  for (const auto& s : series.samples()) count += evaluate_congestion(s, rule) ? 1 : 0;
  return count;
}

}  // namespace cpm
