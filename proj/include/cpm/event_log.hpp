#pragma once

// Append-only record of control-loop steps, its JSON-lines form, and an
// offline checker for the per-cycle choreography.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cpm/kpi.hpp"

namespace cpm {

enum class EventTag {
  O1Collect,
  BusPublish,
  CapabilityQuery,
  TrainRequest,
  TrainedModel,
  A1Deploy,
  Inference,
  AlarmRaised,
  E2Control,
  Feedback,
  Retrain,
};

std::string_view to_string(EventTag tag);
/// Throws ValidationError on an unknown name.
EventTag parse_event_tag(std::string_view name);

struct LoopEvent {
  std::uint64_t seq = 0;
  Hour hour = 0;
  EventTag tag = EventTag::O1Collect;
  std::vector<CellId> cells;
  nlohmann::json payload = nlohmann::json::object();

  /// FNV-1a 64 of the compact payload text, 16 hex digits.
  std::string digest() const;
  nlohmann::json to_json() const;
  friend bool operator==(const LoopEvent&, const LoopEvent&) = default;
};

/// Thrown when the loop would break its own choreography.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class EventLog {
 public:
  /// Records must arrive in nondecreasing hour order.
  const LoopEvent& append(Hour hour, EventTag tag, std::vector<CellId> cells, nlohmann::json payload = {});

  const std::vector<LoopEvent>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t count(EventTag tag) const;

  void write_jsonl(std::ostream& out) const;
  std::string to_jsonl() const;

  friend bool operator==(const EventLog&, const EventLog&) = default;

 private:
  std::vector<LoopEvent> records_;
};

std::string fnv1a_hex(std::string_view text);

struct LogCheck {
  bool ok = true;
  /// 0-based line of the first offending record (or parse failure).
  std::optional<std::size_t> line;
  std::string message;
};

/// Replays JSON-lines text. Each cycle must read
///   O1Collect BusPublish [CapabilityQuery TrainRequest TrainedModel]
///   A1Deploy Inference {AlarmRaised | E2Control} Feedback [Retrain]
/// with every E2Control preceded in its cycle by an eligible AlarmRaised for
/// the same cell, training exactly in the first cycle and after a Retrain,
/// A1 versions bumped only by training, and matching payload digests.
LogCheck validate_event_log(std::istream& jsonl);
LogCheck validate_event_log(const EventLog& log);

}  // namespace cpm
