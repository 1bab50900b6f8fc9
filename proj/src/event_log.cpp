#include "cpm/event_log.hpp"

#include <array>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace cpm {

namespace {

constexpr std::array<std::string_view, 11> kTagNames = {
    "O1Collect", "BusPublish", "CapabilityQuery", "TrainRequest", "TrainedModel", "A1Deploy",
    "Inference", "AlarmRaised", "E2Control",      "Feedback",     "Retrain",
};

}  // namespace

std::string_view to_string(EventTag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

EventTag parse_event_tag(std::string_view name) {
  for (std::size_t i = 0; i < kTagNames.size(); ++i) {
    if (kTagNames[i] == name) return static_cast<EventTag>(i);
  }
  throw ValidationError("unknown event tag '" + std::string(name) + "'");
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string LoopEvent::digest() const { return fnv1a_hex(payload.dump()); }

nlohmann::json LoopEvent::to_json() const {
  nlohmann::json cell_names = nlohmann::json::array();
  for (const auto& c : cells) cell_names.push_back(c.to_string());
  return {{"seq", seq},
          {"hour", hour},
          {"tag", std::string(to_string(tag))},
          {"cells", cell_names},
          {"payload", payload},
          {"digest", digest()}};
}

const LoopEvent& EventLog::append(Hour hour, EventTag tag, std::vector<CellId> cells, nlohmann::json payload) {
  if (!records_.empty() && hour < records_.back().hour) {
    throw ContractViolation("event at hour " + std::to_string(hour) + " after hour " +
                            std::to_string(records_.back().hour));
  }
  if (payload.is_null()) payload = nlohmann::json::object();
  records_.push_back(LoopEvent{records_.size(), hour, tag, std::move(cells), std::move(payload)});
  return records_.back();
}

std::size_t EventLog::count(EventTag tag) const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.tag == tag ? 1 : 0;
  return n;
}

void EventLog::write_jsonl(std::ostream& out) const {
  for (const auto& r : records_) out << r.to_json().dump() << '\n';
}

std::string EventLog::to_jsonl() const {
  std::ostringstream out;
  write_jsonl(out);
  return out.str();
}

namespace {

// Position inside a cycle, in grammar order.
enum class Phase { Start, Collected, Published, Queried, Requested, Trained, Deployed, Inferred, Fed, Retrained };

struct Replay {
  Phase phase = Phase::Start;
  std::size_t cycles = 0;
  Hour cycle_hour = 0;
  bool retrain_pending = false;
  bool trained_this_cycle = false;
  std::int64_t version = 0;
  std::int64_t trained_version = 0;
  std::map<CellId, bool> alarms;  // cell -> eligible, this cycle
  std::set<CellId> controlled;
};

LogCheck fail(std::size_t line, const std::string& tag, const std::string& why) {
  return LogCheck{false, line, "record " + std::to_string(line) + " (" + tag + "): " + why};
}

}  // namespace

LogCheck validate_event_log(std::istream& jsonl) {
  Replay st;
  std::string text;
  std::size_t line = 0;
  std::string last_tag;
  for (; std::getline(jsonl, text); ++line) {
    if (text.empty()) return fail(line, "?", "empty line");
    nlohmann::json rec;
    EventTag tag{};
    std::vector<CellId> cells;
    Hour hour = 0;
    try {
      rec = nlohmann::json::parse(text);
      tag = parse_event_tag(rec.at("tag").get<std::string>());
      hour = rec.at("hour").get<Hour>();
      if (rec.at("seq").get<std::uint64_t>() != line) return fail(line, std::string(to_string(tag)), "sequence gap");
      for (const auto& c : rec.at("cells")) cells.push_back(CellId::parse(c.get<std::string>()));
      if (fnv1a_hex(rec.at("payload").dump()) != rec.at("digest").get<std::string>()) {
        return fail(line, std::string(to_string(tag)), "payload digest mismatch");
      }
    } catch (const std::exception& e) {
      return fail(line, "?", std::string("malformed record: ") + e.what());
    }
    const std::string name(to_string(tag));
    last_tag = name;
    const auto& payload = rec["payload"];

    if (tag != EventTag::O1Collect && st.phase != Phase::Start && hour != st.cycle_hour) {
      return fail(line, name, "hour differs from its cycle's O1Collect");
    }
    switch (tag) {
      case EventTag::O1Collect:
        if (st.phase != Phase::Start && st.phase != Phase::Fed && st.phase != Phase::Retrained) {
          return fail(line, name, "previous cycle incomplete");
        }
        if (st.cycles > 0 && hour <= st.cycle_hour) return fail(line, name, "cycle hour does not advance");
        if (st.cycles > 0) st.retrain_pending = st.phase == Phase::Retrained;
        st.phase = Phase::Collected;
        st.cycle_hour = hour;
        st.trained_this_cycle = false;
        st.alarms.clear();
        st.controlled.clear();
        ++st.cycles;
        break;
      case EventTag::BusPublish:
        if (st.phase != Phase::Collected) return fail(line, name, "BusPublish must follow O1Collect");
        st.phase = Phase::Published;
        break;
      case EventTag::CapabilityQuery:
        if (st.phase != Phase::Published) return fail(line, name, "CapabilityQuery must follow BusPublish");
        if (st.cycles > 1 && !st.retrain_pending) return fail(line, name, "training without a preceding Retrain");
        if (!payload.value("supported", false)) return fail(line, name, "capabilities not supported");
        st.phase = Phase::Queried;
        break;
      case EventTag::TrainRequest:
        if (st.phase != Phase::Queried) return fail(line, name, "TrainRequest must follow CapabilityQuery");
        st.phase = Phase::Requested;
        break;
      case EventTag::TrainedModel:
        if (st.phase != Phase::Requested) return fail(line, name, "TrainedModel must follow TrainRequest");
        st.trained_version = payload.value("version", std::int64_t{0});
        if (st.trained_version != st.version + 1) return fail(line, name, "model version must increase by one");
        st.trained_this_cycle = true;
        st.phase = Phase::Trained;
        break;
      case EventTag::A1Deploy: {
        if (st.phase == Phase::Published) {
          if (st.cycles == 1) return fail(line, name, "first A1Deploy without a TrainedModel");
          if (st.retrain_pending) return fail(line, name, "Retrain was not followed by training");
        } else if (st.phase != Phase::Trained) {
          return fail(line, name, "A1Deploy out of order");
        }
        const auto v = payload.value("version", std::int64_t{-1});
        if (st.trained_this_cycle ? v != st.trained_version : v != st.version) {
          return fail(line, name, "deployment version " + std::to_string(v) + " inconsistent");
        }
        st.version = v;
        st.phase = Phase::Deployed;
        break;
      }
      case EventTag::Inference:
        if (st.phase != Phase::Deployed) return fail(line, name, "Inference must follow A1Deploy");
        st.phase = Phase::Inferred;
        break;
      case EventTag::AlarmRaised:
        if (st.phase != Phase::Inferred) return fail(line, name, "AlarmRaised outside the alarm block");
        if (cells.size() != 1) return fail(line, name, "AlarmRaised must name one cell");
        st.alarms[cells[0]] = payload.value("eligible", false);
        break;
      case EventTag::E2Control: {
        if (st.phase != Phase::Inferred) return fail(line, name, "E2Control outside the alarm block");
        if (cells.size() != 1) return fail(line, name, "E2Control must name one cell");
        const auto it = st.alarms.find(cells[0]);
        if (it == st.alarms.end()) {
          return fail(line, name, "no AlarmRaised for " + cells[0].to_string() + " earlier in the cycle");
        }
        if (!it->second) return fail(line, name, "cell " + cells[0].to_string() + " is not eligible for a split");
        if (!st.controlled.insert(cells[0]).second) return fail(line, name, "second E2Control for one cell");
        if (payload.value("split_factor", 0) >= payload.value("max_factor", 0)) {
          return fail(line, name, "split factor already at the cap");
        }
        break;
      }
      case EventTag::Feedback:
        if (st.phase != Phase::Inferred) return fail(line, name, "Feedback must close the alarm block");
        st.phase = Phase::Fed;
        break;
      case EventTag::Retrain:
        if (st.phase != Phase::Fed) return fail(line, name, "Retrain must follow Feedback");
        st.phase = Phase::Retrained;
        break;
    }
  }
  if (st.phase != Phase::Start && st.phase != Phase::Fed && st.phase != Phase::Retrained) {
    return fail(line > 0 ? line - 1 : 0, last_tag, "log ends inside a cycle");
  }
  return {};
}

LogCheck validate_event_log(const EventLog& log) {
  std::istringstream in(log.to_jsonl());
  return validate_event_log(in);
}

}  // namespace cpm
