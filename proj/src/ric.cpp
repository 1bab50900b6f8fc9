#include "cpm/ric.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cpm/model_io.hpp"
#include "cpm/rng.hpp"
#include "cpm/traffic.hpp"

namespace cpm {

namespace {

nlohmann::json sample_json(const KpiSample& s) {
  return {{"hour", s.timestamp}, {"prb_util", s.prb_util}, {"ip_throughput", s.ip_throughput}};
}

nlohmann::json rule_json(const CongestionRule& rule) {
  return {{"throughput_max", rule.throughput_max},
          {"prb_min", rule.prb_min},
          {"alarm", "predicted next-hour ip_throughput < throughput_max and prb_util > prb_min"}};
}

}  // namespace

// ---------------------------------------------------------------- network

NetworkState::NetworkState(std::vector<KpiSeries> base, std::vector<double> caps) : base_(std::move(base)) {
  if (caps.size() != base_.size()) throw ValidationError("network: one throughput cap per cell required");
  for (std::size_t f = 0; f < base_.size(); ++f) {
    const auto& s = base_[f];
    if (s.empty()) throw ValidationError("network: cell " + s.cell().to_string() + " has no traffic");
    if (f == 0) {
      first_hour_ = s.first_hour();
      end_hour_ = s.end_hour();
    } else if (s.first_hour() != first_hour_ || s.end_hour() != end_hour_) {
      throw ValidationError("network: traffic of " + s.cell().to_string() + " is not aligned with the other cells");
    }
    if (!(caps[f] > 0.0) || !std::isfinite(caps[f])) throw ValidationError("network: throughput cap must be > 0");
    CellLoadState st;
    st.cell = s.cell();
    st.throughput_cap = caps[f];
    if (!cells_.emplace(s.cell(), Cell{st, f, KpiSeries(s.cell())}).second) {
      throw ValidationError("network: duplicate cell " + s.cell().to_string());
    }
  }
  realized_end_ = first_hour_;
}

NetworkState::Cell& NetworkState::find(const CellId& cell) {
  auto it = cells_.find(cell);
  if (it == cells_.end()) throw ValidationError("network: unknown cell " + cell.to_string());
  return it->second;
}

const NetworkState::Cell& NetworkState::find(const CellId& cell) const {
  auto it = cells_.find(cell);
  if (it == cells_.end()) throw ValidationError("network: unknown cell " + cell.to_string());
  return it->second;
}

void NetworkState::realize_through(Hour hour) {
  if (hour >= end_hour_) throw RangeError("network: hour " + std::to_string(hour) + " beyond the traffic");
  for (; realized_end_ <= hour; ++realized_end_) {
    const auto offset = static_cast<std::size_t>(realized_end_ - first_hour_);
    for (auto& [id, c] : cells_) {
      c.history.append(kpi_at_share(base_[c.family][offset], c.state.share(), c.state.throughput_cap));
    }
  }
}

std::vector<CellId> NetworkState::active_cells() const {
  std::vector<CellId> out;
  out.reserve(cells_.size());
  for (const auto& [id, c] : cells_) out.push_back(id);
  return out;
}

const CellLoadState& NetworkState::load_state(const CellId& cell) const { return find(cell).state; }
const KpiSeries& NetworkState::history(const CellId& cell) const { return find(cell).history; }

std::vector<KpiSeries> NetworkState::histories() const {
  std::vector<KpiSeries> out;
  out.reserve(cells_.size());
  for (const auto& [id, c] : cells_) out.push_back(c.history);
  return out;
}

int NetworkState::next_cell_index(int enb) const {
  int next = 0;
  for (const auto& [id, c] : cells_) {
    if (id.enb == enb) next = std::max(next, id.cell + 1);
  }
  return next;
}

void NetworkState::apply(const SplitOutcome& outcome) {
  Cell& parent = find(outcome.event.parent);
  if (cells_.count(outcome.child.cell) != 0) {
    throw ContractViolation("split child " + outcome.child.cell.to_string() + " already exists");
  }
  if (outcome.parent.load + outcome.child.load != parent.state.load) {
    throw ContractViolation("split does not conserve load");
  }
  parent.state = outcome.parent;
  const std::size_t family = parent.family;
  cells_.emplace(outcome.child.cell, Cell{outcome.child, family, KpiSeries(outcome.child.cell)});
}

// ---------------------------------------------------------------- O1 / bus

std::vector<CellId> O1Report::sources() const {
  std::vector<CellId> out;
  for (const auto& s : payload) out.push_back(s.cell());
  return out;
}

std::size_t O1Report::sample_count() const {
  std::size_t n = 0;
  for (const auto& s : payload) n += s.size();
  return n;
}

void O1Report::validate() const {
  std::set<CellId> seen;
  for (const auto& s : payload) {
    if (!seen.insert(s.cell()).second) throw ValidationError("O1 report: duplicate cell " + s.cell().to_string());
    if (!s.empty() && (s.first_hour() < window.start || s.end_hour() > window.start + window.length)) {
      throw ValidationError("O1 report: samples of " + s.cell().to_string() + " outside the window");
    }
  }
}

O1Report smo_collect(const NetworkState& network, ReportWindow window, EventLog& log, Hour hour) {
  if (window.length < 1) throw RangeError("O1 window must be at least one hour");
  const auto cells = network.active_cells();
  if (!cells.empty() && window.start + window.length > network.realized_end()) {
    throw RangeError("O1 window [" + std::to_string(window.start) + ", " +
                     std::to_string(window.start + window.length) + ") has not elapsed");
  }
  O1Report report{window, {}};
  for (const auto& cell : cells) {
    report.payload.push_back(network.history(cell).slice(window.start, window.length));
  }
  log.append(hour, EventTag::O1Collect, report.sources(),
             {{"window_start", window.start},
              {"window_length", window.length},
              {"samples", report.sample_count()}});
  return report;
}

void DataBus::publish(O1Report report, EventLog& log, Hour hour) {
  log.append(hour, EventTag::BusPublish, report.sources(),
             {{"window_start", report.window.start},
              {"window_length", report.window.length},
              {"samples", report.sample_count()}});
  queue_.push_back(std::move(report));
}

std::optional<O1Report> DataBus::consume() {
  if (queue_.empty()) return std::nullopt;
  O1Report r = std::move(queue_.front());
  queue_.pop_front();
  return r;
}

void DataLake::ingest(const O1Report& report) {
  for (const auto& s : report.payload) {
    auto it = series_.try_emplace(s.cell(), s.cell()).first;
    for (const auto& k : s.samples()) {
      if (it->second.empty() || k.timestamp >= it->second.end_hour()) it->second.append(k);
    }
  }
}

const KpiSeries& DataLake::history(const CellId& cell) const {
  auto it = series_.find(cell);
  if (it == series_.end()) throw ValidationError("data lake: no history for " + cell.to_string());
  return it->second;
}

KpiSeries DataLake::training_history(const CellId& cell) const {
  const KpiSeries& s = history(cell);
  auto it = reconfigured_.find(cell);
  if (it == reconfigured_.end() || s.empty()) return s;
  return s.slice(it->second, s.end_hour() - it->second);
}

void DataLake::mark_reconfigured(const CellId& cell, Hour from) { reconfigured_.insert_or_assign(cell, from); }

std::vector<CellId> DataLake::cells() const {
  std::vector<CellId> out;
  for (const auto& [id, s] : series_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------- capability

namespace {

const std::vector<std::string> kServerFeatures = {"adam", "bptt", "float64", "recurrent-training"};
const std::vector<std::string> kServerSources = {"ip_throughput", "prb_util"};
constexpr int kServerJobs = 8;

bool subset(const std::vector<std::string>& want, const std::vector<std::string>& have) {
  return std::all_of(want.begin(), want.end(),
                     [&](const std::string& w) { return std::find(have.begin(), have.end(), w) != have.end(); });
}

}  // namespace

ModelCapabilityReply negotiate_capabilities(const ModelCapabilityQuery& query, EventLog& log, Hour hour) {
  ModelCapabilityReply reply{subset(query.features, kServerFeatures) && subset(query.data_sources, kServerSources),
                             kServerFeatures, kServerSources, kServerJobs};
  log.append(hour, EventTag::CapabilityQuery, {},
             {{"query", {{"features", query.features}, {"data_sources", query.data_sources}}},
              {"supported", reply.supported},
              {"features", reply.features},
              {"data_sources", reply.data_sources},
              {"max_parallel_jobs", reply.max_parallel_jobs}});
  return reply;
}

// ---------------------------------------------------------------- A1

nlohmann::json A1Deployment::to_json(bool with_parameters) const {
  nlohmann::json models_json = nlohmann::json::object();
  for (const auto& [cell, dm] : models) {
    auto doc = model_to_json(dm.model);
    nlohmann::json entry = {{"version", dm.version},
                            {"holdout_accuracy", dm.holdout_accuracy},
                            {"digest", fnv1a_hex(doc.dump())}};
    if (with_parameters) entry["model"] = std::move(doc);
    models_json[cell.to_string()] = std::move(entry);
  }
  nlohmann::json omitted_json = nlohmann::json::object();
  for (const auto& [cell, why] : omitted) omitted_json[cell.to_string()] = why;
  return {{"version", version}, {"policy", rule_json(policy)}, {"models", models_json}, {"omitted", omitted_json}};
}

A1Deployment train_and_return(const DataLake& lake, const std::vector<CellId>& cells, const TrainJob& job,
                              const CongestionRule& rule, std::int64_t previous_version,
                              const ModelCapabilityReply& capabilities, EventLog& log, Hour hour) {
  if (!capabilities.supported) throw ContractViolation("training requested without supported capabilities");
  std::vector<CellId> sorted = cells;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  A1Deployment dep;
  dep.version = previous_version + 1;
  dep.policy = rule;
  log.append(hour, EventTag::TrainRequest, sorted,
             {{"version", dep.version},
              {"lookback", job.training.lookback},
              {"epochs", job.training.epochs},
              {"batch_size", job.training.batch_size},
              {"min_history_hours", job.min_history_hours}});

  std::vector<KpiSeries> inputs;
  for (const auto& cell : sorted) {
    KpiSeries s = lake.contains(cell) ? lake.training_history(cell) : KpiSeries(cell);
    const auto have = static_cast<Hour>(s.size());
    if (have < job.min_history_hours) {
      dep.omitted.emplace(cell, "history " + std::to_string(have) + " h below " +
                                    std::to_string(job.min_history_hours) + " h");
    } else {
      inputs.push_back(std::move(s));
    }
  }
  std::vector<CellId> trained;
  for (auto& t : train_each(inputs, job.lstm, job.training)) {
    if (t.result) {
      dep.models.emplace(t.cell, DeployedModel{std::move(t.result->model), dep.version, t.result->log.holdout_accuracy});
      trained.push_back(t.cell);
    } else {
      dep.omitted.emplace(t.cell, t.error);
    }
  }
  auto summary = dep.to_json(false);
  log.append(hour, EventTag::TrainedModel, trained,
             {{"version", dep.version}, {"models", summary["models"]}, {"omitted", summary["omitted"]}});
  log.append(hour, EventTag::A1Deploy, trained, summary);
  return dep;
}

void CpmXapp::deploy(const A1Deployment& deployment) {
  if (deployment.version <= version_) throw ContractViolation("A1 deployment version must increase");
  version_ = deployment.version;
  policy_ = deployment.policy;
  for (const auto& [cell, dm] : deployment.models) models_.insert_or_assign(cell, dm);
}

void CpmXapp::reaffirm(EventLog& log, Hour hour) const {
  if (!active()) throw ContractViolation("A1 reaffirmation before the first deployment");
  log.append(hour, EventTag::A1Deploy, {},
             {{"version", version_}, {"refresh", true}, {"policy", rule_json(policy_)}, {"models", nlohmann::json::object()}});
}

// ---------------------------------------------------------------- inference / E2

std::vector<Inference> cpm_infer(const CpmXapp& xapp, const DataLake& lake, const NetworkState& network,
                                 int max_split_factor, EventLog& log, Hour hour) {
  if (!xapp.active()) throw ContractViolation("inference before the first A1 deployment");
  std::vector<Inference> out;
  nlohmann::json predictions = nlohmann::json::object();
  std::vector<CellId> inferred;
  for (const auto& [cell, dm] : xapp.models()) {
    if (!lake.contains(cell)) continue;
    const KpiSeries& s = lake.history(cell);
    if (static_cast<int>(s.size()) < dm.model.lookback) continue;
    Inference inf;
    inf.cell = cell;
    inf.prediction = predict_next_hour(dm.model, s);
    inf.alarm = evaluate_congestion(inf.prediction, xapp.policy());
    inf.split_factor = network.load_state(cell).split_factor();
    inf.eligible = inf.alarm && inf.split_factor < max_split_factor;
    predictions[cell.to_string()] = {inf.prediction.prb_util, inf.prediction.ip_throughput};
    inferred.push_back(cell);
    out.push_back(inf);
  }
  log.append(hour, EventTag::Inference, inferred,
             {{"version", xapp.version()}, {"target_hour", hour + 1}, {"predictions", predictions}});
  for (const auto& inf : out) {
    if (!inf.alarm) continue;
    nlohmann::json payload = {{"prediction", sample_json(inf.prediction)},
                              {"split_factor", inf.split_factor},
                              {"max_factor", max_split_factor},
                              {"eligible", inf.eligible}};
    if (!inf.eligible) payload["reason"] = "split factor cap reached";
    log.append(hour, EventTag::AlarmRaised, {inf.cell}, std::move(payload));
  }
  return out;
}

nlohmann::json E2ControlRequest::to_json() const {
  return {{"target", target.to_string()},
          {"action", "CellSplit"},
          {"policy", {{"r_min", policy.r_min}, {"r_max", policy.r_max}, {"max_factor", policy.max_factor}}},
          {"issued_at", issued_at},
          {"split_factor", split_factor},
          {"max_factor", policy.max_factor}};
}

std::vector<E2ControlRequest> issue_e2(std::vector<Inference> alarms, const SplitPolicy& policy, EventLog& log,
                                       Hour hour) {
  std::sort(alarms.begin(), alarms.end(), [](const Inference& a, const Inference& b) { return a.cell < b.cell; });
  std::vector<E2ControlRequest> out;
  for (const auto& a : alarms) {
    if (!a.alarm) throw ContractViolation("E2 request for non-alarmed cell " + a.cell.to_string());
    if (!a.eligible || a.split_factor >= policy.max_factor) continue;
    E2ControlRequest req{a.cell, E2Action::CellSplit, policy, hour, a.split_factor};
    log.append(hour, EventTag::E2Control, {a.cell}, req.to_json());
    out.push_back(req);
  }
  return out;
}

// ---------------------------------------------------------------- feedback

void ControlLoopConfig::validate() const {
  if (period_hours < 1) throw ValidationError("loop: period must be >= 1 hour");
  if (!(retrain_accuracy >= 0.0 && retrain_accuracy <= 100.0)) {
    throw ValidationError("loop: retrain accuracy threshold must lie in [0, 100]");
  }
  if (feedback_window_hours < 1) throw ValidationError("loop: feedback window must be >= 1 hour");
  target_rule.validate();
  if (max_congested_hours < 0) throw ValidationError("loop: max congested hours must be >= 0");
  if (target_window_hours < 1) throw ValidationError("loop: target window must be >= 1 hour");
  if (max_split_factor != 2 && max_split_factor != 4 && max_split_factor != 8) {
    throw ValidationError("loop: max split factor must be 2, 4 or 8");
  }
  if (horizon_hours < period_hours) throw ValidationError("loop: horizon shorter than one collection period");
  if (min_history_hours < 1) throw ValidationError("loop: min history must be >= 1 hour");
}

ModelPerformanceFeedback evaluate_feedback(const CellId& cell, std::span<const KpiSample> predictions,
                                           std::span<const KpiSample> actuals, const ControlLoopConfig& cfg) {
  if (predictions.empty()) throw MetricError("empty feedback window for " + cell.to_string());
  const double acc = accuracy(predictions, actuals);
  return {cell, acc, acc < cfg.retrain_accuracy};
}

void FeedbackBuffer::expect(const CellId& cell, const KpiSample& prediction) {
  tracks_[cell].pending.push_back(prediction);
}

void FeedbackBuffer::settle(const DataLake& lake) {
  constexpr std::size_t kKeep = 1024;
  for (auto& [cell, t] : tracks_) {
    if (!lake.contains(cell)) continue;
    const KpiSeries& s = lake.history(cell);
    if (s.empty()) continue;
    std::vector<KpiSample> still;
    for (const auto& p : t.pending) {
      if (p.timestamp >= s.first_hour() && p.timestamp < s.end_hour()) {
        t.predicted.push_back(p);
        t.actual.push_back(s[static_cast<std::size_t>(p.timestamp - s.first_hour())]);
      } else {
        still.push_back(p);
      }
    }
    t.pending = std::move(still);
    if (t.predicted.size() > kKeep) {
      const auto drop = static_cast<std::ptrdiff_t>(t.predicted.size() - kKeep);
      t.predicted.erase(t.predicted.begin(), t.predicted.begin() + drop);
      t.actual.erase(t.actual.begin(), t.actual.begin() + drop);
    }
  }
}

std::size_t FeedbackBuffer::pairs(const CellId& cell) const {
  auto it = tracks_.find(cell);
  return it == tracks_.end() ? 0 : it->second.predicted.size();
}

void FeedbackBuffer::clear(const CellId& cell) {
  auto it = tracks_.find(cell);
  if (it == tracks_.end()) return;
  it->second.predicted.clear();
  it->second.actual.clear();
}

std::vector<CellId> FeedbackBuffer::cells() const {
  std::vector<CellId> out;
  for (const auto& [id, t] : tracks_) out.push_back(id);
  return out;
}

std::span<const KpiSample> FeedbackBuffer::predictions(const CellId& cell) const {
  auto it = tracks_.find(cell);
  if (it == tracks_.end()) return {};
  return it->second.predicted;
}

std::span<const KpiSample> FeedbackBuffer::actuals(const CellId& cell) const {
  auto it = tracks_.find(cell);
  if (it == tracks_.end()) return {};
  return it->second.actual;
}

std::optional<RetrainTrigger> feedback_and_maybe_retrain(FeedbackBuffer& buffer, const std::vector<CellId>& new_cells,
                                                         const ControlLoopConfig& cfg, EventLog& log, Hour hour,
                                                         std::vector<ModelPerformanceFeedback>* out) {
  const auto window = static_cast<std::size_t>(cfg.feedback_window_hours);
  RetrainTrigger trig;
  std::vector<CellId> evaluated;
  nlohmann::json acc_json = nlohmann::json::object();
  nlohmann::json missed = nlohmann::json::array();
  for (const auto& cell : buffer.cells()) {
    const std::size_t n = buffer.pairs(cell);
    if (n == 0) continue;
    const std::size_t take = std::min(n, window);
    ModelPerformanceFeedback fb;
    try {
      fb = evaluate_feedback(cell, buffer.predictions(cell).last(take), buffer.actuals(cell).last(take), cfg);
    } catch (const MetricError&) {
      continue;  // every actual was zero
    }
    evaluated.push_back(cell);
    acc_json[cell.to_string()] = fb.accuracy;
    if (out) out->push_back(fb);
    if (n >= window && fb.misprediction) {
      missed.push_back(cell.to_string());
      trig.cells.push_back(cell);
      trig.reasons[cell] = "feedback accuracy below " + format_double(cfg.retrain_accuracy) + "%";
      buffer.clear(cell);
    }
  }
  log.append(hour, EventTag::Feedback, evaluated,
             {{"window_hours", cfg.feedback_window_hours},
              {"threshold", cfg.retrain_accuracy},
              {"accuracy", acc_json},
              {"mispredicted", missed}});
  for (const auto& c : new_cells) {
    if (trig.reasons.emplace(c, "no model for the current cell configuration").second) trig.cells.push_back(c);
  }
  if (trig.cells.empty()) return std::nullopt;
  std::sort(trig.cells.begin(), trig.cells.end());
  nlohmann::json reasons = nlohmann::json::object();
  for (const auto& [c, why] : trig.reasons) reasons[c.to_string()] = why;
  log.append(hour, EventTag::Retrain, trig.cells, {{"reasons", reasons}});
  return trig;
}

// ---------------------------------------------------------------- loop

nlohmann::json LoopMetrics::to_json() const {
  return {{"loop_start", loop_start},
          {"loop_end", loop_end},
          {"cycles", cycles},
          {"target_met_at", target_met_at ? nlohmann::json(*target_met_at) : nlohmann::json(nullptr)},
          {"congested_hours_before", congested_hours_before},
          {"congested_hours_after", congested_hours_after},
          {"sub1_hours_before", sub1_hours_before},
          {"sub1_hours_after", sub1_hours_after},
          {"splits", splits},
          {"retrains", retrains},
          {"deployments", deployments},
          {"max_split_factor_reached", max_split_factor_reached},
          {"initial_mean_holdout_accuracy", initial_mean_holdout_accuracy},
          {"final_mean_feedback_accuracy", final_mean_feedback_accuracy},
          {"cells_before", cells_before},
          {"cells_after", cells_after}};
}

namespace {

std::size_t total_congested(std::span<const KpiSeries> series, const CongestionRule& rule) {
  std::size_t n = 0;
  for (const auto& s : series) n += congested_hours(s, rule);
  return n;
}

std::size_t sub1_hours(std::span<const KpiSeries> series) {
  const auto edges = default_bin_edges();
  const auto hist = histogram_hours(series, edges);
  return hours_below(hist, edges, 1.0);
}

}  // namespace

LoopResult run_control_loop(const LoopScenario& sc) {
  sc.loop.validate();
  sc.rule.validate();
  sc.lstm.validate();
  sc.training.validate();
  SplitPolicy policy = sc.split;
  policy.max_factor = sc.loop.max_split_factor;
  policy.validate();
  if (sc.traffic.empty()) throw ValidationError("loop: no traffic");

  NetworkState net(sc.traffic, sc.throughput_caps);
  const Hour total = net.end_hour() - net.first_hour();
  const Hour horizon = sc.loop.horizon_hours;
  if (total - horizon < sc.loop.min_history_hours) {
    throw ValidationError("loop: traffic of " + std::to_string(total) + " h leaves less than " +
                          std::to_string(sc.loop.min_history_hours) + " h of history before a " +
                          std::to_string(horizon) + " h horizon");
  }
  const Hour loop_start = net.end_hour() - horizon;
  const Hour loop_end = net.end_hour();
  const int period = sc.loop.period_hours;
  const TrainJob job{sc.lstm, sc.training, sc.loop.min_history_hours};

  EventLog log;
  DataBus bus;
  DataLake lake;
  CpmXapp xapp;
  FeedbackBuffer feedback;
  std::vector<SplitEvent> splits;
  std::vector<CellId> pending = net.active_cells();
  std::map<CellId, std::size_t> failed_at;  // history length when training failed
  LoopMetrics m;
  m.loop_start = loop_start;
  m.loop_end = loop_end;
  m.cells_before = pending.size();

  bool first = true;
  for (Hour e = loop_start + period - 1; e < loop_end; e += period) {
    net.realize_through(e);
    const ReportWindow window = first ? ReportWindow{net.first_hour(), e + 1 - net.first_hour()}
                                      : ReportWindow{e + 1 - period, period};
    bus.publish(smo_collect(net, window, log, e), log, e);
    while (auto r = bus.consume()) lake.ingest(*r);
    feedback.settle(lake);

    if (!pending.empty()) {
      const auto reply = negotiate_capabilities(ModelCapabilityQuery{}, log, e);
      const auto dep = train_and_return(lake, pending, job, sc.rule, xapp.version(), reply, log, e);
      xapp.deploy(dep);
      for (const auto& [cell, why] : dep.omitted) {
        failed_at[cell] = lake.contains(cell) ? lake.training_history(cell).size() : 0;
      }
      for (const auto& [cell, dm] : dep.models) failed_at.erase(cell);
      if (first && !dep.models.empty()) {
        double sum = 0.0;
        for (const auto& [cell, dm] : dep.models) sum += dm.holdout_accuracy;
        m.initial_mean_holdout_accuracy = sum / static_cast<double>(dep.models.size());
      }
      pending.clear();
    } else {
      xapp.reaffirm(log, e);
    }

    const auto inferences = cpm_infer(xapp, lake, net, policy.max_factor, log, e);
    std::vector<Inference> alarms;
    for (const auto& inf : inferences) {
      feedback.expect(inf.cell, inf.prediction);
      if (inf.alarm) alarms.push_back(inf);
    }
    for (const auto& req : issue_e2(alarms, policy, log, e)) {
      const CellLoadState& st = net.load_state(req.target);
      // One stream per (cell, round) so a cell's draws do not depend on other cells' splits.
      Rng rng(derive_seed(policy.seed, {static_cast<std::uint64_t>(st.cell.enb), static_cast<std::uint64_t>(st.cell.cell),
                                        static_cast<std::uint64_t>(st.cell.generation),
                                        static_cast<std::uint64_t>(st.split_rounds)}));
      const auto outcome = split_cell(st, policy, e + 1, rng, net.next_cell_index(st.cell.enb));
      net.apply(outcome);
      splits.push_back(outcome.event);
      // The parent's model describes its pre-split load.
      xapp.withdraw(req.target);
      feedback.forget(req.target);
      lake.mark_reconfigured(req.target, e + 1);
    }

    std::vector<CellId> fresh;
    for (const auto& cell : net.active_cells()) {
      if (xapp.models().count(cell) != 0 || !lake.contains(cell)) continue;
      const std::size_t have = lake.training_history(cell).size();
      if (static_cast<Hour>(have) < sc.loop.min_history_hours) continue;
      auto f = failed_at.find(cell);
      if (f != failed_at.end() && have < f->second + static_cast<std::size_t>(sc.loop.feedback_window_hours)) continue;
      fresh.push_back(cell);
    }
    std::vector<ModelPerformanceFeedback> fbs;
    if (auto trig = feedback_and_maybe_retrain(feedback, fresh, sc.loop, log, e, &fbs)) {
      pending = trig->cells;
      ++m.retrains;
    }
    if (!fbs.empty()) {
      double sum = 0.0;
      for (const auto& fb : fbs) sum += fb.accuracy;
      m.final_mean_feedback_accuracy = sum / static_cast<double>(fbs.size());
    }
    ++m.cycles;
    first = false;

    const Hour from = std::max(net.first_hour(), e + 1 - static_cast<Hour>(sc.loop.target_window_hours));
    bool met = true;
    for (const auto& cell : net.active_cells()) {
      const auto recent = net.history(cell).slice(from, e + 1 - from);
      if (congested_hours(recent, sc.loop.target_rule) > static_cast<std::size_t>(sc.loop.max_congested_hours)) {
        met = false;
        break;
      }
    }
    if (met) {
      m.target_met_at = e;
      break;
    }
  }
  net.realize_through(loop_end - 1);

  LoopResult out{net, std::move(log), {}, std::move(splits), {}, {}, xapp.models()};
  for (const auto& s : net.baseline()) out.baseline_horizon.push_back(s.slice(loop_start, horizon));
  for (const auto& s : net.histories()) out.realized_horizon.push_back(s.slice(loop_start, horizon));
  m.congested_hours_before = total_congested(out.baseline_horizon, sc.rule);
  m.congested_hours_after = total_congested(out.realized_horizon, sc.rule);
  m.sub1_hours_before = sub1_hours(out.baseline_horizon);
  m.sub1_hours_after = sub1_hours(out.realized_horizon);
  m.splits = out.splits.size();
  m.deployments = xapp.version();
  for (const auto& cell : net.active_cells()) {
    m.max_split_factor_reached = std::max(m.max_split_factor_reached, net.load_state(cell).split_factor());
  }
  m.cells_after = net.active_cells().size();
  out.metrics = m;
  return out;
}

}  // namespace cpm
