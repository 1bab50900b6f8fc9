#pragma once

// Simulated O-RAN control plane. Hosts (SMO collector, data bus, AI server,
// non-RT RIC, near-RT RIC with the congestion xApp) are plain objects driven
// hour by hour by run_control_loop; messages are delivered in process with
// zero latency.

#include <cstdint>
#include <map>
#include <optional>
#include <deque>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpm/event_log.hpp"
#include "cpm/kpi.hpp"
#include "cpm/lstm.hpp"
#include "cpm/split.hpp"
#include "cpm/training.hpp"

namespace cpm {

// ---------------------------------------------------------------- network

/// Ground-truth RAN. Every original cell is a family with a fixed base
/// traffic series; a family's cells see the base KPIs scaled by their load
/// share (see kpi_at_share).
class NetworkState {
 public:
  /// Base series must be non-empty and cover the same hours. `caps` holds
  /// each family's zero-load throughput (one entry per series).
  NetworkState(std::vector<KpiSeries> base, std::vector<double> caps);

  /// Realizes hours up to and including `hour` under the current loads.
  void realize_through(Hour hour);
  /// First hour not yet realized.
  Hour realized_end() const { return realized_end_; }
  Hour first_hour() const { return first_hour_; }
  Hour end_hour() const { return end_hour_; }

  /// Active cells in ascending order.
  std::vector<CellId> active_cells() const;
  const CellLoadState& load_state(const CellId& cell) const;
  const KpiSeries& history(const CellId& cell) const;
  std::vector<KpiSeries> histories() const;
  const std::vector<KpiSeries>& baseline() const { return base_; }

  /// Lowest cell index not yet used in `enb`.
  int next_cell_index(int enb) const;
  /// Replaces the parent's state and adds the child; the child's first
  /// realized hour is the next one.
  void apply(const SplitOutcome& outcome);

  friend bool operator==(const NetworkState&, const NetworkState&) = default;

 private:
  struct Cell {
    CellLoadState state;
    std::size_t family = 0;
    KpiSeries history;
    friend bool operator==(const Cell&, const Cell&) = default;
  };
  Cell& find(const CellId& cell);
  const Cell& find(const CellId& cell) const;

  std::vector<KpiSeries> base_;
  std::map<CellId, Cell> cells_;
  Hour first_hour_ = 0;
  Hour end_hour_ = 0;
  Hour realized_end_ = 0;
};

// ---------------------------------------------------------------- O1 / bus

struct ReportWindow {
  Hour start = 0;
  Hour length = 0;
  friend bool operator==(const ReportWindow&, const ReportWindow&) = default;
};

struct O1Report {
  ReportWindow window;
  /// One series per active cell, ascending CellId, samples inside the window.
  std::vector<KpiSeries> payload;

  std::vector<CellId> sources() const;
  std::size_t sample_count() const;
  void validate() const;
  friend bool operator==(const O1Report&, const O1Report&) = default;
};

/// Throws RangeError if the window has not fully elapsed.
O1Report smo_collect(const NetworkState& network, ReportWindow window, EventLog& log, Hour hour);

class DataBus {
 public:
  void publish(O1Report report, EventLog& log, Hour hour);
  /// Oldest undelivered report, or nothing.
  std::optional<O1Report> consume();

 private:
  std::deque<O1Report> queue_;
};

/// Non-RT RIC history store fed from the bus.
class DataLake {
 public:
  /// Appends samples past each cell's current end; earlier ones are ignored.
  void ingest(const O1Report& report);
  bool contains(const CellId& cell) const { return series_.count(cell) != 0; }
  const KpiSeries& history(const CellId& cell) const;
  /// Hours since the cell's last reconfiguration (all hours if none).
  KpiSeries training_history(const CellId& cell) const;
  /// Older samples no longer describe the cell; training starts at `from`.
  void mark_reconfigured(const CellId& cell, Hour from);
  std::vector<CellId> cells() const;

 private:
  std::map<CellId, KpiSeries> series_;
  std::map<CellId, Hour> reconfigured_;
};

// ---------------------------------------------------------------- capability

struct ModelCapabilityQuery {
  std::vector<std::string> features{"recurrent-training", "float64"};
  std::vector<std::string> data_sources{"prb_util", "ip_throughput"};
};

struct ModelCapabilityReply {
  bool supported = false;
  std::vector<std::string> features;
  std::vector<std::string> data_sources;
  int max_parallel_jobs = 1;
  friend bool operator==(const ModelCapabilityReply&, const ModelCapabilityReply&) = default;
};

/// Answers from the AI server's fixed capability set.
ModelCapabilityReply negotiate_capabilities(const ModelCapabilityQuery& query, EventLog& log, Hour hour);

// ---------------------------------------------------------------- A1

struct DeployedModel {
  ForecastModel model;
  std::int64_t version = 0;
  double holdout_accuracy = 0.0;
};

struct A1Deployment {
  std::int64_t version = 0;
  CongestionRule policy;
  std::map<CellId, DeployedModel> models;
  std::map<CellId, std::string> omitted;  // cell -> reason

  /// Summary form (models by digest); with_parameters embeds full model files.
  nlohmann::json to_json(bool with_parameters = false) const;
};

struct TrainJob {
  LstmConfig lstm;
  TrainingConfig training;
  Hour min_history_hours = 48;
};

/// Trains one model per requested cell on its training history (in
/// parallel, merged in CellId order) and packages them with the rule as deployment `previous + 1`.
/// Cells with short history or a training failure are omitted with a reason.
/// Appends TrainRequest, TrainedModel and A1Deploy.
A1Deployment train_and_return(const DataLake& lake, const std::vector<CellId>& cells, const TrainJob& job,
                              const CongestionRule& rule, std::int64_t previous_version,
                              const ModelCapabilityReply& capabilities, EventLog& log, Hour hour);

/// Near-RT RIC side of A1 plus the congestion prediction xApp.
class CpmXapp {
 public:
  /// Merges the deployment's models and adopts its version and policy.
  void deploy(const A1Deployment& deployment);
  /// Drops a cell's model after its configuration changed under it.
  void withdraw(const CellId& cell) { models_.erase(cell); }
  /// A1Deploy for a cycle without new models: reaffirms the active version.
  void reaffirm(EventLog& log, Hour hour) const;

  std::int64_t version() const { return version_; }
  bool active() const { return version_ > 0; }
  const CongestionRule& policy() const { return policy_; }
  const std::map<CellId, DeployedModel>& models() const { return models_; }

 private:
  std::int64_t version_ = 0;
  CongestionRule policy_;
  std::map<CellId, DeployedModel> models_;
};

// ---------------------------------------------------------------- inference / E2

struct Inference {
  CellId cell;
  KpiSample prediction;  // for hour + 1
  bool alarm = false;
  int split_factor = 1;
  bool eligible = false;  // alarm and split_factor < max factor
};

/// Predicts the next hour for every cell with a deployed model and at least
/// `lookback` hours of history, in ascending CellId order. Appends one
/// Inference event and an AlarmRaised per alarmed cell.
std::vector<Inference> cpm_infer(const CpmXapp& xapp, const DataLake& lake, const NetworkState& network,
                                 int max_split_factor, EventLog& log, Hour hour);

enum class E2Action { CellSplit };

struct E2ControlRequest {
  CellId target;
  E2Action action = E2Action::CellSplit;
  SplitPolicy policy;
  Hour issued_at = 0;
  int split_factor = 1;  // before the split

  nlohmann::json to_json() const;
};

/// One CellSplit per eligible alarm, ascending CellId; ineligible alarms are
/// skipped. Throws ContractViolation for a non-alarmed entry.
std::vector<E2ControlRequest> issue_e2(std::vector<Inference> alarms, const SplitPolicy& policy, EventLog& log,
                                       Hour hour);

// ---------------------------------------------------------------- feedback

struct ControlLoopConfig {
  int period_hours = 1;
  double retrain_accuracy = 90.0;  // percent
  int feedback_window_hours = 24;
  CongestionRule target_rule;
  int max_congested_hours = 0;
  int target_window_hours = 168;
  int max_split_factor = 2;
  int horizon_hours = 168;
  int min_history_hours = 48;

  void validate() const;
  friend bool operator==(const ControlLoopConfig&, const ControlLoopConfig&) = default;
};

struct ModelPerformanceFeedback {
  CellId cell;
  double accuracy = 0.0;
  bool misprediction = false;
};

/// Accuracy of the paired predictions; misprediction when below the
/// configured threshold. Throws MetricError on an empty window.
ModelPerformanceFeedback evaluate_feedback(const CellId& cell, std::span<const KpiSample> predictions,
                                           std::span<const KpiSample> actuals, const ControlLoopConfig& cfg);

/// Per-cell (prediction, actual) pairs awaiting evaluation.
class FeedbackBuffer {
 public:
  void expect(const CellId& cell, const KpiSample& prediction);
  /// Pairs pending predictions whose hour has been collected.
  void settle(const DataLake& lake);
  std::size_t pairs(const CellId& cell) const;
  void clear(const CellId& cell);
  /// Drops the cell's pairs and pending predictions.
  void forget(const CellId& cell) { tracks_.erase(cell); }
  std::vector<CellId> cells() const;
  std::span<const KpiSample> predictions(const CellId& cell) const;
  std::span<const KpiSample> actuals(const CellId& cell) const;

 private:
  struct Track {
    std::vector<KpiSample> pending;
    std::vector<KpiSample> predicted;
    std::vector<KpiSample> actual;
  };
  std::map<CellId, Track> tracks_;
};

struct RetrainTrigger {
  std::vector<CellId> cells;
  std::map<CellId, std::string> reasons;
};

/// Evaluates every cell holding at least one pair over its latest
/// feedback window; a cell with a full window below the threshold is
/// scheduled for retraining and its buffer cleared. `new_cells` (models
/// still missing) join the trigger. Appends Feedback and, when anything is
/// scheduled, Retrain.
std::optional<RetrainTrigger> feedback_and_maybe_retrain(FeedbackBuffer& buffer, const std::vector<CellId>& new_cells,
                                                         const ControlLoopConfig& cfg, EventLog& log, Hour hour,
                                                         std::vector<ModelPerformanceFeedback>* out = nullptr);

// ---------------------------------------------------------------- loop

struct LoopScenario {
  std::vector<KpiSeries> traffic;
  std::vector<double> throughput_caps;  // per series
  CongestionRule rule;
  LstmConfig lstm;
  TrainingConfig training;
  SplitPolicy split;
  ControlLoopConfig loop;
};

struct LoopMetrics {
  Hour loop_start = 0;
  Hour loop_end = 0;  // exclusive; loop_start + horizon
  std::size_t cycles = 0;
  std::optional<Hour> target_met_at;
  std::size_t congested_hours_before = 0;  // no-action baseline over the horizon
  std::size_t congested_hours_after = 0;
  std::size_t sub1_hours_before = 0;
  std::size_t sub1_hours_after = 0;
  std::size_t splits = 0;
  std::size_t retrains = 0;
  std::int64_t deployments = 0;
  int max_split_factor_reached = 1;
  double initial_mean_holdout_accuracy = 0.0;
  double final_mean_feedback_accuracy = 0.0;
  std::size_t cells_before = 0;
  std::size_t cells_after = 0;

  nlohmann::json to_json() const;
};

struct LoopResult {
  NetworkState network;
  EventLog log;
  LoopMetrics metrics;
  std::vector<SplitEvent> splits;
  std::vector<KpiSeries> baseline_horizon;  // base traffic over the horizon
  std::vector<KpiSeries> realized_horizon;  // every cell, horizon hours only
  std::map<CellId, DeployedModel> models;   // final xApp model set
};

/// The loop starts `horizon_hours` before the end of the traffic; earlier
/// hours are history collected by the first O1 report. Stops early once no
/// cell exceeds max_congested_hours within the trailing target window, then
/// realizes the remaining horizon hours with the final configuration.
LoopResult run_control_loop(const LoopScenario& scenario);

}  // namespace cpm
