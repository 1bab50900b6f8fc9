#pragma once

// Scenario configuration and the generate / train / run / validate commands
// behind the `cpm` executable. Every command writes into an output directory
// together with the fully resolved configuration it used.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpm/event_log.hpp"
#include "cpm/ric.hpp"
#include "cpm/traffic.hpp"

namespace cpm {

struct TrafficConfig {
  enum class Source { Synthetic, Csv };
  Source source = Source::Synthetic;
  SyntheticProfile profile;
  std::string csv_path;
  DatasetSchema schema;
  /// Zero-load throughput used by the split model; defaults to the profile's
  /// value (synthetic) or each cell's maximum observed throughput (CSV).
  std::optional<double> throughput_cap;
};

struct ScenarioConfig {
  TrafficConfig traffic;
  CongestionRule rule;
  LstmConfig lstm;
  TrainingConfig training;
  ControlLoopConfig loop;
  SplitPolicy split;
  std::string output_dir = "cpm_out";
  std::uint64_t seed = 0;

  void validate() const;
  /// Component seeds derived from `seed`; split.max_factor follows the loop.
  ScenarioConfig resolved() const;
};

/// Missing keys keep the values of `base`; unknown keys are rejected.
ScenarioConfig scenario_from_json(const nlohmann::json& doc, ScenarioConfig base = {});
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Traffic named by the config (generated or ingested) and its per-cell caps.
std::vector<KpiSeries> load_traffic(const ScenarioConfig& cfg);
std::vector<double> throughput_caps(const ScenarioConfig& cfg, const std::vector<KpiSeries>& traffic);

struct GenerateResult {
  std::filesystem::path dataset;
  std::size_t cells = 0;
  Hour hours = 0;
};
/// dataset.csv plus manifest.json and config.json.
GenerateResult cmd_generate(const ScenarioConfig& cfg);

struct TrainReport {
  std::vector<CellId> cells;
  std::vector<double> accuracy;  // held-out, percent
  std::vector<std::string> failures;  // "cell: reason"
  double mean_accuracy = 0.0;
  nlohmann::json to_json() const;
};
/// models/<enb>_<cell>_<gen>.json, train_report.json, training_loss.csv,
/// holdout_predictions.csv and config.json.
TrainReport cmd_train(const ScenarioConfig& cfg, const std::filesystem::path& dataset);

/// Validated, seed-resolved loop inputs described by `cfg`.
LoopScenario loop_scenario(const ScenarioConfig& cfg);

/// events.jsonl, summary.json, splits.csv, a1_deployment.json,
/// e2_requests.json, histogram_factor<k>.csv (k = 1 for the no-action
/// baseline and the highest split factor reached) and config.json.
LoopResult cmd_run(const ScenarioConfig& cfg);

LogCheck cmd_validate(const std::filesystem::path& event_log);

}  // namespace cpm
