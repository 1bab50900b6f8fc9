#pragma once

// Supervised next-hour forecasting on KPI series: windowing, Adam, the
// training loop, prediction and the accuracy metric.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpm/kpi.hpp"
#include "cpm/lstm.hpp"

namespace cpm {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct TrainingConfig {
  static constexpr int kHorizon = 1;  // hours ahead

  int batch_size = 16;
  int epochs = 150;
  AdamHyper adam;
  int lookback = 24;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Number of leading hours of a series of `length` used for training.
std::size_t train_hours(std::size_t length, const TrainingConfig& cfg);

/// Feature order: prb_util, ip_throughput.
inline constexpr std::size_t kFeatures = 2;

/// Min/max per feature over the first `hours` samples of every series.
NormStats fit_norm(std::span<const KpiSeries> series, std::span<const std::size_t> hours);

struct WindowOrigin {
  CellId cell;
  Hour start = 0;
};

/// Sliding windows: window w covers samples [w, w + lookback) and its target
/// is sample w + lookback. All values min-max normalized.
struct WindowedDataset {
  std::size_t lookback = 0;
  std::vector<double> inputs;   // count * lookback * kFeatures
  std::vector<double> targets;  // count * kFeatures
  std::vector<WindowOrigin> origin;

  std::size_t size() const { return origin.size(); }
  Example example(std::size_t i) const;
};

WindowedDataset make_windows(const KpiSeries& series, const TrainingConfig& cfg, const NormStats& norm);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// Bias-corrected Adam update of `params` in place; initializes an empty state.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamHyper& hyper);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;       // mean per-window MSE over the epoch's batches
  double validation_loss = 0.0;  // after the epoch's updates; 0 when no validation windows
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::size_t train_windows = 0;
  std::size_t validation_windows = 0;
  double holdout_accuracy = 0.0;  // 100 - MAPE on validation windows, denormalized
};

struct TrainResult {
  ForecastModel model;
  TrainingLog log;
};

/// Chronological split per series; norm from the training hours only.
/// Throws TrainingError when no training window exists.
TrainResult train(std::span<const KpiSeries> series, const LstmConfig& lstm, const TrainingConfig& cfg);
TrainResult train(const KpiSeries& series, const LstmConfig& lstm, const TrainingConfig& cfg);

/// Seed of one cell's training run.
std::uint64_t cell_seed(std::uint64_t seed, const CellId& cell);

struct CellTraining {
  CellId cell;
  std::optional<TrainResult> result;
  std::string error;  // set when result is empty
};

/// Independent model per series (seeded with cell_seed), trained on up to
/// hardware_concurrency threads. Results keep the input order.
std::vector<CellTraining> train_each(std::span<const KpiSeries> series, const LstmConfig& lstm,
                                     const TrainingConfig& cfg);

/// Uniform in +-1/sqrt(fan_in), forget-gate biases 1, other biases 0.
std::vector<double> init_params(const LstmConfig& lstm, std::uint64_t seed);

/// Clamps prb_util to [0, 100] and floors throughput at 0.
KpiSample to_kpi_sample(std::span<const double> denormalized, Hour timestamp);

/// Forecast of the hour after the series' last sample.
KpiSample predict_next_hour(const ForecastModel& model, const KpiSeries& series);

/// 100 - MAPE (percent), floored at 0. Points with |actual| < 1e-6 are
/// skipped; throws MetricError when nothing remains.
double accuracy(std::span<const double> predictions, std::span<const double> actuals);
/// Over both KPIs of each sample pair.
double accuracy(std::span<const KpiSample> predictions, std::span<const KpiSample> actuals);

/// Accuracy of `model` over the validation windows of `series`.
double holdout_accuracy(const ForecastModel& model, const KpiSeries& series, const TrainingConfig& cfg);

/// Forecast for every validation target hour of `series`, in time order.
std::vector<KpiSample> holdout_predictions(const ForecastModel& model, const KpiSeries& series,
                                           const TrainingConfig& cfg);

}  // namespace cpm
