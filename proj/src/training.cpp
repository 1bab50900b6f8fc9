#include "cpm/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "cpm/rng.hpp"
#include "cpm/simd/kernels.hpp"

namespace cpm {

namespace {

double feature(const KpiSample& s, std::size_t f) { return f == 0 ? s.prb_util : s.ip_throughput; }

void require_kpi_shape(const LstmConfig& lstm) {
  if (lstm.input_dim != static_cast<int>(kFeatures) || lstm.output_dim != static_cast<int>(kFeatures)) {
    throw ShapeError("KPI forecasting needs input_dim == output_dim == 2");
  }
}

}  // namespace

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ValidationError("training: batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("training: epochs must be >= 1");
  if (lookback < 1) throw ValidationError("training: lookback must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("training: train_fraction must lie in (0, 1)");
  }
  if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.epsilon > 0.0)) {
    throw ValidationError("training: invalid Adam hyperparameters");
  }
}

std::size_t train_hours(std::size_t length, const TrainingConfig& cfg) {
  return static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(length)));
}

NormStats fit_norm(std::span<const KpiSeries> series, std::span<const std::size_t> hours) {
  NormStats norm;
  norm.min.assign(kFeatures, std::numeric_limits<double>::infinity());
  norm.max.assign(kFeatures, -std::numeric_limits<double>::infinity());
  bool any = false;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::size_t n = std::min(hours[s], series[s].size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < kFeatures; ++f) {
        norm.min[f] = std::min(norm.min[f], feature(series[s][i], f));
        norm.max[f] = std::max(norm.max[f], feature(series[s][i], f));
      }
      any = true;
    }
  }
  if (!any) throw TrainingError("cannot fit normalization on zero samples");
  return norm;
}

Example WindowedDataset::example(std::size_t i) const {
  const std::span<const double> in(inputs);
  const std::span<const double> tg(targets);
  return {in.subspan(i * lookback * kFeatures, lookback * kFeatures), tg.subspan(i * kFeatures, kFeatures)};
}

WindowedDataset make_windows(const KpiSeries& series, const TrainingConfig& cfg, const NormStats& norm) {
  const auto lookback = static_cast<std::size_t>(cfg.lookback);
  if (cfg.lookback < 1) throw ValidationError("training: lookback must be >= 1");
  if (series.size() <= lookback) {
    throw TrainingError("series " + series.cell().to_string() + " has " + std::to_string(series.size()) +
                        " hours, need more than lookback " + std::to_string(lookback));
  }
  std::vector<double> normalized(series.size() * kFeatures);
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (std::size_t f = 0; f < kFeatures; ++f) normalized[i * kFeatures + f] = norm.normalize(f, feature(series[i], f));
  }
  WindowedDataset ds;
  ds.lookback = lookback;
  const std::size_t count = series.size() - lookback;
  ds.inputs.reserve(count * lookback * kFeatures);
  ds.targets.reserve(count * kFeatures);
  for (std::size_t w = 0; w < count; ++w) {
    const auto first = normalized.begin() + static_cast<std::ptrdiff_t>(w * kFeatures);
    ds.inputs.insert(ds.inputs.end(), first, first + static_cast<std::ptrdiff_t>(lookback * kFeatures));
    const auto target = normalized.begin() + static_cast<std::ptrdiff_t>((w + lookback) * kFeatures);
    ds.targets.insert(ds.targets.end(), target, target + static_cast<std::ptrdiff_t>(kFeatures));
    ds.origin.push_back({series.cell(), series[w].timestamp});
  }
  return ds;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamHyper& hyper) {
  if (grads.size() != params.size()) throw ShapeError("adam_step: gradient and parameter sizes differ");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match parameters");
  }
  ++state.step;
  simd::AdamCoeffs c;
  c.lr = hyper.lr;
  c.beta1 = hyper.beta1;
  c.beta2 = hyper.beta2;
  c.eps = hyper.epsilon;
  c.one_minus_beta1 = 1.0 - hyper.beta1;
  c.one_minus_beta2 = 1.0 - hyper.beta2;
  c.bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  c.bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  simd::active_kernels().adam(params.size(), params.data(), grads.data(), state.m.data(), state.v.data(), c);
}

std::vector<double> init_params(const LstmConfig& lstm, std::uint64_t seed) {
  const ParamLayout layout(lstm);
  std::vector<double> p(layout.total, 0.0);
  Rng rng(derive_seed(seed, {0x1417}));
  for (const auto& L : layout.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(L.cols));
    for (std::size_t j = 0; j < L.rows * L.cols; ++j) p[L.w_offset + j] = rng.uniform(-bound, bound);
    for (std::size_t j = 0; j < L.hidden; ++j) p[L.b_offset + L.hidden + j] = 1.0;  // forget gate
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(lstm.units_per_layer));
  for (std::size_t j = 0; j < layout.output * static_cast<std::size_t>(lstm.units_per_layer); ++j) {
    p[layout.head_w_offset + j] = rng.uniform(-bound, bound);
  }
  return p;
}

namespace {

struct Split {
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<KpiSample> validation_actuals;
};

double mean_loss(const ForecastModel& model, std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  double s = 0.0;
  for (const auto& ex : examples) s += mse_loss(forward(model, ex.input), ex.target);
  return s / static_cast<double>(examples.size());
}

KpiSample denormalize_output(const ForecastModel& model, std::span<const double> y, Hour t) {
  std::vector<double> d(kFeatures);
  for (std::size_t f = 0; f < kFeatures; ++f) d[f] = model.norm.denormalize(f, y[f]);
  return to_kpi_sample(d, t);
}

double accuracy_on(const ForecastModel& model, std::span<const Example> examples, std::span<const KpiSample> actuals) {
  std::vector<KpiSample> preds;
  preds.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    preds.push_back(denormalize_output(model, forward(model, examples[i].input), actuals[i].timestamp));
  }
  return accuracy(preds, actuals);
}

}  // namespace

TrainResult train(std::span<const KpiSeries> series, const LstmConfig& lstm, const TrainingConfig& cfg) {
  lstm.validate();
  cfg.validate();
  require_kpi_shape(lstm);
  if (series.empty()) throw TrainingError("no series to train on");

  const auto lookback = static_cast<std::size_t>(cfg.lookback);
  std::vector<std::size_t> n_train;
  for (const auto& s : series) n_train.push_back(train_hours(s.size(), cfg));
  std::size_t train_windows = 0;
  for (std::size_t s = 0; s < series.size(); ++s) train_windows += n_train[s] > lookback ? n_train[s] - lookback : 0;
  if (train_windows == 0) {
    throw TrainingError("insufficient data: no training window with lookback " + std::to_string(lookback) +
                        " after the chronological split");
  }

  TrainResult result;
  ForecastModel& model = result.model;
  model.config = lstm;
  model.lookback = cfg.lookback;
  model.norm = fit_norm(series, n_train);
  model.params = init_params(lstm, cfg.seed);

  std::vector<WindowedDataset> datasets;
  Split split;
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].size() <= lookback) continue;
    datasets.push_back(make_windows(series[s], cfg, model.norm));
  }
  // Window w's target is sample w + lookback; it trains when that sample lies in the training hours.
  {
    std::size_t d = 0;
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (series[s].size() <= lookback) continue;
      const auto& ds = datasets[d++];
      for (std::size_t w = 0; w < ds.size(); ++w) {
        if (w + lookback < n_train[s]) {
          split.train.push_back(ds.example(w));
        } else {
          split.validation.push_back(ds.example(w));
          split.validation_actuals.push_back(series[s][w + lookback]);
        }
      }
    }
  }
  result.log.train_windows = split.train.size();
  result.log.validation_windows = split.validation.size();

  Rng shuffle_rng(derive_seed(cfg.seed, {0x5F1E}));
  AdamState adam;
  std::vector<std::size_t> order(split.train.size());
  std::vector<Example> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(split.train[order[i]]);
      auto bw = backward(model, batch);
      loss_sum += bw.loss * static_cast<double>(batch.size());
      adam_step(model.params, bw.grads, adam, cfg.adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.validation_loss = mean_loss(model, split.validation);
    result.log.epochs.push_back(rec);
  }
  model.trained_epochs = cfg.epochs;
  model.validate();
  if (!split.validation.empty()) {
    result.log.holdout_accuracy = accuracy_on(model, split.validation, split.validation_actuals);
  }
  return result;
}

TrainResult train(const KpiSeries& series, const LstmConfig& lstm, const TrainingConfig& cfg) {
  return train(std::span<const KpiSeries>(&series, 1), lstm, cfg);
}

KpiSample to_kpi_sample(std::span<const double> denormalized, Hour timestamp) {
  if (denormalized.size() != kFeatures) throw ShapeError("prediction must hold 2 features");
  if (std::isnan(denormalized[0]) || std::isnan(denormalized[1])) throw ShapeError("prediction is NaN");
  KpiSample s;
  s.timestamp = timestamp;
  s.prb_util = std::clamp(denormalized[0], 0.0, 100.0);
  s.ip_throughput = std::max(denormalized[1], 0.0);
  return s;
}

KpiSample predict_next_hour(const ForecastModel& model, const KpiSeries& series) {
  require_kpi_shape(model.config);
  const auto lookback = static_cast<std::size_t>(model.lookback);
  if (series.size() < lookback) {
    throw ShapeError("series " + series.cell().to_string() + " has fewer than " + std::to_string(lookback) +
                     " samples");
  }
  std::vector<double> window;
  window.reserve(lookback * kFeatures);
  for (std::size_t i = series.size() - lookback; i < series.size(); ++i) {
    for (std::size_t f = 0; f < kFeatures; ++f) window.push_back(model.norm.normalize(f, feature(series[i], f)));
  }
  return denormalize_output(model, forward(model, window), series.end_hour());
}

double accuracy(std::span<const double> predictions, std::span<const double> actuals) {
  if (predictions.size() != actuals.size() || predictions.empty()) {
    throw MetricError("accuracy needs equal, nonempty prediction and actual sequences");
  }
  double ape_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    if (std::abs(actuals[i]) < 1e-6) continue;
    ape_sum += 100.0 * std::abs(predictions[i] - actuals[i]) / std::abs(actuals[i]);
    ++n;
  }
  if (n == 0) throw MetricError("accuracy undefined: every actual value is ~0");
  return std::max(0.0, 100.0 - ape_sum / static_cast<double>(n));
}

double accuracy(std::span<const KpiSample> predictions, std::span<const KpiSample> actuals) {
  if (predictions.size() != actuals.size()) throw MetricError("accuracy needs equal lengths");
  std::vector<double> p;
  std::vector<double> a;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    p.push_back(predictions[i].prb_util);
    p.push_back(predictions[i].ip_throughput);
    a.push_back(actuals[i].prb_util);
    a.push_back(actuals[i].ip_throughput);
  }
  return accuracy(p, a);
}

namespace {

struct Holdout {
  std::vector<Example> examples;
  std::vector<KpiSample> actuals;
  WindowedDataset ds;
};

void collect_holdout(const ForecastModel& model, const KpiSeries& series, const TrainingConfig& cfg, Holdout& h) {
  const auto lookback = static_cast<std::size_t>(model.lookback);
  TrainingConfig c = cfg;
  c.lookback = model.lookback;
  h.ds = make_windows(series, c, model.norm);
  const std::size_t n_train = train_hours(series.size(), cfg);
  for (std::size_t w = 0; w < h.ds.size(); ++w) {
    if (w + lookback >= n_train) {
      h.examples.push_back(h.ds.example(w));
      h.actuals.push_back(series[w + lookback]);
    }
  }
}

}  // namespace

double holdout_accuracy(const ForecastModel& model, const KpiSeries& series, const TrainingConfig& cfg) {
  Holdout h;
  collect_holdout(model, series, cfg, h);
  return accuracy_on(model, h.examples, h.actuals);
}

std::vector<KpiSample> holdout_predictions(const ForecastModel& model, const KpiSeries& series,
                                           const TrainingConfig& cfg) {
  Holdout h;
  collect_holdout(model, series, cfg, h);
  std::vector<KpiSample> out;
  out.reserve(h.examples.size());
  for (std::size_t i = 0; i < h.examples.size(); ++i) {
    out.push_back(denormalize_output(model, forward(model, h.examples[i].input), h.actuals[i].timestamp));
  }
  return out;
}

std::uint64_t cell_seed(std::uint64_t seed, const CellId& cell) {
  return derive_seed(seed, {static_cast<std::uint64_t>(cell.enb), static_cast<std::uint64_t>(cell.cell),
                            static_cast<std::uint64_t>(cell.generation)});
}

std::vector<CellTraining> train_each(std::span<const KpiSeries> series, const LstmConfig& lstm,
                                     const TrainingConfig& cfg) {
  std::vector<CellTraining> out(series.size());
  auto run = [&](std::size_t i) {
    out[i].cell = series[i].cell();
    TrainingConfig c = cfg;
    c.seed = cell_seed(cfg.seed, series[i].cell());
    try {
      out[i].result = train(series[i], lstm, c);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  };
  const std::size_t threads = std::min<std::size_t>(series.size(), std::max(1u, std::thread::hardware_concurrency()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < series.size(); ++i) run(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < series.size(); i = next++) run(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace cpm
