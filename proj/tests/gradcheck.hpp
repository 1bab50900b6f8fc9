#pragma once

// Central finite-difference check of backward() used by the unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpm/lstm.hpp"
#include "cpm/rng.hpp"

namespace gradcheck {

struct Batch {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;

  std::vector<cpm::Example> examples() const {
    std::vector<cpm::Example> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) out.push_back({inputs[i], targets[i]});
    return out;
  }
};

inline cpm::ForecastModel random_model(cpm::Rng& r, int layers, int units, int in, int out, int lookback) {
  auto m = cpm::ForecastModel::zeros(cpm::LstmConfig{layers, units, in, out}, lookback);
  for (auto& p : m.params) p = r.uniform(-0.8, 0.8);
  return m;
}

inline Batch random_batch(cpm::Rng& r, const cpm::ForecastModel& m, std::size_t size) {
  Batch b;
  for (std::size_t i = 0; i < size; ++i) {
    std::vector<double> x(static_cast<std::size_t>(m.lookback * m.config.input_dim));
    for (auto& v : x) v = r.uniform(-1.0, 1.0);
    std::vector<double> t(static_cast<std::size_t>(m.config.output_dim));
    for (auto& v : t) v = r.uniform(-1.0, 1.0);
    b.inputs.push_back(std::move(x));
    b.targets.push_back(std::move(t));
  }
  return b;
}

inline double batch_loss(const cpm::ForecastModel& m, const Batch& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < b.inputs.size(); ++i) sum += cpm::mse_loss(cpm::forward(m, b.inputs[i]), b.targets[i]);
  return sum / static_cast<double>(b.inputs.size());
}

struct Result {
  double worst_rel = 0.0;
  std::size_t checked = 0;
  std::size_t failed = 0;
};

/// Relative error |a - n| / max(|a|, |n|); pairs where both are below
/// `floor` are compared absolutely against tol * floor.
inline Result check(const cpm::ForecastModel& model, const Batch& batch, double step = 1e-5, double tol = 1e-4,
                    double floor = 1e-7) {
  const auto analytic = cpm::backward(model, batch.examples()).grads;
  Result res;
  cpm::ForecastModel m = model;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const double keep = m.params[i];
    m.params[i] = keep + step;
    const double up = batch_loss(m, batch);
    m.params[i] = keep - step;
    const double down = batch_loss(m, batch);
    m.params[i] = keep;
    const double numeric = (up - down) / (2 * step);
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
    const double rel = scale < floor ? std::abs(analytic[i] - numeric) / floor : std::abs(analytic[i] - numeric) / scale;
    res.worst_rel = std::max(res.worst_rel, rel);
    ++res.checked;
    if (rel > tol) ++res.failed;
  }
  return res;
}

}  // namespace gradcheck
