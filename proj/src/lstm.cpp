#include "cpm/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpm/kpi.hpp"
#include "cpm/simd/kernels.hpp"

namespace cpm {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Activations of one layer at one time step, recorded for BPTT.
struct StepRecord {
  std::vector<double> z;      // [x | h_prev]
  std::vector<double> gates;  // i, f, g, o after activation
  std::vector<double> c;
  std::vector<double> tanh_c;
  std::vector<double> h;
};

class Tape {
 public:
  Tape(const ParamLayout& layout, std::size_t steps) : steps_(steps) {
    records_.resize(layout.layers.size() * steps);
    for (std::size_t l = 0; l < layout.layers.size(); ++l) {
      const auto& L = layout.layers[l];
      for (std::size_t t = 0; t < steps; ++t) {
        auto& r = at(l, t);
        r.z.assign(L.cols, 0.0);
        r.gates.assign(L.rows, 0.0);
        r.c.assign(L.hidden, 0.0);
        r.tanh_c.assign(L.hidden, 0.0);
        r.h.assign(L.hidden, 0.0);
      }
    }
  }
  StepRecord& at(std::size_t layer, std::size_t t) { return records_[layer * steps_ + t]; }

 private:
  std::size_t steps_;
  std::vector<StepRecord> records_;
};

// Computes gate activations, c and h for one step into `r`, given r.z set.
void step_into(const ParamLayout::Layer& L, const double* w, const double* b, std::span<const double> c_prev,
               StepRecord& r, const simd::KernelTable& k) {
  const std::size_t H = L.hidden;
  k.gemv(w, L.rows, L.cols, r.z.data(), b, r.gates.data());
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigmoid(r.gates[j]);
    const double f = sigmoid(r.gates[H + j]);
    const double g = std::tanh(r.gates[2 * H + j]);
    const double o = sigmoid(r.gates[3 * H + j]);
    r.gates[j] = i;
    r.gates[H + j] = f;
    r.gates[2 * H + j] = g;
    r.gates[3 * H + j] = o;
    r.c[j] = f * c_prev[j] + i * g;
    r.tanh_c[j] = std::tanh(r.c[j]);
    r.h[j] = o * r.tanh_c[j];
  }
}

std::size_t steps_of(const ForecastModel& model, std::span<const double> window) {
  const auto in = static_cast<std::size_t>(model.config.input_dim);
  if (window.empty() || window.size() % in != 0) {
    throw ShapeError("window of " + std::to_string(window.size()) + " values is not a positive multiple of input_dim " +
                     std::to_string(in));
  }
  return window.size() / in;
}

// Forward pass that records every step; returns the head output.
std::vector<double> forward_recorded(const ForecastModel& model, const ParamLayout& layout,
                                     std::span<const double> window, Tape& tape, std::size_t steps,
                                     const simd::KernelTable& k) {
  const double* p = model.params.data();
  const std::vector<double> zeros_h(static_cast<std::size_t>(model.config.units_per_layer), 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < layout.layers.size(); ++l) {
      const auto& L = layout.layers[l];
      auto& r = tape.at(l, t);
      const double* x = l == 0 ? window.data() + t * L.input : tape.at(l - 1, t).h.data();
      std::copy_n(x, L.input, r.z.begin());
      const auto& h_prev = t == 0 ? zeros_h : tape.at(l, t - 1).h;
      std::copy(h_prev.begin(), h_prev.end(), r.z.begin() + static_cast<std::ptrdiff_t>(L.input));
      const std::span<const double> c_prev = t == 0 ? std::span<const double>(zeros_h) : tape.at(l, t - 1).c;
      step_into(L, p + L.w_offset, p + L.b_offset, c_prev, r, k);
    }
  }
  std::vector<double> y(layout.output);
  const auto& top = tape.at(layout.layers.size() - 1, steps - 1).h;
  k.gemv(p + layout.head_w_offset, layout.output, top.size(), top.data(), p + layout.head_b_offset, y.data());
  return y;
}

}  // namespace

void LstmConfig::validate() const {
  if (n_layers < 1) throw ValidationError("lstm: n_layers must be >= 1");
  if (units_per_layer < 1) throw ValidationError("lstm: units_per_layer must be >= 1");
  if (input_dim < 1) throw ValidationError("lstm: input_dim must be >= 1");
  if (output_dim < 1) throw ValidationError("lstm: output_dim must be >= 1");
}

ParamLayout::ParamLayout(const LstmConfig& config) {
  config.validate();
  const auto H = static_cast<std::size_t>(config.units_per_layer);
  std::size_t offset = 0;
  for (int l = 0; l < config.n_layers; ++l) {
    Layer L;
    L.input = l == 0 ? static_cast<std::size_t>(config.input_dim) : H;
    L.hidden = H;
    L.rows = 4 * H;
    L.cols = L.input + H;
    L.w_offset = offset;
    offset += L.rows * L.cols;
    L.b_offset = offset;
    offset += L.rows;
    layers.push_back(L);
  }
  output = static_cast<std::size_t>(config.output_dim);
  head_w_offset = offset;
  offset += output * H;
  head_b_offset = offset;
  offset += output;
  total = offset;
}

double NormStats::normalize(std::size_t feature, double x) const {
  const double span = max.at(feature) - min.at(feature);
  if (span == 0.0) return 0.0;
  return (x - min[feature]) / span;
}

double NormStats::denormalize(std::size_t feature, double y) const {
  const double span = max.at(feature) - min.at(feature);
  if (span == 0.0) return min[feature];
  return y * span + min[feature];
}

ForecastModel ForecastModel::zeros(const LstmConfig& config, int lookback) {
  ForecastModel m;
  m.config = config;
  m.lookback = lookback;
  m.params.assign(ParamLayout(config).total, 0.0);
  m.norm.min.assign(static_cast<std::size_t>(config.output_dim), 0.0);
  m.norm.max.assign(static_cast<std::size_t>(config.output_dim), 1.0);
  return m;
}

LayerView ForecastModel::layer(std::size_t index) const {
  const ParamLayout layout(config);
  if (index >= layout.layers.size()) throw ShapeError("layer index out of range");
  const auto& L = layout.layers[index];
  if (params.size() != layout.total) throw ShapeError("parameter vector does not match config");
  const std::span<const double> all(params);
  return {all.subspan(L.w_offset, L.rows * L.cols), all.subspan(L.b_offset, L.rows), L.input, L.hidden};
}

void ForecastModel::validate() const {
  const ParamLayout layout(config);
  if (params.size() != layout.total) {
    throw ShapeError("model has " + std::to_string(params.size()) + " parameters, config implies " +
                     std::to_string(layout.total));
  }
  if (lookback < 1) throw ShapeError("model lookback must be >= 1");
  for (double v : params) {
    if (!std::isfinite(v)) throw ShapeError("model parameter is not finite");
  }
  const auto features = static_cast<std::size_t>(std::max(config.input_dim, config.output_dim));
  if (norm.min.size() < features || norm.max.size() != norm.min.size()) {
    throw ShapeError("normalization stats do not cover every feature");
  }
}

LstmState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
                         const LayerView& layer) {
  const std::size_t H = layer.hidden;
  const std::size_t cols = layer.input + H;
  if (x.size() != layer.input || h_prev.size() != H || c_prev.size() != H || layer.w.size() != 4 * H * cols ||
      layer.b.size() != 4 * H) {
    throw ShapeError("lstm_cell_step: operand shapes do not match the layer");
  }
  ParamLayout::Layer L{0, 0, 4 * H, cols, layer.input, H};
  StepRecord r;
  r.z.assign(x.begin(), x.end());
  r.z.insert(r.z.end(), h_prev.begin(), h_prev.end());
  r.gates.assign(4 * H, 0.0);
  r.c.assign(H, 0.0);
  r.tanh_c.assign(H, 0.0);
  r.h.assign(H, 0.0);
  step_into(L, layer.w.data(), layer.b.data(), c_prev, r, simd::active_kernels());
  return {std::move(r.h), std::move(r.c)};
}

std::vector<double> forward(const ForecastModel& model, std::span<const double> window) {
  const ParamLayout layout(model.config);
  if (model.params.size() != layout.total) throw ShapeError("parameter vector does not match config");
  const std::size_t steps = steps_of(model, window);
  Tape tape(layout, steps);
  return forward_recorded(model, layout, window, tape, steps, simd::active_kernels());
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw ShapeError("mse_loss: shapes differ or are empty");
  double s = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - target[j];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

BackwardResult backward(const ForecastModel& model, std::span<const Example> batch) {
  const ParamLayout layout(model.config);
  if (model.params.size() != layout.total) throw ShapeError("parameter vector does not match config");
  if (batch.empty()) throw ShapeError("backward: empty batch");
  const auto& k = simd::active_kernels();
  const double* p = model.params.data();
  const std::size_t n_layers = layout.layers.size();
  const std::size_t H = static_cast<std::size_t>(model.config.units_per_layer);
  const std::size_t out = layout.output;

  BackwardResult result;
  result.grads.assign(layout.total, 0.0);
  double* gp = result.grads.data();

  std::size_t steps = steps_of(model, batch.front().input);
  Tape tape(layout, steps);
  std::vector<double> dy(out);
  std::vector<double> da(4 * H);
  std::vector<double> dz;
  std::vector<double> dh(H), dh_next(H), dc_next(H);
  // dh arriving from above (head or next layer) per time step.
  std::vector<double> dh_ext(steps * H), dh_ext_below(steps * H);
  const double scale = 2.0 / (static_cast<double>(out) * static_cast<double>(batch.size()));

  for (const auto& ex : batch) {
    if (steps_of(model, ex.input) != steps) throw ShapeError("backward: windows in a batch differ in length");
    if (ex.target.size() != out) throw ShapeError("backward: target size does not match output_dim");
    const auto y = forward_recorded(model, layout, ex.input, tape, steps, k);
    result.loss += mse_loss(y, ex.target);
    for (std::size_t j = 0; j < out; ++j) dy[j] = scale * (y[j] - ex.target[j]);

    const auto& top_h = tape.at(n_layers - 1, steps - 1).h;
    k.ger_acc(gp + layout.head_w_offset, out, H, dy.data(), top_h.data());
    k.axpy(out, 1.0, dy.data(), gp + layout.head_b_offset);
    std::fill(dh_ext.begin(), dh_ext.end(), 0.0);
    k.gemv_t_acc(p + layout.head_w_offset, out, H, dy.data(), dh_ext.data() + (steps - 1) * H);

    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& L = layout.layers[l];
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      std::fill(dc_next.begin(), dc_next.end(), 0.0);
      std::fill(dh_ext_below.begin(), dh_ext_below.end(), 0.0);
      dz.assign(L.cols, 0.0);
      for (std::size_t t = steps; t-- > 0;) {
        const auto& r = tape.at(l, t);
        const double* c_prev = t == 0 ? nullptr : tape.at(l, t - 1).c.data();
        for (std::size_t j = 0; j < H; ++j) {
          dh[j] = dh_ext[t * H + j] + dh_next[j];
          const double i = r.gates[j];
          const double f = r.gates[H + j];
          const double g = r.gates[2 * H + j];
          const double o = r.gates[3 * H + j];
          const double tc = r.tanh_c[j];
          const double dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
          const double cp = c_prev ? c_prev[j] : 0.0;
          da[j] = dc * g * i * (1.0 - i);
          da[H + j] = dc * cp * f * (1.0 - f);
          da[2 * H + j] = dc * i * (1.0 - g * g);
          da[3 * H + j] = dh[j] * tc * o * (1.0 - o);
          dc_next[j] = dc * f;
        }
        k.ger_acc(gp + L.w_offset, L.rows, L.cols, da.data(), r.z.data());
        k.axpy(L.rows, 1.0, da.data(), gp + L.b_offset);
        std::fill(dz.begin(), dz.end(), 0.0);
        k.gemv_t_acc(p + L.w_offset, L.rows, L.cols, da.data(), dz.data());
        if (l > 0) std::copy_n(dz.begin(), L.input, dh_ext_below.begin() + static_cast<std::ptrdiff_t>(t * H));
        std::copy_n(dz.begin() + static_cast<std::ptrdiff_t>(L.input), H, dh_next.begin());
      }
      std::swap(dh_ext, dh_ext_below);
    }
  }
  result.loss /= static_cast<double>(batch.size());
  return result;
}

}  // namespace cpm
