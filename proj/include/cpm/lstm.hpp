#pragma once

// Stacked LSTM with a dense head, 64-bit floats throughout.
//
// Parameters live in one flat vector so the optimizer and the model file
// treat them uniformly. Per layer l (input width in_l, H units) the block is
//   W_l : 4H x (in_l + H), row-major, gate rows ordered i, f, g, o,
//         columns [input | recurrent]
//   b_l : 4H
// followed by the head Wy : output_dim x H and by : output_dim.

#include <span>
#include <stdexcept>
#include <vector>

namespace cpm {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LstmConfig {
  int n_layers = 2;
  int units_per_layer = 12;
  int input_dim = 2;
  int output_dim = 2;

  void validate() const;
  friend bool operator==(const LstmConfig&, const LstmConfig&) = default;
};

struct ParamLayout {
  struct Layer {
    std::size_t w_offset = 0;
    std::size_t b_offset = 0;
    std::size_t rows = 0;  // 4H
    std::size_t cols = 0;  // in + H
    std::size_t input = 0;
    std::size_t hidden = 0;
  };
  std::vector<Layer> layers;
  std::size_t head_w_offset = 0;
  std::size_t head_b_offset = 0;
  std::size_t output = 0;
  std::size_t total = 0;

  explicit ParamLayout(const LstmConfig& config);
};

/// Read-only view of one layer's weights.
struct LayerView {
  std::span<const double> w;
  std::span<const double> b;
  std::size_t input = 0;
  std::size_t hidden = 0;
};

/// Per-feature min/max from the training split. Degenerate features
/// (max == min) normalize to 0 and denormalize to min.
struct NormStats {
  std::vector<double> min;
  std::vector<double> max;

  double normalize(std::size_t feature, double x) const;
  double denormalize(std::size_t feature, double y) const;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct ForecastModel {
  LstmConfig config;
  int lookback = 24;
  std::vector<double> params;
  NormStats norm;
  int trained_epochs = 0;

  /// All parameters zero, identity-free norm (min 0, max 1 per feature).
  static ForecastModel zeros(const LstmConfig& config, int lookback);

  ParamLayout layout() const { return ParamLayout(config); }
  LayerView layer(std::size_t index) const;
  /// Throws ShapeError if params do not match config or are not finite.
  void validate() const;

  friend bool operator==(const ForecastModel&, const ForecastModel&) = default;
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

/// One recurrence step: i, f, o = sigmoid(.), g = tanh(.),
/// c = f * c_prev + i * g, h = o * tanh(c).
LstmState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                         std::span<const double> c_prev, const LayerView& layer);

/// Runs the stack over `window` (time-major, input_dim values per step) from
/// zero states and applies the head to the final top-layer hidden state.
std::vector<double> forward(const ForecastModel& model, std::span<const double> window);

struct Example {
  std::span<const double> input;   // steps * input_dim
  std::span<const double> target;  // output_dim
};

struct BackwardResult {
  std::vector<double> grads;  // same layout as ForecastModel::params
  double loss = 0.0;          // mean over the batch of per-example MSE
};

/// Gradient of the mean batch MSE with respect to every parameter (BPTT).
BackwardResult backward(const ForecastModel& model, std::span<const Example> batch);

/// Mean of squared componentwise differences.
double mse_loss(std::span<const double> pred, std::span<const double> target);

}  // namespace cpm
