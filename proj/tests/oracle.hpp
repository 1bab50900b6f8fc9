#pragma once

// Test-only reference computations written directly from the textbook
// formulas, independent of the library's kernels and flat-buffer helpers
// (only the documented parameter layout is shared).

#include <cmath>
#include <vector>

#include "cpm/lstm.hpp"

namespace oracle {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Gates {
  std::vector<std::vector<double>> wx[4];  // [gate][unit][input]
  std::vector<std::vector<double>> wh[4];  // [gate][unit][unit]
  std::vector<double> b[4];
};

// Unpacks layer `l` into per-gate matrices (gate order i, f, g, o).
inline Gates unpack(const cpm::ForecastModel& m, std::size_t l) {
  const cpm::ParamLayout layout(m.config);
  const auto& L = layout.layers[l];
  Gates g;
  for (int k = 0; k < 4; ++k) {
    g.wx[k].assign(L.hidden, std::vector<double>(L.input));
    g.wh[k].assign(L.hidden, std::vector<double>(L.hidden));
    g.b[k].assign(L.hidden, 0.0);
    for (std::size_t u = 0; u < L.hidden; ++u) {
      const std::size_t row = k * L.hidden + u;
      for (std::size_t j = 0; j < L.input; ++j) g.wx[k][u][j] = m.params[L.w_offset + row * L.cols + j];
      for (std::size_t j = 0; j < L.hidden; ++j) g.wh[k][u][j] = m.params[L.w_offset + row * L.cols + L.input + j];
      g.b[k][u] = m.params[L.b_offset + row];
    }
  }
  return g;
}

inline void step(const Gates& g, const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) {
  const std::size_t H = h.size();
  std::vector<double> z[4];
  for (int k = 0; k < 4; ++k) {
    z[k].assign(H, 0.0);
    for (std::size_t u = 0; u < H; ++u) {
      double s = g.b[k][u];
      for (std::size_t j = 0; j < x.size(); ++j) s += g.wx[k][u][j] * x[j];
      for (std::size_t j = 0; j < H; ++j) s += g.wh[k][u][j] * h[j];
      z[k][u] = s;
    }
  }
  for (std::size_t u = 0; u < H; ++u) {
    const double i = sigmoid(z[0][u]);
    const double f = sigmoid(z[1][u]);
    const double gg = std::tanh(z[2][u]);
    c[u] = f * c[u] + i * gg;
  }
  for (std::size_t u = 0; u < H; ++u) {
    const double o = sigmoid(z[3][u]);
    h[u] = o * std::tanh(c[u]);
  }
}

inline std::vector<double> forward(const cpm::ForecastModel& m, const std::vector<double>& window) {
  const cpm::ParamLayout layout(m.config);
  const std::size_t in = static_cast<std::size_t>(m.config.input_dim);
  const std::size_t steps = window.size() / in;
  std::vector<Gates> gates;
  std::vector<std::vector<double>> h, c;
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    gates.push_back(unpack(m, l));
    h.emplace_back(layout.layers[l].hidden, 0.0);
    c.emplace_back(layout.layers[l].hidden, 0.0);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> x(window.begin() + t * in, window.begin() + (t + 1) * in);
    for (std::size_t l = 0; l < gates.size(); ++l) {
      step(gates[l], x, h[l], c[l]);
      x = h[l];
    }
  }
  const auto& top = h.back();
  std::vector<double> y(layout.output);
  for (std::size_t r = 0; r < layout.output; ++r) {
    double s = m.params[layout.head_b_offset + r];
    for (std::size_t j = 0; j < top.size(); ++j) s += m.params[layout.head_w_offset + r * top.size() + j] * top[j];
    y[r] = s;
  }
  return y;
}

}  // namespace oracle
