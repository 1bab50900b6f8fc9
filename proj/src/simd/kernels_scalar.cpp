#include <cmath>

#include "cpm/simd/kernels.hpp"

namespace cpm::simd {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    l0 += a[j] * b[j];
    l1 += a[j + 1] * b[j + 1];
    l2 += a[j + 2] * b[j + 2];
    l3 += a[j + 3] * b[j + 3];
  }
  double s = (l0 + l2) + (l1 + l3);
  for (; j < n; ++j) s += a[j] * b[j];
  return s;
}

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = dot(w + r * cols, x, cols);
    y[r] = bias ? s + bias[r] : s;
  }
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t j = 0; j < n; ++j) y[j] += a * x[j];
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* d, double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(cols, d[r], w + r * cols, out);
}

void ger_acc(double* w, std::size_t rows, std::size_t cols, const double* d, const double* x) {
  for (std::size_t r = 0; r < rows; ++r) axpy(cols, d[r], x, w + r * cols);
}

void adam(std::size_t n, double* p, const double* g, double* m, double* v, const AdamCoeffs& c) {
  for (std::size_t j = 0; j < n; ++j) {
    m[j] = c.beta1 * m[j] + c.one_minus_beta1 * g[j];
    v[j] = c.beta2 * v[j] + c.one_minus_beta2 * (g[j] * g[j]);
    const double mhat = m[j] / c.bias1;
    const double vhat = v[j] / c.bias2;
    p[j] = p[j] - c.lr * (mhat / (std::sqrt(vhat) + c.eps));
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, "scalar", gemv, gemv_t_acc, ger_acc, axpy, adam};
  return table;
}

}  // namespace cpm::simd
