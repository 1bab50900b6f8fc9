// NEON variants (AArch64). Two float64x2 accumulators reproduce the four
// canonical lanes: lo holds lanes 0/1, hi holds lanes 2/3.

#include "cpm/simd/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>

namespace cpm::simd {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + j), vld1q_f64(b + j)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + j + 2), vld1q_f64(b + j + 2)));
  }
  const float64x2_t pair = vaddq_f64(lo, hi);
  double s = vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
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
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) vst1q_f64(y + j, vaddq_f64(vld1q_f64(y + j), vmulq_f64(va, vld1q_f64(x + j))));
  for (; j < n; ++j) y[j] += a * x[j];
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* d, double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(cols, d[r], w + r * cols, out);
}

void ger_acc(double* w, std::size_t rows, std::size_t cols, const double* d, const double* x) {
  for (std::size_t r = 0; r < rows; ++r) axpy(cols, d[r], x, w + r * cols);
}

void adam(std::size_t n, double* p, const double* g, double* m, double* v, const AdamCoeffs& c) {
  const float64x2_t b1 = vdupq_n_f64(c.beta1);
  const float64x2_t b2 = vdupq_n_f64(c.beta2);
  const float64x2_t omb1 = vdupq_n_f64(c.one_minus_beta1);
  const float64x2_t omb2 = vdupq_n_f64(c.one_minus_beta2);
  const float64x2_t bc1 = vdupq_n_f64(c.bias1);
  const float64x2_t bc2 = vdupq_n_f64(c.bias2);
  const float64x2_t lr = vdupq_n_f64(c.lr);
  const float64x2_t eps = vdupq_n_f64(c.eps);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    const float64x2_t gj = vld1q_f64(g + j);
    const float64x2_t mj = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + j)), vmulq_f64(omb1, gj));
    const float64x2_t vj = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + j)), vmulq_f64(omb2, vmulq_f64(gj, gj)));
    vst1q_f64(m + j, mj);
    vst1q_f64(v + j, vj);
    const float64x2_t mhat = vdivq_f64(mj, bc1);
    const float64x2_t vhat = vdivq_f64(vj, bc2);
    const float64x2_t step = vmulq_f64(lr, vdivq_f64(mhat, vaddq_f64(vsqrtq_f64(vhat), eps)));
    vst1q_f64(p + j, vsubq_f64(vld1q_f64(p + j), step));
  }
  for (; j < n; ++j) {
    m[j] = c.beta1 * m[j] + c.one_minus_beta1 * g[j];
    v[j] = c.beta2 * v[j] + c.one_minus_beta2 * (g[j] * g[j]);
    const double mhat = m[j] / c.bias1;
    const double vhat = v[j] / c.bias2;
    p[j] = p[j] - c.lr * (mhat / (__builtin_sqrt(vhat) + c.eps));
  }
}

}  // namespace

const KernelTable* neon_kernels() {
  static const KernelTable table{Isa::Neon, "neon", gemv, gemv_t_acc, ger_acc, axpy, adam};
  return &table;
}

}  // namespace cpm::simd

#else

namespace cpm::simd {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace cpm::simd

#endif
