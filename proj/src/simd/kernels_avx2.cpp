// AVX2 variants. Functions carry a target attribute so the rest of the
// binary stays baseline x86-64; dispatch checks CPU support first.

#include "cpm/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#define CPM_AVX2 __attribute__((target("avx2")))

namespace cpm::simd {

namespace {

CPM_AVX2 double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j)));
  }
  const __m128d pair = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
  double s = _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
  for (; j < n; ++j) s += a[j] * b[j];
  return s;
}

CPM_AVX2 void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* bias,
                   double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = dot(w + r * cols, x, cols);
    y[r] = bias ? s + bias[r] : s;
  }
}

CPM_AVX2 void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(y + j, _mm256_add_pd(_mm256_loadu_pd(y + j), _mm256_mul_pd(va, _mm256_loadu_pd(x + j))));
  }
  for (; j < n; ++j) y[j] += a * x[j];
}

CPM_AVX2 void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* d, double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(cols, d[r], w + r * cols, out);
}

CPM_AVX2 void ger_acc(double* w, std::size_t rows, std::size_t cols, const double* d, const double* x) {
  for (std::size_t r = 0; r < rows; ++r) axpy(cols, d[r], x, w + r * cols);
}

CPM_AVX2 void adam(std::size_t n, double* p, const double* g, double* m, double* v, const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(c.one_minus_beta1);
  const __m256d omb2 = _mm256_set1_pd(c.one_minus_beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias1);
  const __m256d bc2 = _mm256_set1_pd(c.bias2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d gj = _mm256_loadu_pd(g + j);
    const __m256d mj = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + j)), _mm256_mul_pd(omb1, gj));
    const __m256d vj =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + j)), _mm256_mul_pd(omb2, _mm256_mul_pd(gj, gj)));
    _mm256_storeu_pd(m + j, mj);
    _mm256_storeu_pd(v + j, vj);
    const __m256d mhat = _mm256_div_pd(mj, bc1);
    const __m256d vhat = _mm256_div_pd(vj, bc2);
    const __m256d step = _mm256_mul_pd(lr, _mm256_div_pd(mhat, _mm256_add_pd(_mm256_sqrt_pd(vhat), eps)));
    _mm256_storeu_pd(p + j, _mm256_sub_pd(_mm256_loadu_pd(p + j), step));
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

const KernelTable* avx2_kernels() {
  static const KernelTable table{Isa::Avx2, "avx2", gemv, gemv_t_acc, ger_acc, axpy, adam};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
}

}  // namespace cpm::simd

#else

namespace cpm::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace cpm::simd

#endif
