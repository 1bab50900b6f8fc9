#pragma once

// Dense double-precision kernels behind the LSTM forward/backward passes and
// the Adam update. Every variant evaluates in the same canonical order:
// dot products accumulate in four interleaved lanes (element j goes to lane
// j % 4), lanes combine as (l0 + l2) + (l1 + l3), the tail adds sequentially,
// and no fused multiply-add is used. Scalar, AVX2 and NEON results are
// therefore bit-identical.

#include <cstddef>
#include <vector>

namespace cpm::simd {

enum class Isa { Scalar, Avx2, Neon };

struct AdamCoeffs {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double one_minus_beta1 = 0.1;
  double one_minus_beta2 = 0.001;
  double bias1 = 1.0;  // 1 - beta1^t
  double bias2 = 1.0;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  const char* name;
  /// y[r] = dot(W[r, :], x) + bias[r]; W row-major rows x cols; bias may be null.
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* bias,
               double* y);
  /// out[c] += sum_r W[r, c] * d[r], accumulated row by row in ascending r.
  void (*gemv_t_acc)(const double* w, std::size_t rows, std::size_t cols, const double* d, double* out);
  /// W[r, c] += d[r] * x[c].
  void (*ger_acc)(double* w, std::size_t rows, std::size_t cols, const double* d, const double* x);
  /// y += a * x.
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  /// Bias-corrected Adam step over n parameters, in place.
  void (*adam)(std::size_t n, double* p, const double* g, double* m, double* v, const AdamCoeffs& c);
};

const KernelTable& scalar_kernels();
/// Null when not compiled in or not supported by the running CPU.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// Every variant usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

/// Chosen once per process: the widest supported variant, unless the
/// CPM_SIMD environment variable names one of scalar / avx2 / neon.
const KernelTable& active_kernels();

}  // namespace cpm::simd
