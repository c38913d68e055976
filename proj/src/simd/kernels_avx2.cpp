// AVX2 + FMA kernels. This file is the only one compiled with -mavx2 -mfma;
// nothing here runs unless dispatch has confirmed CPU support.

#include <immintrin.h>

#include <algorithm>

#include "tapkit/simd.hpp"

namespace tapkit::simd::avx2 {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d high64 = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

float sum_f32(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float out = hsum(acc);
  for (; i < n; ++i) out += x[i];
  return out;
}

double sum_f64(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double out = hsum(acc);
  for (; i < n; ++i) out += x[i];
  return out;
}

// Same operation sequence as the scalar kernel lane by lane, so results are
// bit-identical.
void tiou_many(double qs, double qe, const double* starts, const double* ends, double* out,
               std::size_t n) {
  const __m256d vqs = _mm256_set1_pd(qs);
  const __m256d vqe = _mm256_set1_pd(qe);
  const __m256d vqlen = _mm256_set1_pd(qe - qs);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d s = _mm256_loadu_pd(starts + i);
    const __m256d e = _mm256_loadu_pd(ends + i);
    const __m256d inter = _mm256_max_pd(zero, _mm256_sub_pd(_mm256_min_pd(vqe, e), _mm256_max_pd(vqs, s)));
    const __m256d uni = _mm256_sub_pd(_mm256_add_pd(vqlen, _mm256_sub_pd(e, s)), inter);
    const __m256d positive = _mm256_cmp_pd(inter, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(positive, _mm256_div_pd(inter, uni)));
  }
  const double qlen = qe - qs;
  for (; i < n; ++i) {
    const double inter = std::max(0.0, std::min(qe, ends[i]) - std::max(qs, starts[i]));
    const double uni = qlen + (ends[i] - starts[i]) - inter;
    out[i] = inter > 0.0 ? inter / uni : 0.0;
  }
}

}  // namespace

const KernelTable kTable{
    Isa::kAvx2, dot_f32, dot_f64, axpy_f32, axpy_f64, sum_f32, sum_f64, tiou_many,
};

}  // namespace tapkit::simd::avx2
