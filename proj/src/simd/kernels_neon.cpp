// NEON kernels for aarch64 (always present there, so no runtime probe).

#include <arm_neon.h>

#include <algorithm>

#include "tapkit/simd.hpp"

namespace tapkit::simd::neon {
namespace {

float dot_f32(const float* a, const float* b, std::size_t n) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = vfmaq_f32(acc, vld1q_f32(a + i), vld1q_f32(b + i));
  float out = vaddvq_f32(acc);
  for (; i < n; ++i) out += a[i] * b[i];
  return out;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double out = vaddvq_f64(acc);
  for (; i < n; ++i) out += a[i] * b[i];
  return out;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_n_f32(vld1q_f32(y + i), vld1q_f32(x + i), alpha));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_n_f64(vld1q_f64(y + i), vld1q_f64(x + i), alpha));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

float sum_f32(const float* x, std::size_t n) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = vaddq_f32(acc, vld1q_f32(x + i));
  float out = vaddvq_f32(acc);
  for (; i < n; ++i) out += x[i];
  return out;
}

double sum_f64(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double out = vaddvq_f64(acc);
  for (; i < n; ++i) out += x[i];
  return out;
}

void tiou_many(double qs, double qe, const double* starts, const double* ends, double* out,
               std::size_t n) {
  const float64x2_t vqs = vdupq_n_f64(qs);
  const float64x2_t vqe = vdupq_n_f64(qe);
  const float64x2_t vqlen = vdupq_n_f64(qe - qs);
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t s = vld1q_f64(starts + i);
    const float64x2_t e = vld1q_f64(ends + i);
    const float64x2_t inter = vmaxq_f64(zero, vsubq_f64(vminq_f64(vqe, e), vmaxq_f64(vqs, s)));
    const float64x2_t uni = vsubq_f64(vaddq_f64(vqlen, vsubq_f64(e, s)), inter);
    const uint64x2_t positive = vcgtq_f64(inter, zero);
    const float64x2_t ratio = vdivq_f64(inter, uni);
    vst1q_f64(out + i, vreinterpretq_f64_u64(vandq_u64(positive, vreinterpretq_u64_f64(ratio))));
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
    Isa::kNeon, dot_f32, dot_f64, axpy_f32, axpy_f64, sum_f32, sum_f64, tiou_many,
};

}  // namespace tapkit::simd::neon
