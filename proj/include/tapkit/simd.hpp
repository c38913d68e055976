#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the engine (dot/axpy/sum over
// contiguous rows) and by the interval code (one-to-many tIoU). Each kernel
// has a scalar reference and, where the target supports it, an AVX2 or NEON
// variant. The variant is picked once at startup from CPU features and can
// be pinned with select().

namespace tapkit::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy_f32)(float alpha, const float* x, float* y, std::size_t n);
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
  float (*sum_f32)(const float* x, std::size_t n);
  double (*sum_f64)(const double* x, std::size_t n);
  // out[i] = tiou([qs, qe), [starts[i], ends[i]))
  void (*tiou_many)(double qs, double qe, const double* starts, const double* ends,
                    double* out, std::size_t n);
};

namespace scalar {
extern const KernelTable kTable;
}
#if defined(TAPKIT_HAVE_AVX2)
namespace avx2 {
extern const KernelTable kTable;
}
#endif
#if defined(TAPKIT_HAVE_NEON)
namespace neon {
extern const KernelTable kTable;
}
#endif

/// Best ISA compiled in and supported by this CPU.
Isa detect();
bool available(Isa isa);
const KernelTable& table(Isa isa);

/// The process-wide table used by the engine.
const KernelTable& active();
/// Pins the active table; throws kConfig if `isa` is unavailable.
void select(Isa isa);
Isa parse_isa(std::string_view name);

// Typed front-ends over the active table.
inline float dot(const float* a, const float* b, std::size_t n) { return active().dot_f32(a, b, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot_f64(a, b, n); }
inline void axpy(float alpha, const float* x, float* y, std::size_t n) { active().axpy_f32(alpha, x, y, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy_f64(alpha, x, y, n); }
inline float sum(const float* x, std::size_t n) { return active().sum_f32(x, n); }
inline double sum(const double* x, std::size_t n) { return active().sum_f64(x, n); }

}  // namespace tapkit::simd
