// Reference kernels. Plain sequential loops; the other variants are tested
// against these.

#include <algorithm>

#include "tapkit/simd.hpp"

namespace tapkit::simd::scalar {
namespace {

template <class Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class Real>
void axpy(Real alpha, const Real* x, Real* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class Real>
Real sum(const Real* x, std::size_t n) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void tiou_many(double qs, double qe, const double* starts, const double* ends, double* out,
               std::size_t n) {
  const double qlen = qe - qs;
  for (std::size_t i = 0; i < n; ++i) {
    const double inter = std::max(0.0, std::min(qe, ends[i]) - std::max(qs, starts[i]));
    const double uni = qlen + (ends[i] - starts[i]) - inter;
    out[i] = inter > 0.0 ? inter / uni : 0.0;
  }
}

}  // namespace

const KernelTable kTable{
    Isa::kScalar,    dot<float>, dot<double>, axpy<float>, axpy<double>,
    sum<float>,      sum<double>, tiou_many,
};

}  // namespace tapkit::simd::scalar
