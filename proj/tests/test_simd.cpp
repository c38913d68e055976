#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "tapkit/error.hpp"
#include "tapkit/simd.hpp"

using namespace tapkit;

namespace {

template <class Real>
std::vector<Real> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<Real> g(0, 1);
  std::vector<Real> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Every accelerated table against the scalar reference over lengths that
// exercise the vector body and every tail size.
void check_table(const simd::KernelTable& k) {
  const auto& ref = simd::scalar::kTable;
  std::mt19937_64 rng(17);
  for (std::size_t n : {0, 1, 3, 4, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 257}) {
    const auto af = random_vec<float>(n, rng), bf = random_vec<float>(n, rng);
    const auto ad = random_vec<double>(n, rng), bd = random_vec<double>(n, rng);
    double mag_f = 0, mag_d = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mag_f += std::abs(af[i] * bf[i]);
      mag_d += std::abs(ad[i] * bd[i]);
    }
    CHECK(std::abs(k.dot_f32(af.data(), bf.data(), n) - ref.dot_f32(af.data(), bf.data(), n)) <= 1e-5 * (mag_f + 1));
    CHECK(std::abs(k.dot_f64(ad.data(), bd.data(), n) - ref.dot_f64(ad.data(), bd.data(), n)) <= 1e-12 * (mag_d + 1));
    CHECK(std::abs(k.sum_f32(af.data(), n) - ref.sum_f32(af.data(), n)) <= 1e-5 * (n + 1));
    CHECK(std::abs(k.sum_f64(ad.data(), n) - ref.sum_f64(ad.data(), n)) <= 1e-12 * (n + 1));

    // axpy has no reduction, so results must match up to FMA contraction
    auto yf = bf, yf_ref = bf;
    k.axpy_f32(0.37f, af.data(), yf.data(), n);
    ref.axpy_f32(0.37f, af.data(), yf_ref.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(yf[i] == doctest::Approx(yf_ref[i]).epsilon(1e-6));
    auto yd = bd, yd_ref = bd;
    k.axpy_f64(-1.25, ad.data(), yd.data(), n);
    ref.axpy_f64(-1.25, ad.data(), yd_ref.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(yd[i] == doctest::Approx(yd_ref[i]).epsilon(1e-14));

    std::uniform_real_distribution<double> u(0, 10);
    std::vector<double> s(n), e(n), out(n), out_ref(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = u(rng), b = u(rng);
      s[i] = std::min(a, b);
      e[i] = std::max(a, b) + 1e-3;
    }
    if (n > 2) {
      s[1] = 2.0;  // exact match and touching cases
      e[1] = 5.0;
      s[2] = 5.0;
      e[2] = 6.0;
    }
    k.tiou_many(2.0, 5.0, s.data(), e.data(), out.data(), n);
    ref.tiou_many(2.0, 5.0, s.data(), e.data(), out_ref.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == doctest::Approx(out_ref[i]).epsilon(1e-14));
    if (n > 2) {
      CHECK(out[1] == 1.0);
      CHECK(out[2] == 0.0);
    }
  }
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar table is always available") {
    CHECK(simd::available(simd::Isa::kScalar));
    CHECK(simd::table(simd::Isa::kScalar).isa == simd::Isa::kScalar);
  }

  TEST_CASE("accelerated kernels match the scalar reference") {
    for (auto isa : {simd::Isa::kAvx2, simd::Isa::kNeon}) {
      if (!simd::available(isa)) continue;
      INFO("isa " << simd::to_string(isa));
      check_table(simd::table(isa));
    }
  }

  TEST_CASE("select pins the active table") {
    const auto before = simd::active().isa;
    simd::select(simd::Isa::kScalar);
    CHECK(simd::active().isa == simd::Isa::kScalar);
    simd::select(before);
    CHECK(simd::parse_isa("scalar") == simd::Isa::kScalar);
    CHECK_THROWS_AS(simd::parse_isa("sse9"), Error);
    for (auto isa : {simd::Isa::kAvx2, simd::Isa::kNeon})
      if (!simd::available(isa)) CHECK_THROWS_AS(simd::select(isa), Error);
  }
}
