#include <atomic>
#include <string>

#include "tapkit/error.hpp"
#include "tapkit/simd.hpp"

namespace tapkit::simd {
namespace {

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table(detect())};
  return slot;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "scalar";
}

bool available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(TAPKIT_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(TAPKIT_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect() {
  if (available(Isa::kAvx2)) return Isa::kAvx2;
  if (available(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

const KernelTable& table(Isa isa) {
  if (!available(isa))
    throw Error(ErrorCode::kConfig, "kernel set \"" + std::string(to_string(isa)) + "\" unavailable");
#if defined(TAPKIT_HAVE_AVX2)
  if (isa == Isa::kAvx2) return avx2::kTable;
#endif
#if defined(TAPKIT_HAVE_NEON)
  if (isa == Isa::kNeon) return neon::kTable;
#endif
  return scalar::kTable;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void select(Isa isa) { active_slot().store(&table(isa), std::memory_order_release); }

Isa parse_isa(std::string_view name) {
  if (name == "auto") return detect();
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  if (name == "neon") return Isa::kNeon;
  throw Error(ErrorCode::kConfig, "unknown kernel set \"" + std::string(name) + "\"");
}

}  // namespace tapkit::simd
