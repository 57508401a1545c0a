#include "rfmt/simd/kernels.h"

#include <atomic>
#include <cstdlib>
#include <string>

namespace rfmt::simd {
namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("RFMT_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && avx2_kernels()) return avx2_kernels();
    if (want == "neon" && neon_kernels()) return neon_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  if (const KernelTable* t = neon_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

bool set_backend(Backend b) {
  const KernelTable* t = nullptr;
  switch (b) {
    case Backend::kScalar: t = &scalar_kernels(); break;
    case Backend::kAvx2: t = avx2_kernels(); break;
    case Backend::kNeon: t = neon_kernels(); break;
  }
  if (!t) return false;
  active().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace rfmt::simd
