#include <atomic>
#include <cstdlib>
#include <string>

#include "srosync/simd/kernels.hpp"

namespace srosync::simd {

#if defined(SROSYNC_HAVE_AVX2)
const KernelTable& avx2_kernels_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(SROSYNC_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2_kernels_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* lookup(std::string_view name) {
  if (name == "scalar") return &scalar_kernels();
  if (name == "avx2") return avx2_kernels();
  if (name == "auto") {
    if (const KernelTable* t = avx2_kernels()) return t;
    return &scalar_kernels();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table = [] {
    const char* env = std::getenv("SROSYNC_KERNELS");
    const KernelTable* t = env ? lookup(env) : nullptr;
    return t ? t : lookup("auto");
  }();
  return table;
}

}  // namespace

const KernelTable& active_kernels() { return *current().load(std::memory_order_acquire); }

bool select_kernels(std::string_view name) {
  const KernelTable* t = lookup(name);
  if (!t) return false;
  current().store(t, std::memory_order_release);
  return true;
}

}  // namespace srosync::simd
