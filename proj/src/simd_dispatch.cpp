#include <atomic>
#include <cstdlib>
#include <string>

#include "kiri/errors.hpp"
#include "kiri/simd.hpp"

namespace kiri::simd {

#ifndef KIRI_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(KIRI_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

const KernelTable* initial_table() {
  const char* env = std::getenv("KIRI_SIMD");
  const std::string wanted = env ? env : "";
  if (wanted == "scalar") return &scalar_kernels();
  if (cpu_has_avx2() && avx2_kernels() != nullptr) return avx2_kernels();
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

Backend active_backend() { return kernels().backend; }

void set_backend(Backend backend) {
  if (backend == Backend::Scalar) {
    active().store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  if (!cpu_has_avx2() || avx2_kernels() == nullptr) throw ConfigError("AVX2 kernels are not available on this host");
  active().store(avx2_kernels(), std::memory_order_release);
}

std::string_view backend_name(Backend backend) { return backend == Backend::Avx2 ? "avx2" : "scalar"; }

}  // namespace kiri::simd
