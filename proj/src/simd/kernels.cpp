// SPDX-License-Identifier: Apache-2.0
#include "genpath/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace genpath::simd {

bool avx2_compiled();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* select_initial() {
  if (const char* env = std::getenv("GENPATH_SIMD"); env != nullptr && std::string(env) == "scalar") {
    return &scalar_kernels();
  }
  return available(Backend::Avx2) ? &avx2_kernels() : &scalar_kernels();
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{select_initial()};
  return table;
}

}  // namespace

bool available(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
      return avx2_compiled() && cpu_has_avx2();
  }
  return false;
}

const KernelTable& kernels() { return *active_table().load(std::memory_order_acquire); }

void set_backend(Backend backend) {
  if (!available(backend)) {
    throw std::runtime_error("SIMD backend '" + std::string(name(backend)) + "' is not available on this CPU");
  }
  active_table().store(backend == Backend::Scalar ? &scalar_kernels() : &avx2_kernels(),
                       std::memory_order_release);
}

std::string_view name(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace genpath::simd
