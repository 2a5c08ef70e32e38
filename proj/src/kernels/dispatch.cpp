#include "kernels_internal.hpp"

namespace stcausal {
namespace {

bool avx2_usable() {
#if defined(STC_HAVE_AVX2_TU)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelOps* pick_best() {
#if defined(STC_HAVE_AVX2_TU)
  if (avx2_usable()) return &avx2_kernel_ops();
#endif
  return &scalar_kernel_ops();
}

const KernelOps*& active_slot() {
  static const KernelOps* active = pick_best();
  return active;
}

}  // namespace

const KernelOps& kernels() { return *active_slot(); }

bool kernel_backend_available(SimdBackend b) {
  switch (b) {
    case SimdBackend::scalar:
      return true;
    case SimdBackend::avx2:
      return avx2_usable();
  }
  return false;
}

bool set_kernel_backend(SimdBackend b) {
  if (!kernel_backend_available(b)) return false;
  switch (b) {
    case SimdBackend::scalar:
      active_slot() = &scalar_kernel_ops();
      return true;
    case SimdBackend::avx2:
#if defined(STC_HAVE_AVX2_TU)
      active_slot() = &avx2_kernel_ops();
      return true;
#else
      return false;
#endif
  }
  return false;
}

SimdBackend active_kernel_backend() {
  return static_cast<SimdBackend>(kernels().backend_id);
}

}  // namespace stcausal
