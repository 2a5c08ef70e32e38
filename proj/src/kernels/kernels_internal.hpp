#pragma once

#include "stcausal/kernels.hpp"

namespace stcausal {

const KernelOps& scalar_kernel_ops();

// Defined only when the AVX2 translation unit is part of the build.
const KernelOps& avx2_kernel_ops();

}  // namespace stcausal
