#pragma once

#include <cstddef>

namespace stcausal {

// Low-level numeric kernels with interchangeable scalar and SIMD variants.
// The scalar versions are the reference semantics; SIMD variants are selected
// at runtime when the CPU supports them and are equivalence-tested against
// the reference. Reductions are deterministic within a backend (fixed
// association order), which is what the reproducibility contract needs.
struct KernelOps {
  int backend_id;
  const char* name;

  // out[i] = exp(x[i]); overflow → +inf, underflow → 0, NaN propagates.
  void (*exp_v)(const double* x, double* out, std::size_t n);

  // Pairwise-ordered sum of x[0..n).
  double (*sum)(const double* x, std::size_t n);

  // Σ a[i]·b[i].
  double (*dot)(const double* a, const double* b, std::size_t n);

  // Σ a[i]·b[i]·c[i] (weighted cross-moment accumulation).
  double (*dot3)(const double* a, const double* b, const double* c, std::size_t n);

  // y[i] += a·x[i].
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // Σ pref[i]·exp(expo[i]) without materializing the exponentials.
  double (*sum_exp_scaled)(const double* pref, const double* expo, std::size_t n);

  // Squared distance from each query to its nearest point in (px, py).
  // accumulate=false overwrites out (np == 0 fills +inf); accumulate=true
  // takes the min with the existing contents (union-of-sets updates).
  void (*min_dist2)(const double* qx, const double* qy, std::size_t nq,
                    const double* px, const double* py, std::size_t np,
                    double* out, bool accumulate);

  // out[i] = amp·exp(−scale·sqrt(d2[i])) — the exponential-decay transform
  // applied to squared distances.
  void (*decay_from_dist2)(const double* d2, std::size_t n, double scale,
                           double amp, double* out);
};

enum class SimdBackend { scalar = 0, avx2 = 1 };

// Active backend (best available unless overridden).
const KernelOps& kernels();

bool kernel_backend_available(SimdBackend b);

// Override the active backend, e.g. for equivalence tests or --simd scalar.
// Returns false (and leaves the active backend unchanged) if unavailable.
bool set_kernel_backend(SimdBackend b);

SimdBackend active_kernel_backend();

}  // namespace stcausal
