#include <cmath>
#include <limits>

#include "kernels_internal.hpp"

// Reference kernels: plain loops, pairwise recursion for reductions. These
// define the semantics the SIMD variants must reproduce.

namespace stcausal {
namespace {

constexpr std::size_t kBase = 32;  // pairwise recursion leaf size

void exp_v_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

double sum_rec(const double* x, std::size_t n) {
  if (n <= kBase) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return sum_rec(x, h) + sum_rec(x + h, n - h);
}

double sum_scalar(const double* x, std::size_t n) { return sum_rec(x, n); }

double dot_rec(const double* a, const double* b, std::size_t n) {
  if (n <= kBase) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }
  const std::size_t h = n / 2;
  return dot_rec(a, b, h) + dot_rec(a + h, b + h, n - h);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  return dot_rec(a, b, n);
}

double dot3_rec(const double* a, const double* b, const double* c, std::size_t n) {
  if (n <= kBase) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i] * c[i];
    return s;
  }
  const std::size_t h = n / 2;
  return dot3_rec(a, b, c, h) + dot3_rec(a + h, b + h, c + h, n - h);
}

double dot3_scalar(const double* a, const double* b, const double* c, std::size_t n) {
  return dot3_rec(a, b, c, n);
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double ses_rec(const double* pref, const double* expo, std::size_t n) {
  if (n <= kBase) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += pref[i] * std::exp(expo[i]);
    return s;
  }
  const std::size_t h = n / 2;
  return ses_rec(pref, expo, h) + ses_rec(pref + h, expo + h, n - h);
}

double sum_exp_scaled_scalar(const double* pref, const double* expo, std::size_t n) {
  return ses_rec(pref, expo, n);
}

void min_dist2_scalar(const double* qx, const double* qy, std::size_t nq,
                      const double* px, const double* py, std::size_t np,
                      double* out, bool accumulate) {
  for (std::size_t q = 0; q < nq; ++q) {
    double m = accumulate ? out[q] : std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < np; ++p) {
      const double dx = qx[q] - px[p];
      const double dy = qy[q] - py[p];
      const double d2 = dx * dx + dy * dy;
      if (d2 < m) m = d2;
    }
    out[q] = m;
  }
}

void decay_scalar(const double* d2, std::size_t n, double scale, double amp,
                  double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = amp * std::exp(-scale * std::sqrt(d2[i]));
  }
}

}  // namespace

const KernelOps& scalar_kernel_ops() {
  static const KernelOps ops = {
      static_cast<int>(SimdBackend::scalar),
      "scalar",
      exp_v_scalar,
      sum_scalar,
      dot_scalar,
      dot3_scalar,
      axpy_scalar,
      sum_exp_scaled_scalar,
      min_dist2_scalar,
      decay_scalar,
  };
  return ops;
}

}  // namespace stcausal
