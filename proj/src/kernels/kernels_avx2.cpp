#include <immintrin.h>

#include <cmath>
#include <limits>

#include "kernels_internal.hpp"

// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; dispatch.cpp checks cpuid before handing out these
// function pointers.

namespace stcausal {
namespace {

// Vectorized double-precision exp, Cephes-style: split x = k·ln2 + r with
// |r| ≤ ln2/2, evaluate exp(r) by the rational approximation
// exp(r) = 1 + 2·r·P(r²)/(Q(r²) − r·P(r²)), then scale by 2^k via exponent
// bit assembly. Accurate to ~2 ulp across the finite range.
inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

  __m256d k = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  // Clamp k so the exponent assembly below stays in range even for inputs
  // that the final blend will overwrite (overflow/underflow/NaN lanes).
  k = _mm256_max_pd(_mm256_set1_pd(-1022.0), _mm256_min_pd(_mm256_set1_pd(1023.0), k));

  __m256d r = _mm256_fnmadd_pd(k, ln2_hi, x);
  r = _mm256_fnmadd_pd(k, ln2_lo, r);
  const __m256d r2 = _mm256_mul_pd(r, r);

  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, r);

  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.00000000000000000005e0));

  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // 2^k: bias the integer exponent and slide it into the exponent field.
  const __m128i k32 = _mm256_cvtpd_epi32(k);
  const __m256i k64 = _mm256_cvtepi32_epi64(k32);
  const __m256i biased = _mm256_add_epi64(k64, _mm256_set1_epi64x(1023));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
  e = _mm256_mul_pd(e, scale);

  // Saturate the extremes the range reduction cannot represent.
  const __m256d hi = _mm256_set1_pd(709.782712893383996843);
  const __m256d lo = _mm256_set1_pd(-708.396418532264078749);
  e = _mm256_blendv_pd(e, _mm256_set1_pd(std::numeric_limits<double>::infinity()),
                       _mm256_cmp_pd(x, hi, _CMP_GT_OQ));
  e = _mm256_blendv_pd(e, _mm256_setzero_pd(), _mm256_cmp_pd(x, lo, _CMP_LT_OQ));
  e = _mm256_blendv_pd(e, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  return e;
}

inline double hsum4(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void exp_v_avx2(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

constexpr std::size_t kLeaf = 256;  // pairwise recursion leaf, in elements

double sum_leaf(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double s = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_rec(const double* x, std::size_t n) {
  if (n <= kLeaf) return sum_leaf(x, n);
  const std::size_t h = (n / 2) & ~std::size_t(7);
  return sum_rec(x, h) + sum_rec(x + h, n - h);
}

double sum_avx2(const double* x, std::size_t n) { return sum_rec(x, n); }

double dot_leaf(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double s = hsum4(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot_rec(const double* a, const double* b, std::size_t n) {
  if (n <= kLeaf) return dot_leaf(a, b, n);
  const std::size_t h = (n / 2) & ~std::size_t(7);
  return dot_rec(a, b, h) + dot_rec(a + h, b + h, n - h);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  return dot_rec(a, b, n);
}

double dot3_leaf(const double* a, const double* b, const double* c, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c + i), acc);
  }
  double s = hsum4(acc);
  for (; i < n; ++i) s += a[i] * b[i] * c[i];
  return s;
}

double dot3_rec(const double* a, const double* b, const double* c, std::size_t n) {
  if (n <= kLeaf) return dot3_leaf(a, b, c, n);
  const std::size_t h = (n / 2) & ~std::size_t(7);
  return dot3_rec(a, b, c, h) + dot3_rec(a + h, b + h, c + h, n - h);
}

double dot3_avx2(const double* a, const double* b, const double* c, std::size_t n) {
  return dot3_rec(a, b, c, n);
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double ses_leaf(const double* pref, const double* expo, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(pref + i), exp4(_mm256_loadu_pd(expo + i)),
                          acc);
  }
  double s = hsum4(acc);
  for (; i < n; ++i) s += pref[i] * std::exp(expo[i]);
  return s;
}

double ses_rec(const double* pref, const double* expo, std::size_t n) {
  if (n <= kLeaf) return ses_leaf(pref, expo, n);
  const std::size_t h = (n / 2) & ~std::size_t(7);
  return ses_rec(pref, expo, h) + ses_rec(pref + h, expo + h, n - h);
}

double sum_exp_scaled_avx2(const double* pref, const double* expo, std::size_t n) {
  return ses_rec(pref, expo, n);
}

void min_dist2_avx2(const double* qx, const double* qy, std::size_t nq,
                    const double* px, const double* py, std::size_t np,
                    double* out, bool accumulate) {
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  std::size_t q = 0;
  for (; q + 4 <= nq; q += 4) {
    const __m256d vqx = _mm256_loadu_pd(qx + q);
    const __m256d vqy = _mm256_loadu_pd(qy + q);
    __m256d m = accumulate ? _mm256_loadu_pd(out + q) : inf;
    for (std::size_t p = 0; p < np; ++p) {
      const __m256d dx = _mm256_sub_pd(vqx, _mm256_set1_pd(px[p]));
      const __m256d dy = _mm256_sub_pd(vqy, _mm256_set1_pd(py[p]));
      // mul+add (not FMA) to match the scalar reference bit for bit; min is
      // exact, so the whole kernel is then bitwise-identical across backends.
      const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
      m = _mm256_min_pd(m, d2);
    }
    _mm256_storeu_pd(out + q, m);
  }
  for (; q < nq; ++q) {
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

void decay_avx2(const double* d2, std::size_t n, double scale, double amp,
                double* out) {
  const __m256d vns = _mm256_set1_pd(-scale);
  const __m256d vamp = _mm256_set1_pd(amp);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sqrt_pd(_mm256_loadu_pd(d2 + i));
    const __m256d e = exp4(_mm256_mul_pd(vns, d));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vamp, e));
  }
  for (; i < n; ++i) out[i] = amp * std::exp(-scale * std::sqrt(d2[i]));
}

}  // namespace

const KernelOps& avx2_kernel_ops() {
  static const KernelOps ops = {
      static_cast<int>(SimdBackend::avx2),
      "avx2",
      exp_v_avx2,
      sum_avx2,
      dot_avx2,
      dot3_avx2,
      axpy_avx2,
      sum_exp_scaled_avx2,
      min_dist2_avx2,
      decay_avx2,
  };
  return ops;
}

}  // namespace stcausal
