#include "stcausal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stcausal {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

namespace {

double norm_pdf(double x) {
  return 0.39894228040143267794 * std::exp(-0.5 * x * x);
}

}  // namespace

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("norm_quantile: p must lie strictly inside (0,1)");
  }
  // Rough start: central region linear, tails via the sqrt(-2 log p) asymptote.
  double x;
  const double pl = std::min(p, 1.0 - p);
  if (pl < 0.02425) {
    const double t = std::sqrt(-2.0 * std::log(pl));
    x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    if (p < 0.5) x = -x;
  } else {
    x = (p - 0.5) * 2.50662827463;  // slope of Φ⁻¹ at 0 is sqrt(2π)
  }
  // Newton polish; Φ is smooth and monotone so this converges quadratically.
  for (int iter = 0; iter < 60; ++iter) {
    const double f = norm_cdf(x) - p;
    const double d = norm_pdf(x);
    if (d <= 0.0) break;
    const double step = f / d;
    x -= step;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(x))) break;
  }
  return x;
}

double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  if (std::isinf(m)) return m;  // +inf dominates
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

namespace {

double pairwise_rec(const double* x, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_rec(x, h) + pairwise_rec(x + h, n - h);
}

}  // namespace

double pairwise_sum(std::span<const double> xs) {
  return pairwise_rec(xs.data(), xs.size());
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::domain_error("mean: empty input");
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::domain_error("sample_sd: need at least 2 values");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::domain_error("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("quantile: q outside [0,1]");
  std::sort(xs.begin(), xs.end());
  const double idx = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

namespace {

// In-place Cholesky A = L·Lᵀ on the lower triangle; false if not SPD.
bool cholesky(std::vector<double>& a, std::size_t k) {
  for (std::size_t j = 0; j < k; ++j) {
    double d = a[j * k + j];
    for (std::size_t m = 0; m < j; ++m) d -= a[j * k + m] * a[j * k + m];
    if (d <= 0.0 || !std::isfinite(d)) return false;
    const double lj = std::sqrt(d);
    a[j * k + j] = lj;
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = a[i * k + j];
      for (std::size_t m = 0; m < j; ++m) s -= a[i * k + m] * a[j * k + m];
      a[i * k + j] = s / lj;
    }
  }
  return true;
}

void chol_solve(const std::vector<double>& l, std::vector<double>& b, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {  // forward: L·y = b
    double s = b[i];
    for (std::size_t m = 0; m < i; ++m) s -= l[i * k + m] * b[m];
    b[i] = s / l[i * k + i];
  }
  for (std::size_t ii = k; ii-- > 0;) {  // backward: Lᵀ·x = y
    double s = b[ii];
    for (std::size_t m = ii + 1; m < k; ++m) s -= l[m * k + ii] * b[m];
    b[ii] = s / l[ii * k + ii];
  }
}

}  // namespace

bool solve_spd(std::vector<double>& a, std::vector<double>& b, std::size_t k) {
  if (a.size() != k * k || b.size() != k) {
    throw std::invalid_argument("solve_spd: dimension mismatch");
  }
  if (!cholesky(a, k)) return false;
  chol_solve(a, b, k);
  return true;
}

bool invert_spd(std::vector<double>& a, std::size_t k) {
  if (a.size() != k * k) throw std::invalid_argument("invert_spd: dimension mismatch");
  std::vector<double> l = a;
  if (!cholesky(l, k)) return false;
  std::vector<double> col(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    chol_solve(l, col, k);
    for (std::size_t i = 0; i < k; ++i) a[i * k + j] = col[i];
  }
  // Symmetrize against round-off.
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double v = 0.5 * (a[i * k + j] + a[j * k + i]);
      a[i * k + j] = v;
      a[j * k + i] = v;
    }
  }
  return true;
}

}  // namespace stcausal
