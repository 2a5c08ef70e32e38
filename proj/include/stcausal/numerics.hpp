#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stcausal {

// Standard normal CDF Φ.
double norm_cdf(double x);

// Standard normal quantile Φ⁻¹ for p in (0,1); throws std::domain_error
// outside. Accurate to full double precision (Newton-polished).
double norm_quantile(double p);

// log(Σ exp(x_i)) with max subtraction; -inf for an empty span.
double log_sum_exp(std::span<const double> xs);

// log(e^a + e^b), stable.
double logaddexp(double a, double b);

// Pairwise-ordered summation (error grows like log n instead of n).
double pairwise_sum(std::span<const double> xs);

double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

// Linear-interpolation quantile (R type 7). q in [0,1]; throws on empty input.
double quantile(std::vector<double> xs, double q);
double median(std::vector<double> xs);

// Solve A·x = b for symmetric positive-definite A (row-major k×k); b is
// overwritten with the solution. Returns false when a pivot collapses.
bool solve_spd(std::vector<double>& a, std::vector<double>& b, std::size_t k);

// Invert symmetric positive-definite A (row-major k×k) in place; false on
// numerical singularity.
bool invert_spd(std::vector<double>& a, std::size_t k);

}  // namespace stcausal
