#pragma once

#include <utility>

#include "stcausal/geom.hpp"
#include "stcausal/surfaces.hpp"

namespace stcausal {

// Isotropic bivariate Gaussian smoothing kernel; integrates to 1 over the
// plane, so each smoothed point carries unit mass.
struct KernelSpec {
  double sigma = 0.1;
};

// The simulation-study bandwidth rule 10·T^{−2/3}.
double bandwidth_rule(int T);

// Per-axis Scott rule n^{−1/6}·(sample sd); throws on patterns with fewer
// than 2 points or zero spread on an axis.
std::pair<double, double> scott_bandwidth(const PointPattern& pattern);

// Exact integral over the region of the kernel-smoothed pattern: for every
// point and rectangle, the product of 1-D normal CDF differences. No
// quadrature error enters the estimator through this path.
double smoothed_region_integral(const PointPattern& pattern, const KernelSpec& kernel,
                                const Region& region);

// prefactor·Σ_s K_σ(ω − s) as a surface (for rasters/plots).
Surface smoothed_surface(const PointPattern& pattern, const KernelSpec& kernel,
                         double prefactor = 1.0);

// Scott-smoothed baseline density φ0: per-axis bandwidths, renormalized in
// closed form so the window mass is exactly 1.
Surface scott_baseline_density(const PointPattern& pattern, const Window& window);

}  // namespace stcausal
