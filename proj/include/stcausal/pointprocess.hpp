#pragma once

#include <functional>
#include <optional>

#include "stcausal/geom.hpp"
#include "stcausal/rng.hpp"
#include "stcausal/surfaces.hpp"

namespace stcausal {

// A planar Poisson process on the window, carrying the intensity (either a
// plain surface or a log-linear model) and the upper bound used by the
// thinning sampler.
class PoissonProcess {
 public:
  // Bound taken as 1.05 × the supremum of the intensity over the grid nodes.
  PoissonProcess(Surface intensity, const Window& window, const QuadratureGrid& bound_grid);
  PoissonProcess(LogLinearIntensity intensity, const Window& window,
                 const QuadratureGrid& bound_grid);
  // Caller-supplied bound; must dominate the intensity everywhere (a breach
  // during sampling raises BoundBreach, never a silent clamp).
  PoissonProcess(Surface intensity, const Window& window, double upper_bound);
  PoissonProcess(LogLinearIntensity intensity, const Window& window, double upper_bound);

  const Window& window() const { return window_; }
  double upper_bound() const { return upper_bound_; }

  // Constant intensity value when the process is homogeneous.
  std::optional<double> homogeneous_rate() const;

  double intensity(double x, double y) const;
  // log λ; −inf where the intensity vanishes.
  double log_intensity(double x, double y) const;
  void intensity_batch(const double* xs, const double* ys, std::size_t n, double* out) const;

  // ∫_Ω λ via the given grid (closed form for homogeneous processes).
  double intensity_integral(const QuadratureGrid& grid) const;

  const std::optional<LogLinearIntensity>& loglinear() const { return loglinear_; }
  const std::optional<Surface>& surface() const { return surface_; }

 private:
  std::optional<Surface> surface_;
  std::optional<LogLinearIntensity> loglinear_;
  Window window_;
  double upper_bound_;
};

// Draw a pattern. Homogeneous processes use the direct Poisson-count + uniform
// placement route; inhomogeneous ones use thinning against the upper bound.
// The stream is consumed in a fixed order (count, coordinates, acceptance
// uniforms) so replay is exact.
PointPattern sample(const PoissonProcess& process, RngStream& rng, int period = 0);

// Low-level thinning used by the simulation fast paths: candidates from the
// homogeneous(bound) process, retention probability eval(...)/bound.
PointPattern sample_thinning(
    const Window& window, double bound,
    const std::function<void(const double*, const double*, std::size_t, double*)>&
        eval_intensity,
    RngStream& rng, int period);

// log density of the pattern w.r.t. the unit-rate Poisson process on the
// window: (area − ∫λ) + Σ log λ(s). Returns −inf when the intensity vanishes
// at some pattern point (the density-zero signal; callers in estimator
// numerators treat it as weight 0, denominators as a positivity violation).
double log_density(const PoissonProcess& process, const PointPattern& pattern,
                   const QuadratureGrid& grid);

// Same, with ∫λ supplied by the caller (hot loops precompute it).
double log_density_given_integral(const PoissonProcess& process,
                                  const PointPattern& pattern,
                                  double intensity_integral);

// log f_num(pattern) − log f_den(pattern); the dominating-measure constant
// cancels. Throws PositivityViolation when the denominator density is zero.
double log_density_ratio(const PoissonProcess& numerator,
                         const PoissonProcess& denominator,
                         const PointPattern& pattern, const QuadratureGrid& grid);

}  // namespace stcausal
