#include "stcausal/smooth.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "stcausal/kernels.hpp"
#include "stcausal/numerics.hpp"

namespace stcausal {

double bandwidth_rule(int T) {
  if (T < 1) throw std::domain_error("bandwidth_rule: T must be >= 1");
  return 10.0 * std::pow(static_cast<double>(T), -2.0 / 3.0);
}

std::pair<double, double> scott_bandwidth(const PointPattern& pattern) {
  const std::size_t n = pattern.size();
  if (n < 2) {
    throw std::domain_error("scott_bandwidth: need at least 2 points");
  }
  const double sdx = sample_sd(pattern.xs());
  const double sdy = sample_sd(pattern.ys());
  if (!(sdx > 0.0) || !(sdy > 0.0)) {
    throw std::domain_error("scott_bandwidth: zero spread on an axis");
  }
  const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
  return {factor * sdx, factor * sdy};
}

namespace {

// Gaussian mass of [lo, hi] for a kernel centered at c with sd sigma.
inline double axis_mass(double lo, double hi, double c, double sigma) {
  const double inv = 1.0 / sigma;
  return norm_cdf((hi - c) * inv) - norm_cdf((lo - c) * inv);
}

// Σ_s Π_axis mass, anisotropic version shared by the isotropic API and φ0.
double rect_mass_sum(const PointPattern& pattern, double sx, double sy, const Rect& r) {
  double total = 0.0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    total += axis_mass(r.x0, r.x1, pattern.xs()[i], sx) *
             axis_mass(r.y0, r.y1, pattern.ys()[i], sy);
  }
  return total;
}

class GaussianMixtureImpl final : public SurfaceImpl {
 public:
  GaussianMixtureImpl(std::vector<double> xs, std::vector<double> ys, double sx,
                      double sy, double prefactor)
      : xs_(std::move(xs)), ys_(std::move(ys)), sx_(sx), sy_(sy) {
    norm_ = prefactor / (6.283185307179586 * sx_ * sy_);
  }

  double value(double x, double y) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      const double dx = (x - xs_[i]) / sx_;
      const double dy = (y - ys_[i]) / sy_;
      s += std::exp(-0.5 * (dx * dx + dy * dy));
    }
    return norm_ * s;
  }

  void value_batch(const double* qx, const double* qy, std::size_t n,
                   double* out) const override {
    std::fill(out, out + n, 0.0);
    std::vector<double> expo(n), mass(n);
    for (std::size_t s = 0; s < xs_.size(); ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        const double dx = (qx[i] - xs_[s]) / sx_;
        const double dy = (qy[i] - ys_[s]) / sy_;
        expo[i] = -0.5 * (dx * dx + dy * dy);
      }
      kernels().exp_v(expo.data(), mass.data(), n);
      kernels().axpy(1.0, mass.data(), out, n);
    }
    for (std::size_t i = 0; i < n; ++i) out[i] *= norm_;
  }

  const char* kind() const override { return "smoothed-pattern"; }

 private:
  std::vector<double> xs_, ys_;
  double sx_, sy_, norm_;
};

}  // namespace

double smoothed_region_integral(const PointPattern& pattern, const KernelSpec& kernel,
                                const Region& region) {
  if (!(kernel.sigma > 0.0)) {
    throw std::domain_error("smoothed_region_integral: bandwidth must be > 0");
  }
  double total = 0.0;
  for (const Rect& part : region.parts()) {
    total += rect_mass_sum(pattern, kernel.sigma, kernel.sigma, part);
  }
  return total;
}

Surface smoothed_surface(const PointPattern& pattern, const KernelSpec& kernel,
                         double prefactor) {
  if (!(kernel.sigma > 0.0)) {
    throw std::domain_error("smoothed_surface: bandwidth must be > 0");
  }
  if (pattern.empty()) return Surface::constant(0.0);
  return Surface(std::make_shared<GaussianMixtureImpl>(pattern.xs(), pattern.ys(),
                                                       kernel.sigma, kernel.sigma,
                                                       prefactor));
}

Surface scott_baseline_density(const PointPattern& pattern, const Window& window) {
  const auto [sx, sy] = scott_bandwidth(pattern);
  // Exact window mass of the unnormalized mixture, in closed form.
  const double mass = rect_mass_sum(pattern, sx, sy, window.bounds());
  if (!(mass > 0.0)) {
    throw std::domain_error("scott_baseline_density: pattern mass vanishes on window");
  }
  return Surface(std::make_shared<GaussianMixtureImpl>(pattern.xs(), pattern.ys(), sx,
                                                       sy, 1.0 / mass));
}

}  // namespace stcausal
