#include "stcausal/interventions.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace stcausal {

namespace {

std::string format_rate(double h) {
  std::ostringstream s;
  s << "h=" << h;
  return s.str();
}

// φ0 rescaled by separate factors inside and outside a region.
class SplitScaleImpl final : public SurfaceImpl {
 public:
  SplitScaleImpl(Surface base, Region region, double scale_in, double scale_out)
      : base_(std::move(base)), region_(std::move(region)), scale_in_(scale_in),
        scale_out_(scale_out) {}

  double value(double x, double y) const override {
    const double b = base_(x, y);
    return b * (region_.contains({x, y}) ? scale_in_ : scale_out_);
  }

  void value_batch(const double* xs, const double* ys, std::size_t n,
                   double* out) const override {
    base_.value_batch(xs, ys, n, out);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] *= region_.contains({xs[i], ys[i]}) ? scale_in_ : scale_out_;
    }
  }

  const char* kind() const override { return "composite"; }

 private:
  Surface base_;
  Region region_;
  double scale_in_, scale_out_;
};

}  // namespace

Intervention::Intervention(std::string label, PoissonProcess process,
                           double expected_count)
    : label_(std::move(label)), process_(std::move(process)),
      expected_count_(expected_count) {
  if (!(expected_count_ >= 0.0) || !std::isfinite(expected_count_)) {
    throw std::domain_error("Intervention '" + label_ +
                            "': expected count must be finite and >= 0");
  }
}

double Intervention::log_density(const PointPattern& pattern) const {
  return log_density_given_integral(process_, pattern, expected_count_);
}

Surface normalize_density(const Surface& s, const QuadratureGrid& grid) {
  const double mass = integrate(s, grid);
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw std::domain_error("normalize_density: surface mass must be positive");
  }
  return Surface::scaled(s, 1.0 / mass);
}

Intervention homogeneous_intervention(double h, const Window& window) {
  if (!(h >= 0.0)) {
    throw std::domain_error("homogeneous intervention: intensity must be >= 0");
  }
  PoissonProcess process(Surface::constant(h), window, h);
  return Intervention(format_rate(h), std::move(process), h * window.area());
}

Intervention scaled_baseline(double c, const Surface& baseline_density,
                             const Window& window, const QuadratureGrid& grid) {
  if (!(c >= 0.0)) throw std::domain_error("scaled_baseline: c must be >= 0");
  const double mass = integrate(baseline_density, grid);
  if (std::abs(mass - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "scaled_baseline: baseline density integrates to " << mass
        << " on the window, expected 1 (±1e-6)";
    throw std::domain_error(msg.str());
  }
  const double bound = 1.05 * c * max_over_grid(baseline_density, grid);
  PoissonProcess process(Surface::scaled(baseline_density, c), window, bound);
  std::ostringstream label;
  label << "scaled(c=" << c << ")";
  return Intervention(label.str(), std::move(process), c);
}

Intervention focal_intervention(double c, const Surface& baseline_density,
                                Vec2 focal_point, double alpha, const Window& window,
                                const QuadratureGrid& grid) {
  if (!(c > 0.0)) throw std::domain_error("focal intervention: c must be > 0");
  if (!(alpha >= 0.0)) throw std::domain_error("focal intervention: alpha must be >= 0");
  if (alpha == 0.0) return scaled_baseline(c, baseline_density, window, grid);

  const double sigma = 1.0 / std::sqrt(alpha);
  const Surface d_alpha = Surface::gaussian_density(focal_point, sigma);
  const Surface product = Surface::product(baseline_density, d_alpha);
  const double mass = integrate(product, grid);
  if (!(mass > 0.0)) {
    throw std::domain_error(
        "focal intervention: baseline mass vanishes around the focal point");
  }
  const double scale = c / mass;
  // Bound via the product of individual suprema: always dominates the true
  // supremum, and survives focal peaks that fall between grid nodes.
  const double peak = alpha / 6.283185307179586;  // Gaussian density maximum
  const double bound = 1.05 * scale * max_over_grid(baseline_density, grid) * peak;
  PoissonProcess process(Surface::scaled(product, scale), window, bound);
  std::ostringstream label;
  label << "focal(c=" << c << ",alpha=" << alpha << ")";
  return Intervention(label.str(), std::move(process), c);
}

Intervention local_intervention(const Region& region, double c_inside,
                                double c_outside, const Surface& baseline_density,
                                const QuadratureGrid& grid) {
  if (!(c_inside >= 0.0) || !(c_outside >= 0.0)) {
    throw std::domain_error("local intervention: counts must be >= 0");
  }
  const Window& window = region.window();
  const double mass_in = integrate(baseline_density, region, grid);
  const double mass_total = integrate(baseline_density, grid);
  const double mass_out = mass_total - mass_in;
  if (c_inside > 0.0 && !(mass_in > 0.0)) {
    throw std::domain_error("local intervention: zero baseline mass inside the region");
  }
  if (c_outside > 0.0 && !(mass_out > 0.0)) {
    throw std::domain_error("local intervention: zero baseline mass outside the region");
  }
  const double scale_in = c_inside > 0.0 ? c_inside / mass_in : 0.0;
  const double scale_out = c_outside > 0.0 ? c_outside / mass_out : 0.0;
  Surface intensity(std::make_shared<SplitScaleImpl>(baseline_density, region, scale_in,
                                                     scale_out));
  const double bound =
      1.05 * max_over_grid(baseline_density, grid) * std::max(scale_in, scale_out);
  PoissonProcess process(std::move(intensity), window, bound);
  std::ostringstream label;
  label << "local(" << region.label() << ",in=" << c_inside << ",out=" << c_outside
        << ")";
  return Intervention(label.str(), std::move(process), c_inside + c_outside);
}

InterventionSequence::InterventionSequence(std::vector<Intervention> interventions)
    : interventions_(std::move(interventions)) {
  if (interventions_.empty()) {
    throw std::invalid_argument("InterventionSequence: needs at least one period");
  }
}

InterventionSequence InterventionSequence::iid(const Intervention& h, int M) {
  if (M < 1) throw std::invalid_argument("InterventionSequence: M must be >= 1");
  return InterventionSequence(std::vector<Intervention>(M, h));
}

InterventionSequence InterventionSequence::lagged(const Intervention& h0,
                                                  const Intervention& h1, int M) {
  if (M < 1) throw std::invalid_argument("InterventionSequence: M must be >= 1");
  std::vector<Intervention> seq(M, h0);
  seq.back() = h1;  // earliest period of the window carries the changed intensity
  return InterventionSequence(std::move(seq));
}

double sequence_log_density(const InterventionSequence& seq,
                            const std::vector<const PointPattern*>& patterns) {
  if (static_cast<int>(patterns.size()) != seq.M()) {
    throw std::invalid_argument("sequence_log_density: pattern count != M");
  }
  double s = 0.0;
  for (int j = 0; j < seq.M(); ++j) {
    s += seq.at(j).log_density(*patterns[j]);
  }
  return s;
}

}  // namespace stcausal
