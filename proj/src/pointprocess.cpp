#include "stcausal/pointprocess.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "stcausal/errors.hpp"

namespace stcausal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double checked_bound(double bound) {
  if (!(bound >= 0.0) || !std::isfinite(bound)) {
    throw std::invalid_argument("PoissonProcess: upper bound must be finite and >= 0");
  }
  return bound;
}

}  // namespace

PoissonProcess::PoissonProcess(Surface intensity, const Window& window,
                               const QuadratureGrid& bound_grid)
    : surface_(std::move(intensity)), window_(window), upper_bound_(0.0) {
  const double sup = max_over_grid(*surface_, bound_grid);
  if (sup < 0.0) {
    throw std::domain_error("PoissonProcess: intensity is negative on the window");
  }
  upper_bound_ = 1.05 * sup;
}

PoissonProcess::PoissonProcess(LogLinearIntensity intensity, const Window& window,
                               const QuadratureGrid& bound_grid)
    : loglinear_(std::move(intensity)), window_(window), upper_bound_(0.0) {
  upper_bound_ = 1.05 * std::exp(max_log_over_grid(*loglinear_, bound_grid));
}

PoissonProcess::PoissonProcess(Surface intensity, const Window& window,
                               double upper_bound)
    : surface_(std::move(intensity)), window_(window),
      upper_bound_(checked_bound(upper_bound)) {}

PoissonProcess::PoissonProcess(LogLinearIntensity intensity, const Window& window,
                               double upper_bound)
    : loglinear_(std::move(intensity)), window_(window),
      upper_bound_(checked_bound(upper_bound)) {}

std::optional<double> PoissonProcess::homogeneous_rate() const {
  if (surface_) return surface_->constant_value();
  // A log-linear model with all slopes zero is homogeneous too.
  const LogLinearIntensity& li = *loglinear_;
  double offset = 0.0;
  for (std::size_t k = 0; k < li.n_features(); ++k) {
    if (li.beta()[k] == 0.0) continue;
    const auto c = li.features()[k].constant_value();
    if (!c) return std::nullopt;
    offset += li.beta()[k] * *c;
  }
  return std::exp(offset);
}

double PoissonProcess::intensity(double x, double y) const {
  return surface_ ? (*surface_)(x, y) : loglinear_->value(x, y);
}

double PoissonProcess::log_intensity(double x, double y) const {
  if (loglinear_) return loglinear_->log_value(x, y);
  const double v = (*surface_)(x, y);
  if (v < 0.0) {
    throw std::domain_error("PoissonProcess: negative intensity encountered");
  }
  return v == 0.0 ? -kInf : std::log(v);
}

void PoissonProcess::intensity_batch(const double* xs, const double* ys, std::size_t n,
                                     double* out) const {
  if (surface_) {
    surface_->value_batch(xs, ys, n, out);
  } else {
    loglinear_->value_batch(xs, ys, n, out);
  }
}

double PoissonProcess::intensity_integral(const QuadratureGrid& grid) const {
  if (const auto h = homogeneous_rate()) return *h * window_.area();
  return surface_ ? integrate(*surface_, grid) : integrate(*loglinear_, grid);
}

PointPattern sample_thinning(
    const Window& window, double bound,
    const std::function<void(const double*, const double*, std::size_t, double*)>&
        eval_intensity,
    RngStream& rng, int period) {
  const Rect& b = window.bounds();
  const int n = rng.poisson(bound * window.area());
  if (n <= 0) return PointPattern(period, {}, {});
  std::vector<double> cx(n), cy(n), lam(n), u(n);
  for (int i = 0; i < n; ++i) {
    cx[i] = rng.uniform(b.x0, b.x1);
    cy[i] = rng.uniform(b.y0, b.y1);
  }
  for (int i = 0; i < n; ++i) u[i] = rng.uniform();
  eval_intensity(cx.data(), cy.data(), static_cast<std::size_t>(n), lam.data());
  std::vector<double> keep_x, keep_y;
  for (int i = 0; i < n; ++i) {
    if (lam[i] > bound) {
      std::ostringstream msg;
      msg << "thinning bound breach: intensity " << lam[i] << " above bound " << bound
          << " at (" << cx[i] << ", " << cy[i] << ")";
      throw BoundBreach(msg.str());
    }
    if (u[i] * bound < lam[i]) {
      keep_x.push_back(cx[i]);
      keep_y.push_back(cy[i]);
    }
  }
  return PointPattern(period, std::move(keep_x), std::move(keep_y));
}

PointPattern sample(const PoissonProcess& process, RngStream& rng, int period) {
  const Window& w = process.window();
  if (const auto h = process.homogeneous_rate()) {
    const Rect& b = w.bounds();
    const int n = rng.poisson(*h * w.area());
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = rng.uniform(b.x0, b.x1);
      ys[i] = rng.uniform(b.y0, b.y1);
    }
    return PointPattern(period, std::move(xs), std::move(ys));
  }
  return sample_thinning(
      w, process.upper_bound(),
      [&process](const double* xs, const double* ys, std::size_t n, double* out) {
        process.intensity_batch(xs, ys, n, out);
      },
      rng, period);
}

double log_density_given_integral(const PoissonProcess& process,
                                  const PointPattern& pattern,
                                  double intensity_integral) {
  double s = process.window().area() - intensity_integral;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const double ll = process.log_intensity(pattern.xs()[i], pattern.ys()[i]);
    if (ll == -kInf) return -kInf;  // density-zero signal
    s += ll;
  }
  return s;
}

double log_density(const PoissonProcess& process, const PointPattern& pattern,
                   const QuadratureGrid& grid) {
  return log_density_given_integral(process, pattern, process.intensity_integral(grid));
}

double log_density_ratio(const PoissonProcess& numerator,
                         const PoissonProcess& denominator,
                         const PointPattern& pattern, const QuadratureGrid& grid) {
  const double den = log_density(denominator, pattern, grid);
  if (den == -kInf) {
    std::ostringstream msg;
    msg << "positivity violation: denominator density is zero for the observed "
           "pattern at period "
        << pattern.period();
    throw PositivityViolation(msg.str(), pattern.period());
  }
  const double num = log_density(numerator, pattern, grid);
  return num - den;
}

}  // namespace stcausal
