#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stcausal/geom.hpp"

namespace stcausal {

// A real-valued field over the window. Implementations must be total and
// finite on the window and safe to evaluate concurrently.
class SurfaceImpl {
 public:
  virtual ~SurfaceImpl() = default;
  virtual double value(double x, double y) const = 0;
  // Batch evaluation; hot implementations override with kernel-backed loops.
  virtual void value_batch(const double* xs, const double* ys, std::size_t n,
                           double* out) const {
    for (std::size_t i = 0; i < n; ++i) out[i] = value(xs[i], ys[i]);
  }
  virtual const char* kind() const = 0;
};

// Value-semantics handle; cheap to copy and share.
class Surface {
 public:
  Surface() = default;  // empty handle; evaluating throws
  explicit Surface(std::shared_ptr<const SurfaceImpl> impl) : impl_(std::move(impl)) {}

  double operator()(double x, double y) const;
  double operator()(Vec2 p) const { return (*this)(p.x, p.y); }
  void value_batch(const double* xs, const double* ys, std::size_t n, double* out) const;
  const char* kind() const;
  bool valid() const { return impl_ != nullptr; }
  // Stable identity of the underlying implementation; lets callers that see
  // the same surface across many periods cache its evaluations once.
  const void* identity() const { return impl_.get(); }
  // Set when the surface is the constant field (enables exact fast paths).
  std::optional<double> constant_value() const;

  static Surface constant(double c);
  static Surface grid(int nx, int ny, const Window& window, std::vector<double> values);
  static Surface sum(std::vector<Surface> terms, std::vector<double> coefficients);
  static Surface product(Surface a, Surface b);
  static Surface scaled(Surface a, double c);
  static Surface gaussian_density(Vec2 center, double sigma);
  static Surface from_function(std::function<double(double, double)> fn,
                               const char* label = "function");

 private:
  std::shared_ptr<const SurfaceImpl> impl_;
};

// amplitude·exp{−scale·distance_to_set(ω, targets)}. Empty targets yield the
// constant-zero surface (the empty-history convention).
Surface decay_surface(const SegmentSet& targets, double scale, double amplitude);
Surface decay_surface(const PointPattern& targets, double scale, double amplitude);
// Decay of the distance to the union of several patterns (e.g. treatments of
// the last four periods); empty union yields the zero surface.
Surface decay_surface_union(const std::vector<const PointPattern*>& targets,
                            double scale, double amplitude);

// λ(ω) = exp{β·X(ω)} with X₀ ≡ 1 (the intercept feature).
class LogLinearIntensity {
 public:
  LogLinearIntensity(std::vector<double> beta, std::vector<Surface> features);

  std::size_t n_features() const { return features_.size(); }
  const std::vector<double>& beta() const { return beta_; }
  const std::vector<Surface>& features() const { return features_; }

  double log_value(double x, double y) const;
  double value(double x, double y) const { return std::exp(log_value(x, y)); }
  void log_value_batch(const double* xs, const double* ys, std::size_t n,
                       double* out) const;
  void value_batch(const double* xs, const double* ys, std::size_t n, double* out) const;

 private:
  std::vector<double> beta_;
  std::vector<Surface> features_;
};

// Midpoint lattice over the window; node (ix, iy) sits at the center of cell
// (ix, iy) and carries the cell's area as weight.
class QuadratureGrid {
 public:
  QuadratureGrid(const Window& window, int nx, int ny);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const Window& window() const { return window_; }
  std::size_t node_count() const { return node_x_.size(); }
  const std::vector<double>& node_x() const { return node_x_; }  // row-major iy·nx+ix
  const std::vector<double>& node_y() const { return node_y_; }
  double cell_dx() const { return dx_; }
  double cell_dy() const { return dy_; }
  double cell_weight() const { return dx_ * dy_; }

 private:
  Window window_;
  int nx_, ny_;
  double dx_, dy_;
  std::vector<double> node_x_, node_y_;
};

// Midpoint-rule integrals. Region overloads weight each node by the exact
// overlap area of its cell with the region, so constant fields integrate
// exactly at any resolution; the whole-window overloads reduce to
// cell_weight·Σ values.
double integrate(const Surface& f, const QuadratureGrid& grid);
double integrate(const Surface& f, const Region& region, const QuadratureGrid& grid);
double integrate(const LogLinearIntensity& f, const QuadratureGrid& grid);
double integrate(const LogLinearIntensity& f, const Region& region,
                 const QuadratureGrid& grid);

// Max of log λ over grid nodes (thinning-bound construction).
double max_log_over_grid(const LogLinearIntensity& f, const QuadratureGrid& grid);
double max_over_grid(const Surface& f, const QuadratureGrid& grid);

}  // namespace stcausal
