#include "stcausal/surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stcausal/kernels.hpp"

namespace stcausal {

namespace {

class ConstantSurfaceImpl final : public SurfaceImpl {
 public:
  explicit ConstantSurfaceImpl(double c) : c_(c) {}
  double value(double, double) const override { return c_; }
  void value_batch(const double*, const double*, std::size_t n, double* out) const override {
    std::fill(out, out + n, c_);
  }
  const char* kind() const override { return "constant"; }
  double constant() const { return c_; }

 private:
  double c_;
};

// amplitude·exp{−scale·dist to nearest target point}; targets stored as
// parallel arrays so the distance kernel can stream them.
class DecayPointsImpl final : public SurfaceImpl {
 public:
  DecayPointsImpl(std::vector<double> xs, std::vector<double> ys, double scale,
                  double amp)
      : xs_(std::move(xs)), ys_(std::move(ys)), scale_(scale), amp_(amp) {}

  double value(double x, double y) const override {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      const double dx = x - xs_[i];
      const double dy = y - ys_[i];
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) best = d2;
    }
    return amp_ * std::exp(-scale_ * std::sqrt(best));
  }

  void value_batch(const double* xs, const double* ys, std::size_t n,
                   double* out) const override {
    const KernelOps& k = kernels();
    k.min_dist2(xs, ys, n, xs_.data(), ys_.data(), xs_.size(), out, false);
    k.decay_from_dist2(out, n, scale_, amp_, out);
  }

  const char* kind() const override { return "analytic-decay"; }

 private:
  std::vector<double> xs_, ys_;
  double scale_, amp_;
};

class DecaySegmentsImpl final : public SurfaceImpl {
 public:
  DecaySegmentsImpl(SegmentSet targets, double scale, double amp)
      : targets_(std::move(targets)), scale_(scale), amp_(amp) {}

  double value(double x, double y) const override {
    return amp_ * std::exp(-scale_ * targets_.distance({x, y}));
  }

  void value_batch(const double* xs, const double* ys, std::size_t n,
                   double* out) const override {
    std::vector<double> neg(n);
    targets_.distance_batch(xs, ys, n, neg.data());
    for (std::size_t i = 0; i < n; ++i) neg[i] = -scale_ * neg[i];
    kernels().exp_v(neg.data(), out, n);
    if (amp_ != 1.0) {
      for (std::size_t i = 0; i < n; ++i) out[i] *= amp_;
    }
  }

  const char* kind() const override { return "analytic-decay"; }

 private:
  SegmentSet targets_;
  double scale_, amp_;
};

class GridSurfaceImpl final : public SurfaceImpl {
 public:
  GridSurfaceImpl(int nx, int ny, const Window& window, std::vector<double> values)
      : nx_(nx), ny_(ny), window_(window), values_(std::move(values)) {
    if (nx_ < 2 || ny_ < 2) {
      throw std::invalid_argument("grid surface: needs nx, ny >= 2");
    }
    if (values_.size() != static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_)) {
      throw std::invalid_argument("grid surface: value count != nx*ny");
    }
    const Rect& b = window_.bounds();
    dx_ = b.width() / (nx_ - 1);
    dy_ = b.height() / (ny_ - 1);
  }

  // Bilinear interpolation between corner nodes; queries are clamped to the
  // window so evaluation is total.
  double value(double x, double y) const override {
    const Rect& b = window_.bounds();
    const double fx = std::clamp((x - b.x0) / dx_, 0.0, static_cast<double>(nx_ - 1));
    const double fy = std::clamp((y - b.y0) / dy_, 0.0, static_cast<double>(ny_ - 1));
    const int ix = std::min(static_cast<int>(fx), nx_ - 2);
    const int iy = std::min(static_cast<int>(fy), ny_ - 2);
    const double tx = fx - ix;
    const double ty = fy - iy;
    const double v00 = values_[static_cast<std::size_t>(iy) * nx_ + ix];
    const double v10 = values_[static_cast<std::size_t>(iy) * nx_ + ix + 1];
    const double v01 = values_[static_cast<std::size_t>(iy + 1) * nx_ + ix];
    const double v11 = values_[static_cast<std::size_t>(iy + 1) * nx_ + ix + 1];
    return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 +
           tx * ty * v11;
  }

  const char* kind() const override { return "grid-backed"; }

 private:
  int nx_, ny_;
  Window window_;
  std::vector<double> values_;
  double dx_, dy_;
};

class SumSurfaceImpl final : public SurfaceImpl {
 public:
  SumSurfaceImpl(std::vector<Surface> terms, std::vector<double> coefs)
      : terms_(std::move(terms)), coefs_(std::move(coefs)) {
    if (terms_.size() != coefs_.size() || terms_.empty()) {
      throw std::invalid_argument("sum surface: term/coefficient mismatch");
    }
  }

  double value(double x, double y) const override {
    double s = 0.0;
    for (std::size_t k = 0; k < terms_.size(); ++k) s += coefs_[k] * terms_[k](x, y);
    return s;
  }

  void value_batch(const double* xs, const double* ys, std::size_t n,
                   double* out) const override {
    std::fill(out, out + n, 0.0);
    std::vector<double> scratch(n);
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      terms_[k].value_batch(xs, ys, n, scratch.data());
      kernels().axpy(coefs_[k], scratch.data(), out, n);
    }
  }

  const char* kind() const override { return "composite"; }

 private:
  std::vector<Surface> terms_;
  std::vector<double> coefs_;
};

class ProductSurfaceImpl final : public SurfaceImpl {
 public:
  ProductSurfaceImpl(Surface a, Surface b) : a_(std::move(a)), b_(std::move(b)) {}

  double value(double x, double y) const override { return a_(x, y) * b_(x, y); }

  void value_batch(const double* xs, const double* ys, std::size_t n,
                   double* out) const override {
    std::vector<double> scratch(n);
    a_.value_batch(xs, ys, n, out);
    b_.value_batch(xs, ys, n, scratch.data());
    for (std::size_t i = 0; i < n; ++i) out[i] *= scratch[i];
  }

  const char* kind() const override { return "composite"; }

 private:
  Surface a_, b_;
};

class GaussianDensityImpl final : public SurfaceImpl {
 public:
  GaussianDensityImpl(Vec2 center, double sigma) : center_(center), sigma_(sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian density: sigma must be > 0");
    norm_ = 1.0 / (6.283185307179586 * sigma * sigma);
    half_inv_var_ = 0.5 / (sigma * sigma);
  }

  double value(double x, double y) const override {
    const double dx = x - center_.x;
    const double dy = y - center_.y;
    return norm_ * std::exp(-half_inv_var_ * (dx * dx + dy * dy));
  }

  void value_batch(const double* xs, const double* ys, std::size_t n,
                   double* out) const override {
    const double cx = center_.x, cy = center_.y;
    kernels().min_dist2(xs, ys, n, &cx, &cy, 1, out, false);
    for (std::size_t i = 0; i < n; ++i) out[i] = -half_inv_var_ * out[i];
    kernels().exp_v(out, out, n);
    for (std::size_t i = 0; i < n; ++i) out[i] *= norm_;
  }

  const char* kind() const override { return "analytic-decay"; }

 private:
  Vec2 center_;
  double sigma_, norm_, half_inv_var_;
};

class FunctionSurfaceImpl final : public SurfaceImpl {
 public:
  FunctionSurfaceImpl(std::function<double(double, double)> fn, const char* label)
      : fn_(std::move(fn)), label_(label) {}
  double value(double x, double y) const override { return fn_(x, y); }
  const char* kind() const override { return label_; }

 private:
  std::function<double(double, double)> fn_;
  const char* label_;
};

}  // namespace

double Surface::operator()(double x, double y) const {
  if (!impl_) throw std::logic_error("Surface: evaluating an empty handle");
  return impl_->value(x, y);
}

void Surface::value_batch(const double* xs, const double* ys, std::size_t n,
                          double* out) const {
  if (!impl_) throw std::logic_error("Surface: evaluating an empty handle");
  impl_->value_batch(xs, ys, n, out);
}

const char* Surface::kind() const {
  if (!impl_) throw std::logic_error("Surface: empty handle");
  return impl_->kind();
}

std::optional<double> Surface::constant_value() const {
  if (const auto* c = dynamic_cast<const ConstantSurfaceImpl*>(impl_.get())) {
    return c->constant();
  }
  return std::nullopt;
}

Surface Surface::constant(double c) {
  return Surface(std::make_shared<ConstantSurfaceImpl>(c));
}

Surface Surface::grid(int nx, int ny, const Window& window, std::vector<double> values) {
  return Surface(std::make_shared<GridSurfaceImpl>(nx, ny, window, std::move(values)));
}

Surface Surface::sum(std::vector<Surface> terms, std::vector<double> coefficients) {
  return Surface(std::make_shared<SumSurfaceImpl>(std::move(terms), std::move(coefficients)));
}

Surface Surface::product(Surface a, Surface b) {
  return Surface(std::make_shared<ProductSurfaceImpl>(std::move(a), std::move(b)));
}

Surface Surface::scaled(Surface a, double c) {
  return sum({std::move(a)}, {c});
}

Surface Surface::gaussian_density(Vec2 center, double sigma) {
  return Surface(std::make_shared<GaussianDensityImpl>(center, sigma));
}

Surface Surface::from_function(std::function<double(double, double)> fn,
                               const char* label) {
  return Surface(std::make_shared<FunctionSurfaceImpl>(std::move(fn), label));
}

Surface decay_surface(const SegmentSet& targets, double scale, double amplitude) {
  if (!(scale > 0.0)) throw std::domain_error("decay_surface: scale must be > 0");
  if (targets.empty()) return Surface::constant(0.0);
  return Surface(std::make_shared<DecaySegmentsImpl>(targets, scale, amplitude));
}

Surface decay_surface(const PointPattern& targets, double scale, double amplitude) {
  if (!(scale > 0.0)) throw std::domain_error("decay_surface: scale must be > 0");
  if (targets.empty()) return Surface::constant(0.0);
  return Surface(std::make_shared<DecayPointsImpl>(targets.xs(), targets.ys(), scale,
                                                   amplitude));
}

Surface decay_surface_union(const std::vector<const PointPattern*>& targets,
                            double scale, double amplitude) {
  if (!(scale > 0.0)) throw std::domain_error("decay_surface: scale must be > 0");
  std::vector<double> xs, ys;
  for (const PointPattern* p : targets) {
    if (p == nullptr) continue;
    xs.insert(xs.end(), p->xs().begin(), p->xs().end());
    ys.insert(ys.end(), p->ys().begin(), p->ys().end());
  }
  if (xs.empty()) return Surface::constant(0.0);
  return Surface(std::make_shared<DecayPointsImpl>(std::move(xs), std::move(ys), scale,
                                                   amplitude));
}

LogLinearIntensity::LogLinearIntensity(std::vector<double> beta,
                                       std::vector<Surface> features)
    : beta_(std::move(beta)), features_(std::move(features)) {
  if (beta_.empty() || beta_.size() != features_.size()) {
    throw std::invalid_argument("LogLinearIntensity: coefficient/feature mismatch");
  }
  const auto c0 = features_[0].constant_value();
  if (!c0 || *c0 != 1.0) {
    throw std::invalid_argument(
        "LogLinearIntensity: first feature must be the constant-1 intercept");
  }
}

double LogLinearIntensity::log_value(double x, double y) const {
  double s = beta_[0];
  for (std::size_t k = 1; k < features_.size(); ++k) s += beta_[k] * features_[k](x, y);
  return s;
}

void LogLinearIntensity::log_value_batch(const double* xs, const double* ys,
                                         std::size_t n, double* out) const {
  std::fill(out, out + n, beta_[0]);
  std::vector<double> scratch;
  for (std::size_t k = 1; k < features_.size(); ++k) {
    if (beta_[k] == 0.0) continue;
    if (const auto c = features_[k].constant_value()) {
      const double shift = beta_[k] * *c;
      for (std::size_t i = 0; i < n; ++i) out[i] += shift;
      continue;
    }
    if (scratch.size() < n) scratch.resize(n);
    features_[k].value_batch(xs, ys, n, scratch.data());
    kernels().axpy(beta_[k], scratch.data(), out, n);
  }
}

void LogLinearIntensity::value_batch(const double* xs, const double* ys, std::size_t n,
                                     double* out) const {
  log_value_batch(xs, ys, n, out);
  kernels().exp_v(out, out, n);
}

QuadratureGrid::QuadratureGrid(const Window& window, int nx, int ny)
    : window_(window), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("QuadratureGrid: nx, ny must be >= 1");
  const Rect& b = window_.bounds();
  dx_ = b.width() / nx;
  dy_ = b.height() / ny;
  node_x_.resize(static_cast<std::size_t>(nx) * ny);
  node_y_.resize(node_x_.size());
  for (int iy = 0; iy < ny; ++iy) {
    const double y = b.y0 + (iy + 0.5) * dy_;
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t i = static_cast<std::size_t>(iy) * nx + ix;
      node_x_[i] = b.x0 + (ix + 0.5) * dx_;
      node_y_[i] = y;
    }
  }
}

namespace {

// Per-part clipped node list: coordinates plus cell∩part overlap weights.
struct ClippedNodes {
  std::vector<double> xs, ys, w;
};

void collect_clipped(const Rect& part, const QuadratureGrid& grid, ClippedNodes& out) {
  const Rect& b = grid.window().bounds();
  const double dx = grid.cell_dx(), dy = grid.cell_dy();
  std::vector<std::pair<int, double>> wx, wy;
  for (int ix = 0; ix < grid.nx(); ++ix) {
    const double c0 = b.x0 + ix * dx, c1 = b.x0 + (ix + 1) * dx;
    const double o = std::min(part.x1, c1) - std::max(part.x0, c0);
    if (o > 0.0) wx.emplace_back(ix, o);
  }
  for (int iy = 0; iy < grid.ny(); ++iy) {
    const double c0 = b.y0 + iy * dy, c1 = b.y0 + (iy + 1) * dy;
    const double o = std::min(part.y1, c1) - std::max(part.y0, c0);
    if (o > 0.0) wy.emplace_back(iy, o);
  }
  for (const auto& [iy, oy] : wy) {
    for (const auto& [ix, ox] : wx) {
      const std::size_t node = static_cast<std::size_t>(iy) * grid.nx() + ix;
      out.xs.push_back(grid.node_x()[node]);
      out.ys.push_back(grid.node_y()[node]);
      out.w.push_back(ox * oy);
    }
  }
}

ClippedNodes clipped_nodes(const Region& region, const QuadratureGrid& grid) {
  if (!(region.window() == grid.window())) {
    throw std::domain_error("integrate: region window does not match grid window");
  }
  ClippedNodes nodes;
  for (const Rect& part : region.parts()) collect_clipped(part, grid, nodes);
  return nodes;
}

// Constant log-offset if every feature is constant (then the integral is
// closed-form); nullopt otherwise.
std::optional<double> constant_log_value(const LogLinearIntensity& f) {
  double offset = 0.0;
  for (std::size_t k = 0; k < f.n_features(); ++k) {
    if (f.beta()[k] == 0.0) continue;
    const auto c = f.features()[k].constant_value();
    if (!c) return std::nullopt;
    offset += f.beta()[k] * *c;
  }
  return offset;
}

}  // namespace

double integrate(const Surface& f, const QuadratureGrid& grid) {
  if (const auto c = f.constant_value()) return *c * grid.window().area();
  std::vector<double> vals(grid.node_count());
  f.value_batch(grid.node_x().data(), grid.node_y().data(), vals.size(), vals.data());
  return kernels().sum(vals.data(), vals.size()) * grid.cell_weight();
}

double integrate(const Surface& f, const Region& region, const QuadratureGrid& grid) {
  if (region.is_whole_window()) return integrate(f, grid);
  if (const auto c = f.constant_value()) return *c * region.area();
  ClippedNodes nodes = clipped_nodes(region, grid);
  std::vector<double> vals(nodes.xs.size());
  f.value_batch(nodes.xs.data(), nodes.ys.data(), vals.size(), vals.data());
  return kernels().dot(nodes.w.data(), vals.data(), vals.size());
}

double integrate(const LogLinearIntensity& f, const QuadratureGrid& grid) {
  if (const auto offset = constant_log_value(f)) {
    return std::exp(*offset) * grid.window().area();
  }
  std::vector<double> eta(grid.node_count());
  f.log_value_batch(grid.node_x().data(), grid.node_y().data(), eta.size(), eta.data());
  std::vector<double> vals(eta.size());
  kernels().exp_v(eta.data(), vals.data(), eta.size());
  return kernels().sum(vals.data(), vals.size()) * grid.cell_weight();
}

double integrate(const LogLinearIntensity& f, const Region& region,
                 const QuadratureGrid& grid) {
  if (region.is_whole_window()) return integrate(f, grid);
  if (const auto offset = constant_log_value(f)) {
    return std::exp(*offset) * region.area();
  }
  ClippedNodes nodes = clipped_nodes(region, grid);
  std::vector<double> eta(nodes.xs.size());
  f.log_value_batch(nodes.xs.data(), nodes.ys.data(), eta.size(), eta.data());
  return kernels().sum_exp_scaled(nodes.w.data(), eta.data(), eta.size());
}

double max_log_over_grid(const LogLinearIntensity& f, const QuadratureGrid& grid) {
  std::vector<double> eta(grid.node_count());
  f.log_value_batch(grid.node_x().data(), grid.node_y().data(), eta.size(), eta.data());
  return *std::max_element(eta.begin(), eta.end());
}

double max_over_grid(const Surface& f, const QuadratureGrid& grid) {
  if (const auto c = f.constant_value()) return *c;
  std::vector<double> vals(grid.node_count());
  f.value_batch(grid.node_x().data(), grid.node_y().data(), vals.size(), vals.data());
  return *std::max_element(vals.begin(), vals.end());
}

}  // namespace stcausal
