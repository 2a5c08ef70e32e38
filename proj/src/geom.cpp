#include "stcausal/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stcausal {

Window::Window(Rect bounds) : bounds_(bounds) {
  if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0)) {
    throw std::invalid_argument("Window: bounds must have positive width and height");
  }
}

PointPattern::PointPattern(int period, std::vector<double> xs, std::vector<double> ys)
    : period_(period), xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.size() != ys_.size()) {
    throw std::invalid_argument("PointPattern: coordinate arrays differ in length");
  }
}

PointPattern::PointPattern(int period, const std::vector<Vec2>& points)
    : period_(period) {
  xs_.reserve(points.size());
  ys_.reserve(points.size());
  for (const Vec2& p : points) {
    xs_.push_back(p.x);
    ys_.push_back(p.y);
  }
}

void PointPattern::validate_inside(const Window& w) const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!w.contains(at(i))) {
      std::ostringstream msg;
      msg << "PointPattern: point (" << xs_[i] << ", " << ys_[i] << ") at period "
          << period_ << " lies outside the window";
      throw std::domain_error(msg.str());
    }
  }
}

namespace {

bool rects_overlap_interior(const Rect& a, const Rect& b) {
  return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

// a \ b as up to four disjoint rectangles appended to out.
void rect_subtract(const Rect& a, const Rect& b, std::vector<Rect>& out) {
  if (!rects_overlap_interior(a, b)) {
    out.push_back(a);
    return;
  }
  const double ix0 = std::max(a.x0, b.x0);
  const double ix1 = std::min(a.x1, b.x1);
  if (a.x0 < ix0) out.push_back({a.x0, a.y0, ix0, a.y1});
  if (ix1 < a.x1) out.push_back({ix1, a.y0, a.x1, a.y1});
  if (a.y0 < std::max(a.y0, b.y0)) out.push_back({ix0, a.y0, ix1, std::max(a.y0, b.y0)});
  if (std::min(a.y1, b.y1) < a.y1) out.push_back({ix0, std::min(a.y1, b.y1), ix1, a.y1});
}

// Half-open membership with closure on the window's max edges.
bool part_contains(const Rect& r, Vec2 p, const Rect& wb) {
  if (p.x < r.x0 || p.y < r.y0) return false;
  const bool x_ok = p.x < r.x1 || (r.x1 == wb.x1 && p.x == r.x1);
  const bool y_ok = p.y < r.y1 || (r.y1 == wb.y1 && p.y == r.y1);
  return x_ok && y_ok;
}

}  // namespace

Region::Region(std::string label, const std::vector<Rect>& parts, const Window& window)
    : label_(std::move(label)), window_(window) {
  if (parts.empty()) {
    throw std::domain_error("Region '" + label_ + "': needs at least one rectangle");
  }
  const Rect& wb = window_.bounds();
  for (const Rect& part : parts) {
    if (!(part.width() > 0.0) || !(part.height() > 0.0)) {
      throw std::domain_error("Region '" + label_ + "': degenerate rectangle part");
    }
    if (part.x0 < wb.x0 || part.y0 < wb.y0 || part.x1 > wb.x1 || part.y1 > wb.y1) {
      throw std::domain_error("Region '" + label_ + "': part extends outside the window");
    }
    // Normalize: keep only the slice of the new part not already covered.
    std::vector<Rect> fragments{part};
    for (const Rect& existing : parts_) {
      std::vector<Rect> next;
      for (const Rect& frag : fragments) rect_subtract(frag, existing, next);
      fragments = std::move(next);
    }
    for (const Rect& frag : fragments) {
      if (frag.area() > 0.0) parts_.push_back(frag);
    }
  }
  if (parts_.empty()) {
    throw std::domain_error("Region '" + label_ + "': normalized to empty");
  }
  whole_ = parts_.size() == 1 && parts_.front() == wb;
}

Region Region::whole_window(const Window& w, std::string label) {
  return Region(std::move(label), {w.bounds()}, w);
}

bool Region::contains(Vec2 p) const {
  for (const Rect& part : parts_) {
    if (part_contains(part, p, window_.bounds())) return true;
  }
  return false;
}

double Region::area() const {
  double a = 0.0;
  for (const Rect& part : parts_) a += part.area();
  return a;
}

bool same_geometry(const Region& a, const Region& b) {
  return a.window() == b.window() && a.parts() == b.parts();
}

int count_in_region(const PointPattern& pattern, const Region& region) {
  int n = 0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (region.contains(pattern.at(i))) ++n;
  }
  return n;
}

double point_segment_distance(Vec2 p, const Segment& s) {
  const double vx = s.b.x - s.a.x;
  const double vy = s.b.y - s.a.y;
  const double wx = p.x - s.a.x;
  const double wy = p.y - s.a.y;
  const double vv = vx * vx + vy * vy;
  const double t = vv > 0.0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
  const double dx = wx - t * vx;
  const double dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

double point_arc_distance(Vec2 p, const Arc& a) {
  const double dx = p.x - a.center.x;
  const double dy = p.y - a.center.y;
  const double rho = std::sqrt(dx * dx + dy * dy);
  const double span = a.angle1 - a.angle0;
  double rel = std::atan2(dy, dx) - a.angle0;
  const double two_pi = 6.283185307179586476925;
  rel -= two_pi * std::floor(rel / two_pi);
  if (rel <= span) return std::abs(rho - a.radius);
  const Vec2 e0{a.center.x + a.radius * std::cos(a.angle0),
                a.center.y + a.radius * std::sin(a.angle0)};
  const Vec2 e1{a.center.x + a.radius * std::cos(a.angle1),
                a.center.y + a.radius * std::sin(a.angle1)};
  const double d0 = std::hypot(p.x - e0.x, p.y - e0.y);
  const double d1 = std::hypot(p.x - e1.x, p.y - e1.y);
  return std::min(d0, d1);
}

void SegmentSet::add_segment(Vec2 a, Vec2 b) { segments_.push_back({a, b}); }

void SegmentSet::add_arc(Vec2 center, double radius, double angle0, double angle1) {
  if (!(radius > 0.0)) throw std::invalid_argument("SegmentSet: arc radius must be > 0");
  if (!(angle1 > angle0) || angle1 - angle0 > 6.283185307179587) {
    throw std::invalid_argument("SegmentSet: arc angles need angle0 < angle1 ≤ angle0 + 2π");
  }
  arcs_.push_back({center, radius, angle0, angle1});
}

double SegmentSet::distance(Vec2 p) const {
  if (empty()) throw std::domain_error("SegmentSet: distance to an empty set");
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& s : segments_) best = std::min(best, point_segment_distance(p, s));
  for (const Arc& a : arcs_) best = std::min(best, point_arc_distance(p, a));
  return best;
}

void SegmentSet::distance_batch(const double* xs, const double* ys, std::size_t n,
                                double* out) const {
  if (empty()) throw std::domain_error("SegmentSet: distance to an empty set");
  for (std::size_t i = 0; i < n; ++i) out[i] = distance({xs[i], ys[i]});
}

void SegmentSet::validate_inside(const Window& w) const {
  for (const Segment& s : segments_) {
    if (!w.contains(s.a) || !w.contains(s.b)) {
      throw std::domain_error("SegmentSet: segment endpoint outside the window");
    }
  }
  for (const Arc& a : arcs_) {
    const Vec2 e0{a.center.x + a.radius * std::cos(a.angle0),
                  a.center.y + a.radius * std::sin(a.angle0)};
    const Vec2 e1{a.center.x + a.radius * std::cos(a.angle1),
                  a.center.y + a.radius * std::sin(a.angle1)};
    if (!w.contains(e0) || !w.contains(e1)) {
      throw std::domain_error("SegmentSet: arc endpoint outside the window");
    }
  }
}

double distance_to_pattern(Vec2 p, const PointPattern& target) {
  if (target.empty()) {
    throw std::domain_error("distance_to_pattern: empty target pattern");
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double dx = p.x - target.xs()[i];
    const double dy = p.y - target.ys()[i];
    best = std::min(best, dx * dx + dy * dy);
  }
  return std::sqrt(best);
}

}  // namespace stcausal
