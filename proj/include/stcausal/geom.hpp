#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace stcausal {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains_closed(Vec2 p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
  }
  bool operator==(const Rect&) const = default;
};

// The observation window Ω: a single axis-aligned rectangle with positive area.
class Window {
 public:
  explicit Window(Rect bounds);
  const Rect& bounds() const { return bounds_; }
  double area() const { return bounds_.area(); }
  // Window membership is closed on every edge.
  bool contains(Vec2 p) const { return bounds_.contains_closed(p); }
  bool operator==(const Window&) const = default;

 private:
  Rect bounds_;
};

// A finite point pattern observed in one period. Coordinates are stored as
// parallel arrays so distance kernels can stream them directly.
class PointPattern {
 public:
  PointPattern() = default;
  PointPattern(int period, std::vector<double> xs, std::vector<double> ys);
  PointPattern(int period, const std::vector<Vec2>& points);

  int period() const { return period_; }
  std::size_t size() const { return xs_.size(); }
  bool empty() const { return xs_.empty(); }
  Vec2 at(std::size_t i) const { return {xs_[i], ys_[i]}; }
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }

  // Throws std::domain_error naming the offending point if any coordinate
  // falls outside the (closed) window.
  void validate_inside(const Window& w) const;

 private:
  int period_ = 0;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

// A measurement region B: a union of axis-aligned rectangles inside the
// window. Overlapping input parts are normalized into disjoint pieces by
// rectangle subdivision, so area() is always the measure of the union.
// Point membership uses the half-open convention [x0,x1)×[y0,y1), closed on
// the window's max edges, which makes shared part edges count points once.
class Region {
 public:
  Region(std::string label, const std::vector<Rect>& parts, const Window& window);
  static Region whole_window(const Window& w, std::string label = "window");

  bool contains(Vec2 p) const;
  double area() const;
  const std::vector<Rect>& parts() const { return parts_; }
  const std::string& label() const { return label_; }
  const Window& window() const { return window_; }
  bool is_whole_window() const { return whole_; }

 private:
  std::string label_;
  std::vector<Rect> parts_;
  Window window_;
  bool whole_ = false;
};

bool same_geometry(const Region& a, const Region& b);

int count_in_region(const PointPattern& pattern, const Region& region);

struct Segment {
  Vec2 a, b;
};

// Circular arc: center, radius, angles in radians with angle0 < angle1 and
// sweep at most 2π. Distance uses clamped angular projection.
struct Arc {
  Vec2 center;
  double radius = 0.0;
  double angle0 = 0.0;
  double angle1 = 0.0;
};

double point_segment_distance(Vec2 p, const Segment& s);
double point_arc_distance(Vec2 p, const Arc& a);

// A collection of line segments and arcs (the simulated road network).
class SegmentSet {
 public:
  void add_segment(Vec2 a, Vec2 b);
  void add_arc(Vec2 center, double radius, double angle0, double angle1);

  bool empty() const { return segments_.empty() && arcs_.empty(); }
  double distance(Vec2 p) const;  // throws std::domain_error when empty
  // out[i] = distance from (xs[i], ys[i]) to the nearest segment/arc.
  void distance_batch(const double* xs, const double* ys, std::size_t n,
                      double* out) const;
  void validate_inside(const Window& w) const;

  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<Arc>& arcs() const { return arcs_; }

 private:
  std::vector<Segment> segments_;
  std::vector<Arc> arcs_;
};

// Distance from p to the nearest point of the target pattern; throws
// std::domain_error for an empty target (callers own the empty-history
// convention).
double distance_to_pattern(Vec2 p, const PointPattern& target);

}  // namespace stcausal
