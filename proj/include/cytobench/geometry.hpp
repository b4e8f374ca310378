#pragma once

#include <span>
#include <vector>

namespace cytobench {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned rectangle in continuous pixel coordinates.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  friend bool operator==(const Box&, const Box&) = default;
};

// Twice the signed shoelace area of the closed ring.
double twice_signed_area(std::span<const Point> ring);

// Convex hull (Andrew's monotone chain). Collinear points are dropped; the
// result has positive signed area. Fewer than 3 distinct non-collinear points
// yield the degenerate chain that remains.
std::vector<Point> convex_hull(std::span<const Point> points);

// Even-odd crossing test. A point is inside when an odd number of edges cross
// the horizontal ray towards +x; an edge counts when exactly one endpoint has
// y <= p.y and the crossing abscissa is strictly greater than p.x.
bool point_in_ring(std::span<const Point> ring, Point p);

// Simple polygon in pixel coordinates (x right, y down), implicitly closed.
//
// Construction drops a repeated closing vertex and consecutive duplicates,
// rejects rings with fewer than 3 vertices, zero area or self-intersections,
// and reorders the ring so its shoelace area is positive (counter-clockwise in
// a y-up frame).
class Polygon {
 public:
  explicit Polygon(std::vector<Point> vertices);

  std::span<const Point> vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }

  double area() const;
  double perimeter() const;
  Point centroid() const;
  Box bounds() const;
  bool contains(Point p) const { return point_in_ring(vertices_, p); }

  friend bool operator==(const Polygon&, const Polygon&) = default;

 private:
  std::vector<Point> vertices_;
};

// True when no two non-adjacent edges of the ring touch and no adjacent edges
// fold back over each other.
bool is_simple_ring(std::span<const Point> ring);

// Polygon for an axis-aligned rectangle.
Polygon make_rectangle(double x, double y, double w, double h);

// Regular n-gon (n >= 3) with the given circumradius.
Polygon make_regular_polygon(Point center, double radius, int n, double phase = 0.0);

}  // namespace cytobench
