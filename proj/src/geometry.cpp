#include "cytobench/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cytobench/error.hpp"

namespace cytobench {

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

// Closed-segment intersection, touching included.
bool segments_intersect(Point a, Point b, Point c, Point d) {
  const int d1 = sign(cross(c, d, a));
  const int d2 = sign(cross(c, d, b));
  const int d3 = sign(cross(a, b, c));
  const int d4 = sign(cross(a, b, d));
  if (d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0) return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

}  // namespace

double twice_signed_area(std::span<const Point> ring) {
  const std::size_t n = ring.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = ring[i];
    const Point& q = ring[(i + 1) % n];
    acc += p.x * q.y - q.x * p.y;
  }
  return acc;
}

std::vector<Point> convex_hull(std::span<const Point> points) {
  std::vector<Point> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(),
            [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool point_in_ring(std::span<const Point> ring, Point p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = ring[i];
    const Point& b = ring[j];
    if ((a.y <= p.y) != (b.y <= p.y)) {
      const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (xc > p.x) inside = !inside;
    }
  }
  return inside;
}

bool is_simple_ring(std::span<const Point> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;

  // Adjacent edges folding back onto each other.
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[(i + n - 1) % n];
    const Point& b = ring[i];
    const Point& c = ring[(i + 1) % n];
    if (cross(a, b, c) == 0.0) {
      const double dot = (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y);
      if (dot < 0.0) return false;
    }
  }
  if (n == 3) return true;

  // Sweep over edges ordered by their left end; only x-overlapping pairs are tested.
  struct Edge {
    double xmin, xmax, ymin, ymax;
    std::size_t i;
  };
  std::vector<Edge> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    edges[i] = {std::min(a.x, b.x), std::max(a.x, b.x), std::min(a.y, b.y), std::max(a.y, b.y), i};
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return a.xmin < b.xmin || (a.xmin == b.xmin && a.i < b.i); });
  for (std::size_t s = 0; s < n; ++s) {
    const Edge& e = edges[s];
    for (std::size_t t = s + 1; t < n && edges[t].xmin <= e.xmax; ++t) {
      const Edge& f = edges[t];
      if (f.ymin > e.ymax || f.ymax < e.ymin) continue;
      const std::size_t lo = std::min(e.i, f.i);
      const std::size_t hi = std::max(e.i, f.i);
      if (hi == lo + 1 || (lo == 0 && hi == n - 1)) continue;  // share a vertex by construction
      if (segments_intersect(ring[e.i], ring[(e.i + 1) % n], ring[f.i], ring[(f.i + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

Polygon::Polygon(std::vector<Point> vertices) {
  for (const Point& p : vertices) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("polygon vertex is not finite");
  }
  // Drop consecutive duplicates, including an explicit closing vertex.
  std::vector<Point> ring;
  ring.reserve(vertices.size());
  for (const Point& p : vertices) {
    if (ring.empty() || !(ring.back() == p)) ring.push_back(p);
  }
  while (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();

  if (ring.size() < 3) throw GeometryError("polygon needs at least 3 distinct vertices");
  const double a2 = twice_signed_area(ring);
  if (a2 == 0.0) throw GeometryError("polygon has zero area");
  if (!is_simple_ring(ring)) throw GeometryError("polygon is self-intersecting");
  if (a2 < 0.0) std::reverse(ring.begin(), ring.end());
  vertices_ = std::move(ring);
}

double Polygon::area() const { return 0.5 * twice_signed_area(vertices_); }

double Polygon::perimeter() const {
  double acc = 0.0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = vertices_[i];
    const Point& b = vertices_[(i + 1) % n];
    acc += std::hypot(b.x - a.x, b.y - a.y);
  }
  return acc;
}

Point Polygon::centroid() const {
  double cx = 0.0;
  double cy = 0.0;
  const std::size_t n = vertices_.size();
  // Shift to the first vertex to limit cancellation for far-from-origin rings.
  const Point o = vertices_[0];
  double a2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point p{vertices_[i].x - o.x, vertices_[i].y - o.y};
    const Point q{vertices_[(i + 1) % n].x - o.x, vertices_[(i + 1) % n].y - o.y};
    const double c = p.x * q.y - q.x * p.y;
    a2 += c;
    cx += (p.x + q.x) * c;
    cy += (p.y + q.y) * c;
  }
  return {o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)};
}

Box Polygon::bounds() const {
  double x0 = vertices_[0].x, x1 = x0, y0 = vertices_[0].y, y1 = y0;
  for (const Point& p : vertices_) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

Polygon make_rectangle(double x, double y, double w, double h) {
  return Polygon({{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}});
}

Polygon make_regular_polygon(Point center, double radius, int n, double phase) {
  if (n < 3) throw GeometryError("regular polygon needs n >= 3");
  std::vector<Point> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = phase + 2.0 * std::numbers::pi * k / n;
    v[static_cast<std::size_t>(k)] = {center.x + radius * std::cos(t), center.y + radius * std::sin(t)};
  }
  return Polygon(std::move(v));
}

}  // namespace cytobench
