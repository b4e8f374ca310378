#include "cytobench/morphometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "cytobench/error.hpp"

namespace cytobench::morph {

namespace {

double squared_distance(Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return dx * dx + dy * dy;
}

std::vector<Point> hull_of(const Polygon& poly) {
  std::vector<Point> hull = convex_hull(poly.vertices());
  if (hull.size() < 3) throw GeometryError("degenerate polygon: convex hull has no area");
  return hull;
}

}  // namespace

double edge_width(Point a, Point b, Point v) {
  const double cross = (b.x - a.x) * (v.y - a.y) - (b.y - a.y) * (v.x - a.x);
  return cross / std::sqrt(squared_distance(a, b));
}

ShapeFeatures shape_features(const Polygon& poly, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("scale must be positive");
  const double area_px = poly.area();
  const double perim_px = poly.perimeter();
  const std::vector<Point> hull = hull_of(poly);
  const double hull_px = 0.5 * twice_signed_area(hull);
  if (!(area_px > 0.0) || !(perim_px > 0.0) || !(hull_px > 0.0)) throw GeometryError("degenerate polygon");

  // Ratios stay in pixel units so they do not depend on the scale at all.
  ShapeFeatures f;
  f.area = area_px * scale * scale;
  f.perimeter = perim_px * scale;
  f.circularity = 4.0 * std::numbers::pi * area_px / (perim_px * perim_px);
  f.solidity = area_px / hull_px;
  return f;
}

Diameters calipers_diameters(const Polygon& poly, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("scale must be positive");
  const std::vector<Point> h = hull_of(poly);
  const std::size_t n = h.size();

  double max_d2 = 0.0;
  double min_width = std::numeric_limits<double>::infinity();
  std::size_t j = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = h[i];
    const Point b = h[(i + 1) % n];
    // Widths along the hull are unimodal; advance the antipodal pointer to the peak.
    for (std::size_t guard = 0; guard < n; ++guard) {
      const std::size_t nj = (j + 1) % n;
      if (edge_width(a, b, h[nj]) > edge_width(a, b, h[j])) {
        j = nj;
      } else {
        break;
      }
    }
    const double w = edge_width(a, b, h[j]);
    min_width = std::min(min_width, w);
    max_d2 = std::max({max_d2, squared_distance(a, h[j]), squared_distance(b, h[j])});
    // A parallel opposite edge makes the next vertex antipodal as well.
    const std::size_t nj = (j + 1) % n;
    if (edge_width(a, b, h[nj]) == w) {
      max_d2 = std::max({max_d2, squared_distance(a, h[nj]), squared_distance(b, h[nj])});
    }
  }
  return {min_width * scale, std::sqrt(max_d2) * scale};
}

ChannelStats channel_stats(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("statistics of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  ChannelStats s;
  s.min = v.front();
  s.max = v.back();
  s.median = (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  double sum = 0.0;
  for (double x : values) sum += x;
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : values) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(n));
  return s;
}

StainStats stain_stats(const Mask& mask, const stain::ConcentrationMap& conc) {
  if (mask.width() != conc.width || mask.height() != conc.height) {
    throw InvalidArgument("mask and concentration map dimensions differ");
  }
  std::vector<double> hv, ev;
  for (int y = 0; y < mask.height(); ++y) {
    const std::uint8_t* row = mask.row(y);
    for (int x = 0; x < mask.width(); ++x) {
      if (!row[x]) continue;
      const std::size_t i = static_cast<std::size_t>(y) * conc.width + x;
      hv.push_back(conc.h[i]);
      ev.push_back(conc.e[i]);
    }
  }
  if (hv.empty()) throw InvalidArgument("stain statistics over an empty mask");
  return {channel_stats(hv), channel_stats(ev)};
}

FeatureRecord feature_record(const CellInstance& instance, const stain::ConcentrationMap& conc, double scale) {
  if (!instance.cell) throw InvalidArgument("instance " + instance.id + " has no cell polygon");
  const Polygon& cell = *instance.cell;
  const ShapeFeatures shape = shape_features(cell, scale);
  const Diameters dia = calipers_diameters(cell, scale);
  const StainStats st = stain_stats(rasterize(cell, conc.width, conc.height), conc);

  FeatureRecord r;
  r.instance_id = instance.id;
  r.patch_id = instance.patch_id;
  r.values = {shape.area,     shape.perimeter, shape.circularity, shape.solidity, dia.max_diameter,
              dia.min_diameter, instance.nucleus.area() / cell.area(),
              st.h.median,    st.h.mean,       st.h.std,          st.h.max,       st.h.min,
              st.e.median,    st.e.mean,       st.e.std,          st.e.max,       st.e.min};
  return r;
}

}  // namespace cytobench::morph
