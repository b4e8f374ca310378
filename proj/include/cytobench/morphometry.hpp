#pragma once

#include <array>
#include <span>
#include <string_view>

#include "cytobench/cell.hpp"
#include "cytobench/geometry.hpp"
#include "cytobench/raster.hpp"
#include "cytobench/stain.hpp"

namespace cytobench::morph {

struct ShapeFeatures {
  double area = 0.0;       // µm²
  double perimeter = 0.0;  // µm
  double circularity = 0.0;
  double solidity = 0.0;
};

struct Diameters {
  double min_diameter = 0.0;  // µm, minimum caliper width
  double max_diameter = 0.0;  // µm, maximum caliper length
};

// median, mean, population std, max, min
struct ChannelStats {
  double median = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  double min = 0.0;
};

struct StainStats {
  ChannelStats h;
  ChannelStats e;
};

inline constexpr std::size_t kFeatureCount = 17;

// Column names, in CSV order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "area_um2", "perimeter_um", "circularity", "solidity", "max_diameter_um", "min_diameter_um",
    "nucleus_cell_ratio", "h_median", "h_mean", "h_std", "h_max", "h_min",
    "e_median", "e_mean", "e_std", "e_max", "e_min"};

struct FeatureRecord {
  std::string instance_id;
  std::string patch_id;
  std::array<double, kFeatureCount> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double area() const { return values[0]; }
  double perimeter() const { return values[1]; }
  double circularity() const { return values[2]; }
  double solidity() const { return values[3]; }
  double max_diameter() const { return values[4]; }
  double min_diameter() const { return values[5]; }
  double nucleus_cell_ratio() const { return values[6]; }
};

ShapeFeatures shape_features(const Polygon& poly, double scale);

// Rotating calipers over the convex hull of the polygon.
Diameters calipers_diameters(const Polygon& poly, double scale);

// Distance from v to the line through the CCW hull edge a->b; the expression
// shared by the calipers and any brute-force check of them.
double edge_width(Point a, Point b, Point v);

// Statistics of both channels over the set pixels of `mask`.
// Throws InvalidArgument for an empty mask or mismatched dimensions.
StainStats stain_stats(const Mask& mask, const stain::ConcentrationMap& conc);

ChannelStats channel_stats(std::span<const double> values);

// Shape features of the cell polygon, nucleus/cell area ratio, and stain
// statistics over the rasterized cell. Throws InvalidArgument for an instance
// without a cell polygon.
FeatureRecord feature_record(const CellInstance& instance, const stain::ConcentrationMap& conc, double scale);

}  // namespace cytobench::morph
