#pragma once

#include <span>
#include <vector>

#include "cytobench/cell.hpp"
#include "cytobench/raster.hpp"

namespace cytobench::expansion {

// Nearest-nucleus assignment: a pixel gets label i + 1 when its squared
// distance to the closest pixel of nuclei[i] is <= radius_px² and no lower
// index is strictly closer. Each nucleus is handled on its own bounding box
// grown by ceil(radius) with an exact squared distance transform; the boxes
// run in parallel and are merged in index order. Throws InvalidArgument when
// two masks share a pixel or the masks differ in size.
LabelMap assign_nearest(std::span<const Mask> nuclei, double radius_px);

// Squared Euclidean distance to the nearest set pixel (pixel centers), exact
// in integer arithmetic. Unset masks give +infinity everywhere.
std::vector<double> squared_distance_transform(const Mask& mask);

struct ExpansionResult {
  std::vector<CellInstance> cells;
  double radius_um = 0.0;
  LabelMap labels;  // label i + 1 = cell of input i
};

// Grows every nucleus by radius_um without crossing a neighbour's equidistant
// frontier, clipped to the image. Each cell polygon is the outline of the
// assigned region; when that outline would not cover the nucleus mask or would
// reach into another cell, the nucleus polygon itself is used. Radius 0
// returns the nucleus polygons unchanged.
ExpansionResult expand(std::span<const CellInstance> nuclei, double radius_um, int width, int height,
                       double scale);

}  // namespace cytobench::expansion
