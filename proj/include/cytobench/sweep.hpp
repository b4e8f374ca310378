#pragma once

#include <span>
#include <string>
#include <vector>

#include "cytobench/cell.hpp"

namespace cytobench::expansion {

// One patch worth of inputs for a radius sweep.
struct SweepPatch {
  std::string patch_id;
  int width = 0;
  int height = 0;
  double scale = 0.5;
  std::vector<CellInstance> nuclei;          // detections to expand
  std::vector<CellInstance> gold;            // gold instances (cells where present)
  std::vector<Polygon> unpaired_gold_cells;  // gold cells without a nucleus
};

struct SweepPoint {
  double radius_um = 0.0;
  double ap50 = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double best_radius_um = 0.0;
};

// 0.5, 1.0, ..., 10.0 µm.
std::vector<double> default_sweep_radii();

// Expands every patch at each radius and scores cell AP50 against gold. The
// best radius is the argmax, the smaller radius on ties. Throws
// InvalidArgument for an empty radius list or when no gold cell exists.
SweepResult radius_sweep(std::span<const SweepPatch> patches, std::span<const double> radii);

// {"points": [{"radius": r, "ap50": a}, ...], "best_radius": r}
std::string sweep_to_json(const SweepResult& r);

}  // namespace cytobench::expansion
