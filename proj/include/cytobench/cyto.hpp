#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "cytobench/cell.hpp"
#include "cytobench/config.hpp"
#include "cytobench/image.hpp"
#include "cytobench/raster.hpp"
#include "cytobench/stain.hpp"

namespace cytobench::cyto {

// Axis-aligned box in pixel coordinates (top-left corner and size).
struct RoiBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const RoiBox&, const RoiBox&) = default;
};

struct CytoParams {
  double scale_factor = 2.0;
  double nms_iou_threshold = 0.3;
  double tissue_threshold = 0.05;  // h + e concentration a cytoplasm pixel must exceed

  // Throws InvalidArgument unless scale_factor >= 1 and the threshold is in (0, 1).
  void validate() const;

  friend bool operator==(const CytoParams&, const CytoParams&) = default;
};

inline constexpr std::string_view kParamKeys[] = {"scale_factor", "nms_iou_threshold", "tissue_threshold"};

CytoParams params_from_config(const Config& cfg, CytoParams base = {});
Config params_to_config(const CytoParams& p);

RoiBox roi_of(const Polygon& poly);

// Scales the box about its center, then clips it to [0, width] x [0, height].
RoiBox scale_roi(const RoiBox& box, double factor, int width, int height);

// Pixels whose centers lie in [x, x + w) x [y, y + h).
Mask roi_mask(const RoiBox& box, int width, int height);

// Grows the nucleus mask through 4-connected pixels of the ROI whose h + e
// exceeds the threshold and traces the result. The outline always covers the
// nucleus mask and stays inside the ROI; when growth adds nothing or the
// outline would break either rule, the nucleus polygon is returned.
Polygon refine_cytoplasm(const stain::ConcentrationMap& conc, const Polygon& nucleus, const RoiBox& cell_roi,
                         double tissue_threshold);

// Greedy mask NMS over nucleus-cell pairs. Instances are visited by score
// (missing confidence counts as 1), then larger cell mask, then lower index;
// one is kept when both its nucleus IoU and its cell IoU with every kept
// instance are <= the threshold, so a pair is always kept or dropped as a
// whole. Survivors keep their input order. Throws InvalidArgument when the
// lists differ in length.
std::vector<CellInstance> pair_and_nms(std::span<const CellInstance> nuclei, std::span<const Polygon> cells,
                                       const CytoParams& params, int width, int height);

// Scale, refine and NMS for every nucleus of one patch.
std::vector<CellInstance> run(const ImagePatch& patch, const stain::StainProfile& profile,
                              std::span<const CellInstance> nuclei, const CytoParams& params);

}  // namespace cytobench::cyto
