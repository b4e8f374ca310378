#pragma once

#include <string_view>
#include <vector>

#include "cytobench/cell.hpp"
#include "cytobench/config.hpp"
#include "cytobench/image.hpp"
#include "cytobench/raster.hpp"
#include "cytobench/stain.hpp"

namespace cytobench::watershed {

struct WatershedParams {
  double background_radius_um = 8.0;
  double sigma_um = 1.5;
  double min_area_um2 = 10.0;
  double max_area_um2 = 400.0;
  double intensity_threshold = 0.1;
  double expansion_radius_um = 5.0;
  // Maxima whose dynamic (peak height above the saddle that joins them to a
  // higher peak) is below this depth do not seed a basin.
  double h_maxima_depth = 0.05;

  // Throws InvalidArgument unless all values are positive and min < max.
  void validate() const;

  friend bool operator==(const WatershedParams&, const WatershedParams&) = default;
};

WatershedParams default_params();
WatershedParams finetuned_params();

inline constexpr std::string_view kParamKeys[] = {
    "background_radius_um", "sigma_um", "min_area_um2", "max_area_um2",
    "intensity_threshold", "expansion_radius_um", "h_maxima_depth"};

// Overrides the fields of `base` present in `cfg` and validates the result.
WatershedParams params_from_config(const Config& cfg, WatershedParams base = default_params());
Config params_to_config(const WatershedParams& p);

// µm to pixels, rounded to the nearest 0.1 px.
double um_to_px(double um, double scale);

// Background-subtracted, smoothed hematoxylin channel.
std::vector<double> preprocess(const stain::ConcentrationMap& conc, const WatershedParams& params, double scale);

// Seeds: one pixel per maximum of `img` (restricted to `foreground`, 4-connected)
// whose dynamic reaches `depth`, plus the highest pixel of every component.
// Returned as raster indices in ascending order.
std::vector<std::size_t> seed_pixels(const std::vector<double>& img, const Mask& foreground, double depth);

// Flooding of the foreground from the seeds, highest values first; ties are
// served first-in first-out. Labels follow the seed order.
LabelMap flood(const std::vector<double>& img, const Mask& foreground, const std::vector<std::size_t>& seeds);

struct Detection {
  LabelMap labels;                   // 1..K in output order; dropped regions are 0
  std::vector<CellInstance> nuclei;  // nucleus-only, ids "<patch_id>-n<k>"
};

// Full pipeline on one patch. Polygons are pairwise disjoint, every polygon
// area lies in [min_area, max_area], and the output is ordered by the first
// pixel of each region in raster order.
Detection detect(const ImagePatch& patch, const stain::StainProfile& profile, const WatershedParams& params);

std::vector<CellInstance> detect_nuclei(const ImagePatch& patch, const stain::StainProfile& profile,
                                        const WatershedParams& params);

}  // namespace cytobench::watershed
