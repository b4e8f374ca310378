#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "cytobench/image.hpp"

namespace cytobench::stain {

// Per-pixel optical density, three channels interleaved.
struct OdImage {
  int width = 0;
  int height = 0;
  std::vector<double> od;

  std::array<double, 3> at(std::size_t i) const { return {od[3 * i], od[3 * i + 1], od[3 * i + 2]}; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// H&E stain vectors in OD space (unit columns, non-negative entries) and the
// 99th-percentile concentration of each stain.
struct StainProfile {
  std::array<double, 3> hematoxylin{};
  std::array<double, 3> eosin{};
  std::array<double, 2> max_concentrations{};

  // Throws InvalidArgument when an invariant does not hold.
  void validate() const;

  friend bool operator==(const StainProfile&, const StainProfile&) = default;
};

// Hematoxylin and eosin concentration per pixel.
struct ConcentrationMap {
  int width = 0;
  int height = 0;
  std::vector<double> h;
  std::vector<double> e;
};

struct MacenkoParams {
  double beta = 0.15;             // OD-norm cut-off for background
  double alpha_percentile = 1.0;  // angular percentile for the extreme directions
  int background_intensity = 255;
  std::size_t min_tissue_pixels = 100;
};

// Reference profile shipped with the library; target of normalize().
StainProfile reference_profile();

// Builds a profile from raw column directions: entries clamped at zero, then
// each column scaled to unit length.
StainProfile make_profile(std::array<double, 3> hematoxylin, std::array<double, 3> eosin,
                          std::array<double, 2> max_concentrations);

// OD = -log10((I + 1) / (background + 1)) for one 8-bit intensity.
double intensity_to_od(int intensity, int background_intensity = 255);

// Inverse of intensity_to_od, rounded and clamped to [0, 255].
std::uint8_t od_to_intensity(double od, int background_intensity = 255);

// background_intensity must lie in [1, 255].
OdImage rgb_to_od(const ImagePatch& patch, int background_intensity = 255);

// Macenko estimate. Pixels whose OD norm is below beta are background; the
// remaining cloud is projected on its two principal directions and the
// alpha / (100 - alpha) angular percentiles give the stain vectors. The vector
// with the larger red-OD component is hematoxylin. Throws NoTissueError when
// fewer than min_tissue_pixels remain.
//
// The result is invariant under any permutation of pixels and under
// duplicating every pixel: moments are accumulated over sorted OD triples and
// percentiles use the nearest-rank rule.
StainProfile estimate_stain_matrix(const OdImage& od, const MacenkoParams& params = {});

// Convenience: rgb_to_od followed by estimate_stain_matrix.
StainProfile estimate_stain_matrix(const ImagePatch& patch, const MacenkoParams& params = {});

// Least-squares concentrations per pixel. Negative components are kept unless
// clamp_negative is set. Throws InvalidArgument for a degenerate (collinear)
// stain matrix.
ConcentrationMap deconvolve(const ImagePatch& patch, const StainProfile& profile,
                            int background_intensity = 255, bool clamp_negative = false);

// Beer-Lambert forward model: intensity of a pixel holding concentrations (h, e).
Rgb compose(const StainProfile& profile, double h, double e, int background_intensity = 255);

// Maps the concentrations of `patch` under `source` onto `target`: negative
// concentrations are clamped to 0, each stain rescaled by the ratio of maximum
// concentrations, and the pixel recomposed through the target stain vectors.
ImagePatch normalize(const ImagePatch& patch, const StainProfile& source, const StainProfile& target,
                     int background_intensity = 255);

// Nearest-rank percentile (p in [0, 100]) of an unsorted sample; the smallest
// value x with at least ceil(p/100 * n) samples <= x.
double nearest_rank_percentile(std::vector<double> values, double p);

std::string profile_to_json(const StainProfile& profile);
StainProfile profile_from_json(const std::string& text);

}  // namespace cytobench::stain
