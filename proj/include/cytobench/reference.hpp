#pragma once

// Serial, straightforward versions of the parallel kernels. They are kept for
// tests (the optimized kernels must agree with them) and for the benchmark.

#include <span>
#include <vector>

#include "cytobench/image.hpp"
#include "cytobench/raster.hpp"
#include "cytobench/stain.hpp"

namespace cytobench::reference {

// Per-pixel point_in_ring test at every pixel center.
Mask rasterize(const Polygon& poly, int width, int height);

// Direct evaluation of the OD formula, one pixel at a time.
stain::OdImage rgb_to_od(const ImagePatch& patch, int background_intensity = 255);

// Per-pixel 2x2 normal-equation solve.
stain::ConcentrationMap deconvolve(const ImagePatch& patch, const stain::StainProfile& profile,
                                   int background_intensity = 255);

// Brute-force min / max over the disk {dx² + dy² <= r²}, ignoring out-of-image samples.
std::vector<double> disk_erode(std::span<const double> img, int width, int height, double radius);
std::vector<double> disk_dilate(std::span<const double> img, int width, int height, double radius);

// Direct 2D convolution with the same truncated, normalized kernel and
// edge-replicating border as the separable implementation.
std::vector<double> gaussian_blur(std::span<const double> img, int width, int height, double sigma);

// Every pixel scans every nucleus pixel; ties go to the lower nucleus index.
// Label i + 1 marks nucleus i.
LabelMap assign_nearest(std::span<const Mask> nuclei, double radius_px);

}  // namespace cytobench::reference
