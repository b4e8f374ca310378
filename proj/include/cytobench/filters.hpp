#pragma once

#include <span>
#include <vector>

namespace cytobench {

// Grey-level erosion / dilation with a disk {dx² + dy² <= radius²}. Samples
// outside the image are ignored. Each disk row is a 1D running min/max
// (van Herk / Gil-Werman), so the cost is independent of the row length.
std::vector<double> disk_erode(std::span<const double> img, int width, int height, double radius);
std::vector<double> disk_dilate(std::span<const double> img, int width, int height, double radius);

// Dilation of the erosion.
std::vector<double> disk_opening(std::span<const double> img, int width, int height, double radius);

// Separable Gaussian, kernel truncated at ceil(3 sigma), borders replicated.
// sigma <= 0 returns the input unchanged.
std::vector<double> gaussian_blur(std::span<const double> img, int width, int height, double sigma);

// Normalized 1D kernel of half-width ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

}  // namespace cytobench
