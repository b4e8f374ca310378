#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cytobench/geometry.hpp"

namespace cytobench {

// Inclusive pixel index range; empty when x1 < x0.
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;
  int y1 = -1;

  bool empty() const { return x1 < x0 || y1 < y0; }
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

PixelBox intersect(const PixelBox& a, const PixelBox& b);

// Binary raster, row-major, one byte per pixel (0 or 1).
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  bool get(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }
  std::uint8_t* row(int y) { return bits_.data() + static_cast<std::size_t>(y) * width_; }
  const std::uint8_t* row(int y) const { return bits_.data() + static_cast<std::size_t>(y) * width_; }

  std::size_t count() const;
  PixelBox bounds() const;
  bool empty() const { return count() == 0; }

  // True when every set pixel of *this is set in other.
  bool subset_of(const Mask& other) const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Integer label per pixel, 0 = background.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}
  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  int& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  int max_label() const;
  Mask mask_of(int label) const;
};

// Pixel (x, y) is set iff its center (x + 0.5, y + 0.5) lies inside the
// polygon under the even-odd rule of point_in_ring. Rows run in parallel.
Mask rasterize(const Polygon& poly, int width, int height);

// Background pixels not 4-connected to the image border (through background)
// become foreground.
Mask fill_holes(const Mask& mask);

// 4-connected components labelled 1..K in raster order of their first pixel.
LabelMap label_components(const Mask& mask);

// Outer boundary of the 4-connected component holding the first set pixel in
// raster order, with holes filled. Vertices lie on pixel corners; where the
// boundary meets itself diagonally the corner is cut by 0.25 px so the ring
// stays simple. Rasterizing the result reproduces the hole-filled component.
// Throws GeometryError on an empty mask.
Polygon trace_outline(const Mask& mask);

// Traces every label 1..max_label of the map. A label whose pixels split into
// several 4-connected pieces is traced from its largest piece (first in raster
// order on ties); a label without pixels yields std::nullopt.
std::vector<std::optional<Polygon>> trace_labels(const LabelMap& labels);

// Ring through the midpoints of the unit pixel steps of a traced outline, so
// staircases become straight diagonal runs and perimeters stop overcounting.
// Keeps the set of covered pixel centers; when it would not (or the ring is
// not simple) the input is returned unchanged.
Polygon smooth_outline(const Polygon& traced);

}  // namespace cytobench
