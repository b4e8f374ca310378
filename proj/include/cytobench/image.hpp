#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cytobench {

using Rgb = std::array<std::uint8_t, 3>;

// 8-bit RGB raster with its physical pixel size.
class ImagePatch {
 public:
  ImagePatch() = default;
  // Throws InvalidArgument unless width, height > 0, scale > 0 and the buffer
  // holds width * height * 3 bytes.
  ImagePatch(int width, int height, std::vector<std::uint8_t> pixels, double scale_um_per_px,
             std::string patient_id = {}, std::string patch_id = {});
  // Uniformly filled patch.
  ImagePatch(int width, int height, Rgb fill, double scale_um_per_px);

  int width() const { return width_; }
  int height() const { return height_; }
  double scale() const { return scale_; }
  const std::string& patient_id() const { return patient_id_; }
  const std::string& patch_id() const { return patch_id_; }
  void set_ids(std::string patient_id, std::string patch_id);

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  Rgb at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width_ + x);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb v) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width_ + x);
    pixels_[i] = v[0];
    pixels_[i + 1] = v[1];
    pixels_[i + 2] = v[2];
  }

  friend bool operator==(const ImagePatch&, const ImagePatch&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
  double scale_ = 0.0;
  std::string patient_id_;
  std::string patch_id_;
};

// 8-bit RGB PNG. Grey, palette and alpha inputs are converted to RGB.
// Throws cytobench::Error on unreadable files.
ImagePatch read_png(const std::filesystem::path& path, double scale_um_per_px);

// Writes a deterministic PNG (no time chunk), so equal patches give equal bytes.
void write_png(const std::filesystem::path& path, const ImagePatch& patch);

}  // namespace cytobench
