#include "cytobench/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "cytobench/error.hpp"

namespace cytobench {

ImagePatch::ImagePatch(int width, int height, std::vector<std::uint8_t> pixels, double scale_um_per_px,
                       std::string patient_id, std::string patch_id)
    : width_(width),
      height_(height),
      pixels_(std::move(pixels)),
      scale_(scale_um_per_px),
      patient_id_(std::move(patient_id)),
      patch_id_(std::move(patch_id)) {
  if (width <= 0 || height <= 0) throw InvalidArgument("patch dimensions must be positive");
  if (!(scale_um_per_px > 0.0)) throw InvalidArgument("patch scale must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw InvalidArgument("patch buffer must hold width*height*3 bytes");
  }
}

ImagePatch::ImagePatch(int width, int height, Rgb fill, double scale_um_per_px)
    : ImagePatch(width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3),
                 scale_um_per_px) {
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill[0];
    pixels_[i + 1] = fill[1];
    pixels_[i + 2] = fill[2];
  }
}

void ImagePatch::set_ids(std::string patient_id, std::string patch_id) {
  patient_id_ = std::move(patient_id);
  patch_id_ = std::move(patch_id);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImagePatch read_png(const std::filesystem::path& path, double scale_um_per_px) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  std::vector<std::uint8_t> pixels;
  int width = 0, height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("corrupt PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  return ImagePatch(width, height, std::move(pixels), scale_um_per_px);
}

void write_png(const std::filesystem::path& path, const ImagePatch& patch) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(patch.width()), static_cast<png_uint_32>(patch.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const auto& px = patch.pixels();
  for (int y = 0; y < patch.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(px.data() + static_cast<std::size_t>(y) * patch.width() * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace cytobench
