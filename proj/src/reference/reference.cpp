#include "cytobench/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cytobench/error.hpp"
#include "cytobench/filters.hpp"

namespace cytobench::reference {

Mask rasterize(const Polygon& poly, int width, int height) {
  Mask m(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (point_in_ring(poly.vertices(), {x + 0.5, y + 0.5})) m.set(x, y);
    }
  }
  return m;
}

stain::OdImage rgb_to_od(const ImagePatch& patch, int background_intensity) {
  if (background_intensity < 1 || background_intensity > 255) {
    throw InvalidArgument("background intensity must lie in [1, 255]");
  }
  stain::OdImage out;
  out.width = patch.width();
  out.height = patch.height();
  out.od.reserve(3 * patch.pixel_count());
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      const Rgb c = patch.at(x, y);
      for (int k = 0; k < 3; ++k) {
        out.od.push_back(-std::log10((c[static_cast<std::size_t>(k)] + 1.0) / (background_intensity + 1.0)));
      }
    }
  }
  return out;
}

stain::ConcentrationMap deconvolve(const ImagePatch& patch, const stain::StainProfile& profile,
                                   int background_intensity) {
  const auto& hv = profile.hematoxylin;
  const auto& ev = profile.eosin;
  double hh = 0, he = 0, ee = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    hh += hv[k] * hv[k];
    he += hv[k] * ev[k];
    ee += ev[k] * ev[k];
  }
  const double det = hh * ee - he * he;
  if (!(det > 1e-8 * hh * ee)) throw InvalidArgument("stain vectors are collinear");

  const stain::OdImage od = rgb_to_od(patch, background_intensity);
  stain::ConcentrationMap out;
  out.width = od.width;
  out.height = od.height;
  out.h.resize(od.pixel_count());
  out.e.resize(od.pixel_count());
  for (std::size_t i = 0; i < od.pixel_count(); ++i) {
    const auto v = od.at(i);
    double bh = 0, be = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      bh += hv[k] * v[k];
      be += ev[k] * v[k];
    }
    out.h[i] = (ee * bh - he * be) / det;
    out.e[i] = (hh * be - he * bh) / det;
  }
  return out;
}

namespace {

template <class Better>
std::vector<double> brute_disk(std::span<const double> img, int width, int height, double radius, double identity,
                               Better better) {
  if (width <= 0 || height <= 0 || img.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("image buffer does not match its dimensions");
  }
  if (!(radius >= 0.0)) throw InvalidArgument("disk radius must be non-negative");
  const int r = static_cast<int>(std::floor(radius));
  std::vector<double> out(img.size(), identity);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double best = identity;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (static_cast<double>(dx) * dx + static_cast<double>(dy) * dy > radius * radius) continue;
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= width || yy >= height) continue;
          const double v = img[static_cast<std::size_t>(yy) * width + xx];
          if (better(v, best)) best = v;
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = best;
    }
  }
  return out;
}

}  // namespace

std::vector<double> disk_erode(std::span<const double> img, int width, int height, double radius) {
  return brute_disk(img, width, height, radius, std::numeric_limits<double>::infinity(),
                    [](double a, double b) { return a < b; });
}

std::vector<double> disk_dilate(std::span<const double> img, int width, int height, double radius) {
  return brute_disk(img, width, height, radius, -std::numeric_limits<double>::infinity(),
                    [](double a, double b) { return a > b; });
}

std::vector<double> gaussian_blur(std::span<const double> img, int width, int height, double sigma) {
  if (width <= 0 || height <= 0 || img.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("image buffer does not match its dimensions");
  }
  if (!(sigma > 0.0)) return {img.begin(), img.end()};
  const std::vector<double> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> out(img.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = std::clamp(y + i, 0, height - 1);
        for (int j = -r; j <= r; ++j) {
          const int xx = std::clamp(x + j, 0, width - 1);
          acc += k[static_cast<std::size_t>(i + r)] * k[static_cast<std::size_t>(j + r)] *
                 img[static_cast<std::size_t>(yy) * width + xx];
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

LabelMap assign_nearest(std::span<const Mask> nuclei, double radius_px) {
  if (nuclei.empty()) return {};
  const int w = nuclei.front().width();
  const int h = nuclei.front().height();
  LabelMap out(w, h);
  const double r2 = radius_px * radius_px + 1e-9;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best = std::numeric_limits<double>::infinity();
      int label = 0;
      for (std::size_t i = 0; i < nuclei.size(); ++i) {
        const Mask& m = nuclei[i];
        for (int ny = 0; ny < h; ++ny) {
          for (int nx = 0; nx < w; ++nx) {
            if (!m.get(nx, ny)) continue;
            const double d2 = static_cast<double>(nx - x) * (nx - x) + static_cast<double>(ny - y) * (ny - y);
            if (d2 < best) {
              best = d2;
              label = static_cast<int>(i) + 1;
            }
          }
        }
      }
      if (label != 0 && best <= r2) out.at(x, y) = label;
    }
  }
  return out;
}

}  // namespace cytobench::reference
