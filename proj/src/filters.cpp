#include "cytobench/filters.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "cytobench/error.hpp"

namespace cytobench {

namespace {

void check_dims(std::span<const double> img, int width, int height) {
  if (width <= 0 || height <= 0 || img.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("image buffer does not match its dimensions");
  }
}

// Largest integer w with w² + dy² <= r², or -1 when the row is outside the disk.
int disk_half_width(double radius, int dy) {
  const double r2 = radius * radius;
  const double dy2 = static_cast<double>(dy) * dy;
  if (dy2 > r2) return -1;
  int w = static_cast<int>(std::floor(std::sqrt(r2 - dy2)));
  while (static_cast<double>(w + 1) * (w + 1) + dy2 <= r2) ++w;
  while (w > 0 && static_cast<double>(w) * w + dy2 > r2) --w;
  return w;
}

// Running extreme over the window [x - w, x + w] of one row (van Herk / Gil-Werman).
template <class Better>
void running_extreme(const double* row, int width, int w, double identity, Better better, double* out,
                     std::vector<double>& scratch) {
  const int k = 2 * w + 1;
  const int len = width + 2 * w;
  scratch.resize(3 * static_cast<std::size_t>(len));
  double* p = scratch.data();
  double* g = p + len;
  double* h = g + len;
  for (int i = 0; i < len; ++i) p[i] = (i >= w && i < w + width) ? row[i - w] : identity;
  for (int i = 0; i < len; ++i) g[i] = (i % k == 0) ? p[i] : (better(p[i], g[i - 1]) ? p[i] : g[i - 1]);
  for (int i = len - 1; i >= 0; --i) {
    h[i] = (i % k == k - 1 || i == len - 1) ? p[i] : (better(p[i], h[i + 1]) ? p[i] : h[i + 1]);
  }
  for (int x = 0; x < width; ++x) {
    const double a = h[x];
    const double b = g[x + 2 * w];
    out[x] = better(a, b) ? a : b;
  }
}

template <class Better>
std::vector<double> disk_extreme(std::span<const double> img, int width, int height, double radius,
                                 double identity, Better better) {
  check_dims(img, width, height);
  if (!(radius >= 0.0)) throw InvalidArgument("disk radius must be non-negative");
  const int rmax = static_cast<int>(std::floor(radius));
  std::vector<int> half(static_cast<std::size_t>(2 * rmax + 1));
  for (int dy = -rmax; dy <= rmax; ++dy) half[static_cast<std::size_t>(dy + rmax)] = disk_half_width(radius, dy);

  // Row-wise running extremes, one plane per distinct half-width.
  const int wmax = half[static_cast<std::size_t>(rmax)];
  const std::size_t n = img.size();
  std::vector<double> planes(static_cast<std::size_t>(wmax + 1) * n);
  std::vector<char> needed(static_cast<std::size_t>(wmax + 1), 0);
  for (int w : half) {
    if (w >= 0) needed[static_cast<std::size_t>(w)] = 1;
  }
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (int y = 0; y < height; ++y) {
      const double* row = img.data() + static_cast<std::size_t>(y) * width;
      for (int w = 0; w <= wmax; ++w) {
        if (!needed[static_cast<std::size_t>(w)]) continue;
        double* dst = planes.data() + static_cast<std::size_t>(w) * n + static_cast<std::size_t>(y) * width;
        running_extreme(row, width, w, identity, better, dst, scratch);
      }
    }
  }

  std::vector<double> out(n);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * width;
    std::fill(dst, dst + width, identity);
    for (int dy = -rmax; dy <= rmax; ++dy) {
      const int yy = y + dy;
      const int w = half[static_cast<std::size_t>(dy + rmax)];
      if (yy < 0 || yy >= height || w < 0) continue;
      const double* src = planes.data() + static_cast<std::size_t>(w) * n + static_cast<std::size_t>(yy) * width;
      for (int x = 0; x < width; ++x) {
        if (better(src[x], dst[x])) dst[x] = src[x];
      }
    }
  }
  return out;
}

}  // namespace

std::vector<double> disk_erode(std::span<const double> img, int width, int height, double radius) {
  return disk_extreme(img, width, height, radius, std::numeric_limits<double>::infinity(), std::less<double>{});
}

std::vector<double> disk_dilate(std::span<const double> img, int width, int height, double radius) {
  return disk_extreme(img, width, height, radius, -std::numeric_limits<double>::infinity(),
                      std::greater<double>{});
}

std::vector<double> disk_opening(std::span<const double> img, int width, int height, double radius) {
  const std::vector<double> eroded = disk_erode(img, width, height, radius);
  return disk_dilate(eroded, width, height, radius);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> gaussian_blur(std::span<const double> img, int width, int height, double sigma) {
  check_dims(img, width, height);
  if (!(sigma > 0.0)) return {img.begin(), img.end()};
  const std::vector<double> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);

  std::vector<double> tmp(img.size());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    const double* src = img.data() + static_cast<std::size_t>(y) * width;
    double* dst = tmp.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) acc += k[static_cast<std::size_t>(j + r)] * src[std::clamp(x + j, 0, width - 1)];
      dst[x] = acc;
    }
  }
  std::vector<double> out(img.size());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) {
        acc += k[static_cast<std::size_t>(j + r)] * tmp[static_cast<std::size_t>(std::clamp(y + j, 0, height - 1)) * width + x];
      }
      dst[x] = acc;
    }
  }
  return out;
}

}  // namespace cytobench
