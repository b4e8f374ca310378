#include "cytobench/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cytobench/error.hpp"

namespace cytobench::expansion {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One pass of the lower envelope of parabolas (Felzenszwalb-Huttenlocher).
void edt_1d(const double* f, std::size_t stride, int n, double* out, std::vector<int>& v, std::vector<double>& z) {
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    const double fq = f[static_cast<std::size_t>(q) * stride];
    if (fq == kInf) continue;
    double s = -kInf;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      const double fp = f[static_cast<std::size_t>(p) * stride];
      s = ((fq + static_cast<double>(q) * q) - (fp + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = (k == 0) ? -kInf : s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) out[static_cast<std::size_t>(q) * stride] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    const double d = static_cast<double>(q - p);
    out[static_cast<std::size_t>(q) * stride] = d * d + f[static_cast<std::size_t>(p) * stride];
  }
}

// Squared EDT of `mask` restricted to box (inclusive), row-major in the box.
std::vector<double> local_edt(const Mask& mask, const PixelBox& box) {
  const int w = box.x1 - box.x0 + 1;
  const int h = box.y1 - box.y0 + 1;
  std::vector<double> f(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f[static_cast<std::size_t>(y) * w + x] = mask.get(box.x0 + x, box.y0 + y) ? 0.0 : kInf;
    }
  }
  std::vector<double> cols(f.size());
  std::vector<int> v;
  std::vector<double> z;
  for (int x = 0; x < w; ++x) edt_1d(f.data() + x, static_cast<std::size_t>(w), h, cols.data() + x, v, z);
  std::vector<double> out(f.size());
  for (int y = 0; y < h; ++y) {
    edt_1d(cols.data() + static_cast<std::size_t>(y) * w, 1, w, out.data() + static_cast<std::size_t>(y) * w, v, z);
  }
  return out;
}

}  // namespace

std::vector<double> squared_distance_transform(const Mask& mask) {
  if (mask.width() == 0 || mask.height() == 0) return {};
  return local_edt(mask, {0, 0, mask.width() - 1, mask.height() - 1});
}

LabelMap assign_nearest(std::span<const Mask> nuclei, double radius_px) {
  if (nuclei.empty()) return {};
  if (!(radius_px >= 0.0)) throw InvalidArgument("expansion radius must be non-negative");
  const int w = nuclei.front().width();
  const int h = nuclei.front().height();
  LabelMap out(w, h);
  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    const Mask& m = nuclei[i];
    if (m.width() != w || m.height() != h) throw InvalidArgument("nucleus masks differ in size");
    for (std::size_t p = 0; p < out.labels.size(); ++p) {
      if (!m.get(static_cast<int>(p % w), static_cast<int>(p / w))) continue;
      if (out.labels[p] != 0) throw InvalidArgument("nuclei overlap");
      out.labels[p] = static_cast<int>(i) + 1;
    }
  }

  const int grow = static_cast<int>(std::ceil(radius_px));
  const double r2 = radius_px * radius_px + 1e-9;
  const PixelBox frame{0, 0, w - 1, h - 1};
  std::vector<PixelBox> boxes(nuclei.size());
  std::vector<std::vector<double>> dist(nuclei.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    const PixelBox b = nuclei[i].bounds();
    if (b.empty()) continue;
    boxes[i] = intersect({b.x0 - grow, b.y0 - grow, b.x1 + grow, b.y1 + grow}, frame);
    dist[i] = local_edt(nuclei[i], boxes[i]);
  }

  std::vector<double> best(out.labels.size(), kInf);
  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    if (dist[i].empty()) continue;
    const PixelBox& b = boxes[i];
    const int bw = b.x1 - b.x0 + 1;
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        const double d2 = dist[i][static_cast<std::size_t>(y - b.y0) * bw + (x - b.x0)];
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        if (d2 <= r2 && d2 < best[p]) {
          best[p] = d2;
          out.labels[p] = static_cast<int>(i) + 1;
        }
      }
    }
  }
  return out;
}

ExpansionResult expand(std::span<const CellInstance> nuclei, double radius_um, int width, int height,
                       double scale) {
  if (!(radius_um >= 0.0)) throw InvalidArgument("expansion radius must be non-negative");
  if (!(scale > 0.0)) throw InvalidArgument("scale must be positive");
  ExpansionResult res;
  res.radius_um = radius_um;

  std::vector<Mask> masks(nuclei.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < nuclei.size(); ++i) masks[i] = rasterize(nuclei[i].nucleus, width, height);
  res.labels = nuclei.empty() ? LabelMap(width, height) : assign_nearest(masks, radius_um / scale);

  std::vector<std::optional<Polygon>> outlines;
  if (radius_um > 0.0) outlines = trace_labels(res.labels);
  outlines.resize(nuclei.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < outlines.size(); ++i) {
    if (outlines[i]) outlines[i] = smooth_outline(*outlines[i]);
  }

  std::vector<char> use_outline(nuclei.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    if (!outlines[i]) continue;
    const Mask cell = rasterize(*outlines[i], width, height);
    bool ok = masks[i].subset_of(cell);
    const PixelBox b = cell.bounds();
    for (int y = b.y0; ok && y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        const int l = res.labels.at(x, y);
        if (cell.get(x, y) && l != static_cast<int>(i) + 1) {
          ok = false;
          break;
        }
      }
    }
    use_outline[i] = ok ? 1 : 0;
  }

  res.cells.reserve(nuclei.size());
  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    CellInstance c = nuclei[i];
    c.cell = use_outline[i] ? *outlines[i] : nuclei[i].nucleus;
    res.cells.push_back(std::move(c));
  }
  return res;
}

}  // namespace cytobench::expansion
