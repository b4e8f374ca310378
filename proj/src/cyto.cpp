#include "cytobench/cyto.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "cytobench/error.hpp"
#include "cytobench/evaluation.hpp"

namespace cytobench::cyto {

void CytoParams::validate() const {
  if (!(scale_factor >= 1.0) || !std::isfinite(scale_factor)) throw InvalidArgument("scale_factor must be >= 1");
  if (!(nms_iou_threshold > 0.0 && nms_iou_threshold < 1.0)) {
    throw InvalidArgument("nms_iou_threshold must lie in (0, 1)");
  }
  if (!std::isfinite(tissue_threshold)) throw InvalidArgument("tissue_threshold must be finite");
}

CytoParams params_from_config(const Config& cfg, CytoParams base) {
  base.scale_factor = cfg.get_double("scale_factor", base.scale_factor);
  base.nms_iou_threshold = cfg.get_double("nms_iou_threshold", base.nms_iou_threshold);
  base.tissue_threshold = cfg.get_double("tissue_threshold", base.tissue_threshold);
  base.validate();
  return base;
}

Config params_to_config(const CytoParams& p) {
  Config c;
  c.set("scale_factor", format_double(p.scale_factor));
  c.set("nms_iou_threshold", format_double(p.nms_iou_threshold));
  c.set("tissue_threshold", format_double(p.tissue_threshold));
  return c;
}

RoiBox roi_of(const Polygon& poly) {
  const Box b = poly.bounds();
  return {b.x, b.y, b.w, b.h};
}

RoiBox scale_roi(const RoiBox& box, double factor, int width, int height) {
  if (!(factor >= 1.0)) throw InvalidArgument("ROI scale factor must be >= 1");
  const double cx = box.x + box.w / 2.0;
  const double cy = box.y + box.h / 2.0;
  const double hw = box.w * factor / 2.0;
  const double hh = box.h * factor / 2.0;
  const double x0 = std::max(0.0, cx - hw);
  const double y0 = std::max(0.0, cy - hh);
  const double x1 = std::min(static_cast<double>(width), cx + hw);
  const double y1 = std::min(static_cast<double>(height), cy + hh);
  return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

Mask roi_mask(const RoiBox& box, int width, int height) {
  Mask m(width, height);
  for (int y = 0; y < height; ++y) {
    const double cy = y + 0.5;
    if (cy < box.y || cy >= box.y + box.h) continue;
    for (int x = 0; x < width; ++x) {
      const double cx = x + 0.5;
      if (cx >= box.x && cx < box.x + box.w) m.set(x, y);
    }
  }
  return m;
}

Polygon refine_cytoplasm(const stain::ConcentrationMap& conc, const Polygon& nucleus, const RoiBox& cell_roi,
                         double tissue_threshold) {
  const int w = conc.width;
  const int h = conc.height;
  const Mask nuc = rasterize(nucleus, w, h);
  if (nuc.empty()) return nucleus;
  const Mask roi = roi_mask(cell_roi, w, h);

  Mask grown = nuc;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (nuc.get(x, y)) queue.emplace_back(x, y);
    }
  }
  std::size_t added = 0;
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    const int nx[4] = {x, x - 1, x + 1, x};
    const int ny[4] = {y - 1, y, y, y + 1};
    for (int k = 0; k < 4; ++k) {
      const int qx = nx[k];
      const int qy = ny[k];
      if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
      if (grown.get(qx, qy) || !roi.get(qx, qy)) continue;
      const std::size_t i = static_cast<std::size_t>(qy) * w + qx;
      if (!(conc.h[i] + conc.e[i] > tissue_threshold)) continue;
      grown.set(qx, qy);
      ++added;
      queue.emplace_back(qx, qy);
    }
  }
  if (added == 0) return nucleus;

  const Polygon outline = smooth_outline(trace_outline(grown));
  const Mask cell = rasterize(outline, w, h);
  if (!nuc.subset_of(cell) || !cell.subset_of(roi)) return nucleus;
  return outline;
}

std::vector<CellInstance> pair_and_nms(std::span<const CellInstance> nuclei, std::span<const Polygon> cells,
                                       const CytoParams& params, int width, int height) {
  if (nuclei.size() != cells.size()) throw InvalidArgument("nucleus and cell lists differ in length");
  params.validate();
  const std::size_t n = nuclei.size();
  std::vector<eval::BoxedMask> nm(n);
  std::vector<eval::BoxedMask> cm(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    nm[i] = eval::boxed_mask(nuclei[i].nucleus, width, height);
    cm[i] = eval::boxed_mask(cells[i], width, height);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = nuclei[a].score();
    const double sb = nuclei[b].score();
    if (sa != sb) return sa > sb;
    return cm[a].area > cm[b].area;
  });

  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool keep = true;
    for (std::size_t k : kept) {
      if (eval::iou(nm[i], nm[k]) > params.nms_iou_threshold || eval::iou(cm[i], cm[k]) > params.nms_iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());
  std::vector<CellInstance> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) {
    CellInstance c = nuclei[i];
    c.cell = cells[i];
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CellInstance> run(const ImagePatch& patch, const stain::StainProfile& profile,
                              std::span<const CellInstance> nuclei, const CytoParams& params) {
  params.validate();
  const stain::ConcentrationMap conc = stain::deconvolve(patch, profile);
  std::vector<std::optional<Polygon>> cells(nuclei.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    const RoiBox roi = scale_roi(roi_of(nuclei[i].nucleus), params.scale_factor, patch.width(), patch.height());
    cells[i] = refine_cytoplasm(conc, nuclei[i].nucleus, roi, params.tissue_threshold);
  }
  std::vector<Polygon> flat;
  flat.reserve(cells.size());
  for (auto& c : cells) flat.push_back(std::move(*c));
  return pair_and_nms(nuclei, flat, params, patch.width(), patch.height());
}

}  // namespace cytobench::cyto
