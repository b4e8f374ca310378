#include "cytobench/watershed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "cytobench/error.hpp"
#include "cytobench/filters.hpp"

namespace cytobench::watershed {

void WatershedParams::validate() const {
  const double all[] = {background_radius_um, sigma_um,           min_area_um2,  max_area_um2,
                        intensity_threshold,  expansion_radius_um, h_maxima_depth};
  for (double v : all) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("watershed parameters must be positive");
  }
  if (!(min_area_um2 < max_area_um2)) throw InvalidArgument("min_area_um2 must be below max_area_um2");
}

WatershedParams default_params() { return {}; }

WatershedParams finetuned_params() {
  WatershedParams p;
  p.sigma_um = 2.5;
  p.min_area_um2 = 20.0;
  p.intensity_threshold = 0.15;
  return p;
}

WatershedParams params_from_config(const Config& cfg, WatershedParams base) {
  base.background_radius_um = cfg.get_double("background_radius_um", base.background_radius_um);
  base.sigma_um = cfg.get_double("sigma_um", base.sigma_um);
  base.min_area_um2 = cfg.get_double("min_area_um2", base.min_area_um2);
  base.max_area_um2 = cfg.get_double("max_area_um2", base.max_area_um2);
  base.intensity_threshold = cfg.get_double("intensity_threshold", base.intensity_threshold);
  base.expansion_radius_um = cfg.get_double("expansion_radius_um", base.expansion_radius_um);
  base.h_maxima_depth = cfg.get_double("h_maxima_depth", base.h_maxima_depth);
  base.validate();
  return base;
}

Config params_to_config(const WatershedParams& p) {
  Config c;
  c.set("background_radius_um", format_double(p.background_radius_um));
  c.set("sigma_um", format_double(p.sigma_um));
  c.set("min_area_um2", format_double(p.min_area_um2));
  c.set("max_area_um2", format_double(p.max_area_um2));
  c.set("intensity_threshold", format_double(p.intensity_threshold));
  c.set("expansion_radius_um", format_double(p.expansion_radius_um));
  c.set("h_maxima_depth", format_double(p.h_maxima_depth));
  return c;
}

double um_to_px(double um, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("scale must be positive");
  return std::round(um / scale * 10.0) / 10.0;
}

std::vector<double> preprocess(const stain::ConcentrationMap& conc, const WatershedParams& params, double scale) {
  const int w = conc.width;
  const int h = conc.height;
  const std::vector<double> background = disk_opening(conc.h, w, h, um_to_px(params.background_radius_um, scale));
  std::vector<double> top_hat(conc.h.size());
  for (std::size_t i = 0; i < top_hat.size(); ++i) top_hat[i] = conc.h[i] - background[i];
  return gaussian_blur(top_hat, w, h, um_to_px(params.sigma_um, scale));
}

namespace {

// Pixels of the foreground sorted by value, highest first; ties by index.
std::vector<std::size_t> descending_order(const std::vector<double>& img, const Mask& fg) {
  std::vector<std::size_t> order;
  for (int y = 0; y < fg.height(); ++y) {
    const std::uint8_t* row = fg.row(y);
    for (int x = 0; x < fg.width(); ++x) {
      if (row[x]) order.push_back(static_cast<std::size_t>(y) * fg.width() + x);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return img[a] > img[b]; });
  return order;
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
};

}  // namespace

std::vector<std::size_t> seed_pixels(const std::vector<double>& img, const Mask& foreground, double depth) {
  const int w = foreground.width();
  const int h = foreground.height();
  if (img.size() != static_cast<std::size_t>(w) * h) throw InvalidArgument("image and mask sizes differ");
  const std::vector<std::size_t> order = descending_order(img, foreground);

  // rank[i]: position in the processing order, so "older peak" is well defined on ties.
  constexpr std::size_t kUnseen = static_cast<std::size_t>(-1);
  std::vector<std::size_t> rank(img.size(), kUnseen);
  DisjointSets sets(img.size());
  std::vector<std::size_t> peak(img.size());
  std::vector<std::size_t> seeds;

  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t p = order[r];
    rank[p] = r;
    const int x = static_cast<int>(p % w);
    const int y = static_cast<int>(p / w);
    const int nx[4] = {x, x - 1, x + 1, x};
    const int ny[4] = {y - 1, y, y, y + 1};
    std::size_t roots[4];
    int nroots = 0;
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
      const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
      if (rank[q] == kUnseen) continue;
      const std::size_t root = sets.find(q);
      if (std::find(roots, roots + nroots, root) == roots + nroots) roots[nroots++] = root;
    }
    if (nroots == 0) {
      peak[p] = p;
      continue;
    }
    // The component with the oldest peak absorbs the others; each absorbed
    // peak is a seed when it stands at least `depth` above this saddle.
    std::sort(roots, roots + nroots, [&](std::size_t a, std::size_t b) { return rank[peak[a]] < rank[peak[b]]; });
    const std::size_t survivor = roots[0];
    for (int k = 1; k < nroots; ++k) {
      const std::size_t victim_peak = peak[roots[k]];
      if (img[victim_peak] - img[p] >= depth) seeds.push_back(victim_peak);
      sets.parent[roots[k]] = survivor;
    }
    sets.parent[p] = survivor;
  }
  // Each component's highest pixel always seeds.
  for (std::size_t p : order) {
    if (sets.find(p) == p) seeds.push_back(peak[p]);
  }
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

LabelMap flood(const std::vector<double>& img, const Mask& foreground, const std::vector<std::size_t>& seeds) {
  const int w = foreground.width();
  const int h = foreground.height();
  LabelMap labels(w, h);
  struct Item {
    double value;
    std::uint64_t age;
    std::size_t pixel;
  };
  auto later = [](const Item& a, const Item& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.age > b.age;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(later)> queue(later);
  std::uint64_t age = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::size_t s = seeds[i];
    labels.labels[s] = static_cast<int>(i) + 1;
    queue.push({img[s], age++, s});
  }
  while (!queue.empty()) {
    const Item it = queue.top();
    queue.pop();
    const int x = static_cast<int>(it.pixel % w);
    const int y = static_cast<int>(it.pixel / w);
    const int nx[4] = {x, x - 1, x + 1, x};
    const int ny[4] = {y - 1, y, y, y + 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
      if (!foreground.get(nx[k], ny[k]) || labels.at(nx[k], ny[k]) != 0) continue;
      labels.at(nx[k], ny[k]) = labels.labels[it.pixel];
      const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
      queue.push({img[q], age++, q});
    }
  }
  return labels;
}

Detection detect(const ImagePatch& patch, const stain::StainProfile& profile, const WatershedParams& params) {
  params.validate();
  const double scale = patch.scale();
  const int w = patch.width();
  const int h = patch.height();
  const stain::ConcentrationMap conc = stain::deconvolve(patch, profile);
  const std::vector<double> smooth = preprocess(conc, params, scale);

  Mask fg(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (smooth[static_cast<std::size_t>(y) * w + x] >= params.intensity_threshold) fg.set(x, y);
    }
  }
  const LabelMap basins = flood(smooth, fg, seed_pixels(smooth, fg, params.h_maxima_depth));
  std::vector<std::optional<Polygon>> outlines = trace_labels(basins);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < outlines.size(); ++i) {
    if (outlines[i]) outlines[i] = smooth_outline(*outlines[i]);
  }

  // Area filter on the traced outline, so the reported area is what is checked.
  const double px_area = scale * scale;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < outlines.size(); ++i) {
    if (!outlines[i]) continue;
    const double a = outlines[i]->area() * px_area;
    if (a >= params.min_area_um2 && a <= params.max_area_um2) candidates.push_back(i);
  }

  // A basin wrapped around another fills over it once holes are closed; the
  // larger outline claims pixels first and overlapping ones are dropped.
  std::vector<std::size_t> by_area = candidates;
  std::stable_sort(by_area.begin(), by_area.end(),
                   [&](std::size_t a, std::size_t b) { return outlines[a]->area() > outlines[b]->area(); });
  Mask occupied(w, h);
  std::vector<Mask> masks(outlines.size());
  std::vector<std::size_t> kept;
  for (std::size_t i : by_area) {
    Mask m = rasterize(*outlines[i], w, h);
    bool clash = false;
    for (int y = 0; y < h && !clash; ++y) {
      const std::uint8_t* a = m.row(y);
      const std::uint8_t* b = occupied.row(y);
      for (int x = 0; x < w; ++x) {
        if (a[x] && b[x]) {
          clash = true;
          break;
        }
      }
    }
    if (clash) continue;
    for (int y = 0; y < h; ++y) {
      std::uint8_t* b = occupied.row(y);
      const std::uint8_t* a = m.row(y);
      for (int x = 0; x < w; ++x) b[x] |= a[x];
    }
    masks[i] = std::move(m);
    kept.push_back(i);
  }

  // Output order: first pixel of each region in raster order.
  std::vector<std::size_t> first(outlines.size(), static_cast<std::size_t>(-1));
  for (std::size_t i : kept) {
    const Mask& m = masks[i];
    for (std::size_t p = 0; p < static_cast<std::size_t>(w) * h; ++p) {
      if (m.get(static_cast<int>(p % w), static_cast<int>(p / w))) {
        first[i] = p;
        break;
      }
    }
  }
  std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) { return first[a] < first[b]; });

  Detection out;
  out.labels = LabelMap(w, h);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::size_t i = kept[k];
    const Mask& m = masks[i];
    for (int y = 0; y < h; ++y) {
      const std::uint8_t* row = m.row(y);
      for (int x = 0; x < w; ++x) {
        if (row[x]) out.labels.at(x, y) = static_cast<int>(k) + 1;
      }
    }
    out.nuclei.push_back(
        CellInstance{patch.patch_id() + "-n" + std::to_string(k + 1), patch.patch_id(), *outlines[i], std::nullopt,
                     std::nullopt, Source::Predicted});
  }
  return out;
}

std::vector<CellInstance> detect_nuclei(const ImagePatch& patch, const stain::StainProfile& profile,
                                        const WatershedParams& params) {
  return detect(patch, profile, params).nuclei;
}

}  // namespace cytobench::watershed
