#include "cytobench/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "cytobench/error.hpp"

namespace cytobench::eval {

double mask_iou(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw InvalidArgument("mask dimensions differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (int y = 0; y < a.height(); ++y) {
    const std::uint8_t* ra = a.row(y);
    const std::uint8_t* rb = b.row(y);
    for (int x = 0; x < a.width(); ++x) {
      inter += (ra[x] & rb[x]);
      uni += (ra[x] | rb[x]);
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BoxedMask boxed_mask(const Polygon& poly, int width, int height) {
  const Mask m = rasterize(poly, width, height);
  BoxedMask out;
  out.box = m.bounds();
  if (out.box.empty()) return out;
  const int bw = out.box.x1 - out.box.x0 + 1;
  const int bh = out.box.y1 - out.box.y0 + 1;
  out.bits.resize(static_cast<std::size_t>(bw) * bh);
  for (int y = 0; y < bh; ++y) {
    const std::uint8_t* row = m.row(out.box.y0 + y) + out.box.x0;
    std::copy(row, row + bw, out.bits.begin() + static_cast<std::ptrdiff_t>(y) * bw);
  }
  out.area = m.count();
  return out;
}

double iou(const BoxedMask& a, const BoxedMask& b) {
  const std::size_t uni_base = a.area + b.area;
  if (uni_base == 0) return 0.0;
  std::size_t inter = 0;
  const PixelBox o = intersect(a.box, b.box);
  if (!a.box.empty() && !b.box.empty() && !o.empty()) {
    const int aw = a.box.x1 - a.box.x0 + 1;
    const int bw = b.box.x1 - b.box.x0 + 1;
    for (int y = o.y0; y <= o.y1; ++y) {
      const std::uint8_t* ra = a.bits.data() + static_cast<std::size_t>(y - a.box.y0) * aw - a.box.x0;
      const std::uint8_t* rb = b.bits.data() + static_cast<std::size_t>(y - b.box.y0) * bw - b.box.x0;
      for (int x = o.x0; x <= o.x1; ++x) inter += (ra[x] & rb[x]);
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni_base - inter);
}

namespace {

struct Ranked {
  double score;
  double area;
  std::size_t patch;
  std::size_t index;
  bool tp;
};

bool ranks_before(const Ranked& a, const Ranked& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.area != b.area) return a.area > b.area;
  if (a.patch != b.patch) return a.patch < b.patch;
  return a.index < b.index;
}

}  // namespace

MatchResult match(std::span<const PatchDetections> patches, double iou_threshold) {
  std::vector<Ranked> all;
  std::size_t num_gold = 0;
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const PatchDetections& pd = patches[p];
    const std::size_t n = pd.scores.size();
    if (pd.areas.size() != n || pd.iou.size() != n) throw InvalidArgument("detection tables differ in length");
    num_gold += pd.num_gold;
    std::vector<Ranked> local(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (pd.iou[i].size() != pd.num_gold) throw InvalidArgument("IoU row length differs from gold count");
      local[i] = {pd.scores[i], pd.areas[i], p, i, false};
    }
    std::sort(local.begin(), local.end(), ranks_before);
    std::vector<bool> taken(pd.num_gold, false);
    for (Ranked& r : local) {
      std::size_t best = pd.num_gold;
      double best_iou = iou_threshold;
      for (std::size_t g = 0; g < pd.num_gold; ++g) {
        const double v = pd.iou[r.index][g];
        if (taken[g] || v < iou_threshold) continue;
        if (best == pd.num_gold || v > best_iou) {
          best = g;
          best_iou = v;
        }
      }
      if (best != pd.num_gold) {
        taken[best] = true;
        r.tp = true;
      }
    }
    all.insert(all.end(), local.begin(), local.end());
  }
  std::sort(all.begin(), all.end(), ranks_before);
  MatchResult m;
  m.num_gold = num_gold;
  m.iou_threshold = iou_threshold;
  m.true_positive.reserve(all.size());
  m.scores.reserve(all.size());
  for (const Ranked& r : all) {
    m.true_positive.push_back(r.tp);
    m.scores.push_back(r.score);
  }
  return m;
}

double average_precision(const MatchResult& m) {
  if (m.num_gold == 0) throw InvalidArgument("average precision needs at least one gold instance");
  const std::size_t n = m.true_positive.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (m.true_positive[i]) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(m.num_gold);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return 100.0 * sum / 101.0;
}

double average_precision(std::span<const PatchDetections> patches, double iou_threshold) {
  return average_precision(match(patches, iou_threshold));
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("KS statistic needs two nonempty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (j == sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
      x = sa[i];
    } else {
      x = sb[j];
    }
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

PatchEval make_patch_eval(std::string patch_id, int width, int height, std::span<const CellInstance> predicted,
                          std::span<const CellInstance> gold, std::span<const Polygon> unpaired_gold_cells) {
  PatchEval pe;
  pe.patch_id = std::move(patch_id);
  pe.width = width;
  pe.height = height;
  for (const CellInstance& c : predicted) {
    pe.pred_nuclei.polygons.push_back(c.nucleus);
    pe.pred_nuclei.scores.push_back(c.score());
    if (c.cell) {
      pe.pred_cells.polygons.push_back(*c.cell);
      pe.pred_cells.scores.push_back(c.score());
    }
  }
  for (const CellInstance& c : gold) {
    pe.gold_nuclei.polygons.push_back(c.nucleus);
    pe.gold_nuclei.scores.push_back(1.0);
    if (c.cell) {
      pe.gold_cells.polygons.push_back(*c.cell);
      pe.gold_cells.scores.push_back(1.0);
    }
  }
  for (const Polygon& p : unpaired_gold_cells) {
    pe.gold_cells.polygons.push_back(p);
    pe.gold_cells.scores.push_back(1.0);
  }
  return pe;
}

std::vector<PatchDetections> detections_for(std::span<const PatchEval> patches, Class cls) {
  std::vector<PatchDetections> out(patches.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const PatchEval& pe = patches[p];
    const ClassInstances& pred = cls == Class::Nucleus ? pe.pred_nuclei : pe.pred_cells;
    const ClassInstances& gold = cls == Class::Nucleus ? pe.gold_nuclei : pe.gold_cells;
    std::vector<BoxedMask> gm;
    for (const Polygon& g : gold.polygons) gm.push_back(boxed_mask(g, pe.width, pe.height));
    PatchDetections& pd = out[p];
    pd.num_gold = gold.polygons.size();
    pd.scores = pred.scores;
    for (const Polygon& d : pred.polygons) {
      const BoxedMask dm = boxed_mask(d, pe.width, pe.height);
      pd.areas.push_back(static_cast<double>(dm.area));
      std::vector<double> row(gm.size());
      for (std::size_t g = 0; g < gm.size(); ++g) row[g] = iou(dm, gm[g]);
      pd.iou.push_back(std::move(row));
    }
  }
  return out;
}

EvalReport build_report(std::span<const PatchEval> patches, std::span<const morph::FeatureRecord> features_pred,
                        std::span<const morph::FeatureRecord> features_gold) {
  EvalReport r;
  for (const PatchEval& pe : patches) {
    r.num_pred_nuclei += pe.pred_nuclei.polygons.size();
    r.num_pred_cells += pe.pred_cells.polygons.size();
    r.num_gold_nuclei += pe.gold_nuclei.polygons.size();
    r.num_gold_cells += pe.gold_cells.polygons.size();
  }
  const auto nuc = detections_for(patches, Class::Nucleus);
  const auto cell = detections_for(patches, Class::Cell);
  r.ap50_nucleus = average_precision(nuc, 0.5);
  r.ap75_nucleus = average_precision(nuc, 0.75);
  r.ap50_cell = average_precision(cell, 0.5);
  r.ap75_cell = average_precision(cell, 0.75);

  if (!features_pred.empty() && !features_gold.empty()) {
    std::array<double, morph::kFeatureCount> ks{};
    std::vector<double> a(features_pred.size());
    std::vector<double> b(features_gold.size());
    double sum = 0.0;
    for (std::size_t f = 0; f < morph::kFeatureCount; ++f) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = features_pred[i].values[f];
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = features_gold[i].values[f];
      ks[f] = ks_statistic(a, b);
      sum += ks[f];
    }
    r.ks = ks;
    r.mean_d = sum / static_cast<double>(morph::kFeatureCount);
  }
  return r;
}

}  // namespace cytobench::eval
