#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cytobench/cell.hpp"
#include "cytobench/morphometry.hpp"
#include "cytobench/raster.hpp"

namespace cytobench::eval {

// |a ∩ b| / |a ∪ b|, 0 when both are empty. Throws on a size mismatch.
double mask_iou(const Mask& a, const Mask& b);

// A rasterized polygon stored only over its bounding box.
struct BoxedMask {
  PixelBox box;
  std::vector<std::uint8_t> bits;  // row-major over box
  std::size_t area = 0;
};

BoxedMask boxed_mask(const Polygon& poly, int width, int height);
double iou(const BoxedMask& a, const BoxedMask& b);

// Detections of one class on one patch: scores, mask areas, and the IoU of
// every detection with every gold instance (iou[d][g]).
struct PatchDetections {
  std::vector<double> scores;
  std::vector<double> areas;
  std::vector<std::vector<double>> iou;
  std::size_t num_gold = 0;
};

struct MatchResult {
  std::vector<bool> true_positive;  // in global ranking order
  std::vector<double> scores;       // same order
  std::size_t num_gold = 0;
  double iou_threshold = 0.5;
};

// Within a patch, detections are ranked by score (descending), then larger
// area, then lower index, and each takes the unmatched gold instance of
// highest IoU >= threshold (lower gold index on ties). The global ranking
// breaks remaining ties by patch order.
MatchResult match(std::span<const PatchDetections> patches, double iou_threshold);

// 101-point interpolated average precision, in percent. Throws InvalidArgument
// when there is no gold instance.
double average_precision(const MatchResult& m);
double average_precision(std::span<const PatchDetections> patches, double iou_threshold);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b| with right-continuous
// empirical CDFs. Throws InvalidArgument on an empty sample.
double ks_statistic(std::span<const double> a, std::span<const double> b);

// Polygons of one class with detection scores (gold instances carry 1).
struct ClassInstances {
  std::vector<Polygon> polygons;
  std::vector<double> scores;
};

struct PatchEval {
  std::string patch_id;
  int width = 0;
  int height = 0;
  ClassInstances pred_nuclei;
  ClassInstances pred_cells;
  ClassInstances gold_nuclei;
  ClassInstances gold_cells;
};

// Splits instances into the two classes. Gold cells without a nucleus
// (unpaired annotations) are passed separately and count as gold cells.
PatchEval make_patch_eval(std::string patch_id, int width, int height, std::span<const CellInstance> predicted,
                          std::span<const CellInstance> gold, std::span<const Polygon> unpaired_gold_cells = {});

enum class Class { Nucleus, Cell };

// IoU tables for one class; patches run in parallel.
std::vector<PatchDetections> detections_for(std::span<const PatchEval> patches, Class cls);

struct EvalReport {
  double ap50_nucleus = 0.0;
  double ap75_nucleus = 0.0;
  double ap50_cell = 0.0;
  double ap75_cell = 0.0;
  std::size_t num_pred_nuclei = 0;
  std::size_t num_pred_cells = 0;
  std::size_t num_gold_nuclei = 0;
  std::size_t num_gold_cells = 0;
  // Per feature in morph::kFeatureNames order; absent without feature tables.
  std::optional<std::array<double, morph::kFeatureCount>> ks;
  std::optional<double> mean_d;
};

// Four AP values, plus the KS statistics when both feature tables are
// nonempty. Throws InvalidArgument when a class has no gold instance.
EvalReport build_report(std::span<const PatchEval> patches, std::span<const morph::FeatureRecord> features_pred,
                        std::span<const morph::FeatureRecord> features_gold);

std::string report_to_json(const EvalReport& r, const std::string& model_name);

// Plain-text tables: the run next to published reference values.
std::string report_to_text(const EvalReport& r, const std::string& model_name);

struct NamedReport {
  std::string model;
  EvalReport report;
};

// One "this run" row and column per entry, in the given order.
std::string report_to_text(std::span<const NamedReport> runs);

// Inverse of report_to_json. Throws ParseError.
NamedReport report_from_json(std::string_view text);

// Published results of the compared methods, for side-by-side display only.
struct ReferenceRow {
  std::string_view model;
  double ap50_nucleus, ap75_nucleus, ap50_cell, ap75_cell;
  double mean_d;  // NaN where none was published
  std::array<double, morph::kFeatureCount> ks;
};
std::span<const ReferenceRow> reference_rows();

}  // namespace cytobench::eval
