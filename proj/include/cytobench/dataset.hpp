#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cytobench/cell.hpp"
#include "cytobench/morphometry.hpp"

namespace cytobench::io {

// One image entry of a COCO file.
struct PatchInfo {
  std::int64_t image_id = 0;
  std::string patch_id;    // file name stem
  std::string patient_id;  // `patient_id` field, else the directory part of file_name
  std::string file_name;
  int width = 0;
  int height = 0;
};

// A cell annotation with no nucleus paired to it.
struct UnpairedCell {
  std::string id;
  std::string patch_id;
  Polygon cell;
};

struct Rejected {
  std::string id;
  std::string reason;
};

struct CocoDataset {
  std::vector<PatchInfo> patches;
  std::vector<CellInstance> instances;  // one per nucleus, with its cell when paired
  std::vector<UnpairedCell> unpaired_cells;
  std::vector<Rejected> rejected;
  std::vector<std::string> warnings;

  std::size_t nucleus_count() const { return instances.size(); }
  std::size_t cell_count() const;
};

// Reads COCO instance annotations. Categories whose name contains "nucle"
// (any case) are nuclei, names containing "cell" or "cyto" are cells.
// Segmentations are flat [x0, y0, x1, y1, ...] rings; with several rings the
// largest valid one is used. A cell annotation may carry its nucleus inline
// as `nucleus_segmentation`. Otherwise a nucleus and a cell of the same image
// are paired when the nucleus centroid lies in exactly that one cell and no
// other nucleus centroid lies in it; anything else stays unpaired and is
// logged in warnings. Confidence comes from `score` or `confidence`.
// Throws ParseError (with byte offset for syntax errors) on malformed input.
CocoDataset parse_coco(std::string_view json_text, Source source = Source::Gold);

// Predictions in the nested form parse_coco reads back.
std::string write_coco(std::span<const PatchInfo> patches, std::span<const CellInstance> instances);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

enum class SplitName { Train, Validation, Test };
SplitName parse_split_name(std::string_view s);  // "train", "validation"/"val", "test"
std::string_view to_string(SplitName s);
const std::vector<std::string>& patches_of(const DatasetSplit& s, SplitName which);

// Patient-level split. Patients are shuffled with the seed, one goes to each
// split, and each remaining patient joins the split furthest below its target
// patch count (ties: train, validation, test). Patch lists keep input order.
// Throws InvalidArgument with fewer than three patients or fractions not
// summing to 1.
DatasetSplit split_by_patient(std::span<const PatchInfo> patches, std::array<double, 3> fractions,
                              std::uint64_t seed);

// FeatureCollection; whole cells carry the nucleus ring in `nucleusGeometry`.
std::string export_geojson(std::span<const CellInstance> instances);
std::vector<CellInstance> parse_geojson(std::string_view text);

// `instance_id,patch_id,<17 feature names>` then one row per record.
std::string export_feature_csv(std::span<const morph::FeatureRecord> records);
std::vector<morph::FeatureRecord> parse_feature_csv(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace cytobench::io
