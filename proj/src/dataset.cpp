#include "cytobench/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <json.hpp>

#include "cytobench/error.hpp"

namespace cytobench::io {

using Json = nlohmann::ordered_json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

enum class Category { Nucleus, Cell, Unknown };

Category category_of(const std::string& name) {
  const std::string n = lower(name);
  if (n.find("nucle") != std::string::npos) return Category::Nucleus;
  if (n.find("cell") != std::string::npos || n.find("cyto") != std::string::npos) return Category::Cell;
  return Category::Unknown;
}

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::string id_string(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return v.dump();
  throw ParseError("annotation id must be a string or a number");
}

Polygon ring_from_flat(const Json& flat) {
  if (!flat.is_array() || flat.size() % 2 != 0) throw GeometryError("ring must be a flat list of x, y pairs");
  std::vector<Point> pts;
  for (std::size_t i = 0; i < flat.size(); i += 2) {
    if (!flat[i].is_number() || !flat[i + 1].is_number()) throw GeometryError("non-numeric coordinate");
    pts.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
  }
  return Polygon(pts);
}

// Largest valid ring of a COCO polygon segmentation.
Polygon polygon_from_segmentation(const Json& seg) {
  if (seg.is_object()) throw GeometryError("RLE segmentations are not supported");
  if (!seg.is_array() || seg.empty()) throw GeometryError("empty segmentation");
  if (seg.front().is_number()) return ring_from_flat(seg);
  std::optional<Polygon> best;
  std::string last_error = "no ring";
  for (const Json& ring : seg) {
    try {
      Polygon p = ring_from_flat(ring);
      if (!best || p.area() > best->area()) best = std::move(p);
    } catch (const GeometryError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw GeometryError(last_error);
  return *best;
}

std::optional<double> confidence_of(const Json& a) {
  for (const char* key : {"score", "confidence"}) {
    if (a.contains(key) && !a.at(key).is_null()) {
      if (!a.at(key).is_number()) throw ParseError(std::string("'") + key + "' must be a number");
      return a.at(key).get<double>();
    }
  }
  return std::nullopt;
}

std::string stem_of(const std::string& file_name) { return std::filesystem::path(file_name).stem().string(); }

std::string parent_of(const std::string& file_name) {
  const std::filesystem::path p(file_name);
  return p.has_parent_path() ? p.parent_path().filename().string() : std::string();
}

Json ring_to_flat(const Polygon& p) {
  Json flat = Json::array();
  for (const Point& v : p.vertices()) {
    flat.push_back(v.x);
    flat.push_back(v.y);
  }
  return flat;
}

}  // namespace

std::size_t CocoDataset::cell_count() const {
  std::size_t n = unpaired_cells.size();
  for (const CellInstance& c : instances) n += c.cell ? 1 : 0;
  return n;
}

CocoDataset parse_coco(std::string_view json_text, Source source) {
  Json root;
  try {
    root = Json::parse(json_text.begin(), json_text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte == 0 ? 0 : e.byte - 1);
  }
  CocoDataset ds;
  try {
    const Json& images = require(root, "images");
    const Json& annotations = require(root, "annotations");
    const Json& categories = require(root, "categories");
    if (!images.is_array() || !annotations.is_array() || !categories.is_array()) {
      throw ParseError("images, annotations and categories must be arrays");
    }

    std::map<std::int64_t, Category> cats;
    for (const Json& c : categories) {
      cats[require(c, "id").get<std::int64_t>()] = category_of(require(c, "name").get<std::string>());
    }

    std::map<std::int64_t, std::size_t> image_index;
    std::set<std::string> seen_patches;
    for (const Json& im : images) {
      PatchInfo p;
      p.image_id = require(im, "id").get<std::int64_t>();
      p.file_name = require(im, "file_name").get<std::string>();
      p.width = require(im, "width").get<int>();
      p.height = require(im, "height").get<int>();
      p.patch_id = stem_of(p.file_name);
      if (im.contains("patient_id")) {
        p.patient_id = id_string(im.at("patient_id"));
      } else {
        p.patient_id = parent_of(p.file_name);
      }
      if (p.patient_id.empty()) {
        p.patient_id = p.patch_id;
        ds.warnings.push_back("image " + p.file_name + " has no patient id; treated as its own patient");
      }
      if (!seen_patches.insert(p.patch_id).second) throw ParseError("duplicate patch id '" + p.patch_id + "'");
      if (!image_index.emplace(p.image_id, ds.patches.size()).second) {
        throw ParseError("duplicate image id " + std::to_string(p.image_id));
      }
      ds.patches.push_back(std::move(p));
    }

    struct Pending {
      std::string id;
      Polygon poly;
      std::optional<double> confidence;
    };
    std::vector<std::vector<Pending>> nuclei(ds.patches.size());
    std::vector<std::vector<Pending>> cells(ds.patches.size());
    std::vector<std::vector<CellInstance>> nested(ds.patches.size());

    for (const Json& a : annotations) {
      const std::string id = id_string(require(a, "id"));
      const std::int64_t image_id = require(a, "image_id").get<std::int64_t>();
      const auto im = image_index.find(image_id);
      if (im == image_index.end()) {
        ds.rejected.push_back({id, "unknown image id " + std::to_string(image_id)});
        continue;
      }
      const auto cat = cats.find(require(a, "category_id").get<std::int64_t>());
      if (cat == cats.end() || cat->second == Category::Unknown) {
        ds.rejected.push_back({id, "unknown category"});
        continue;
      }
      const std::optional<double> conf = confidence_of(a);
      if (conf && !(*conf >= 0.0 && *conf <= 1.0)) {
        ds.rejected.push_back({id, "confidence outside [0, 1]"});
        continue;
      }
      try {
        Polygon poly = polygon_from_segmentation(require(a, "segmentation"));
        const std::string& patch_id = ds.patches[im->second].patch_id;
        if (cat->second == Category::Cell && a.contains("nucleus_segmentation")) {
          CellInstance inst{id, patch_id, polygon_from_segmentation(a.at("nucleus_segmentation")), std::move(poly),
                            conf, source};
          inst.validate();
          nested[im->second].push_back(std::move(inst));
        } else if (cat->second == Category::Nucleus) {
          nuclei[im->second].push_back({id, std::move(poly), conf});
        } else {
          cells[im->second].push_back({id, std::move(poly), conf});
        }
      } catch (const GeometryError& e) {
        ds.rejected.push_back({id, e.what()});
      } catch (const InvalidArgument& e) {
        ds.rejected.push_back({id, e.what()});
      }
    }

    for (std::size_t p = 0; p < ds.patches.size(); ++p) {
      const std::string& patch_id = ds.patches[p].patch_id;
      const auto& ns = nuclei[p];
      const auto& cs = cells[p];
      std::vector<std::vector<std::size_t>> cells_of_nucleus(ns.size());
      std::vector<std::vector<std::size_t>> nuclei_of_cell(cs.size());
      for (std::size_t i = 0; i < ns.size(); ++i) {
        const Point c = ns[i].poly.centroid();
        for (std::size_t j = 0; j < cs.size(); ++j) {
          if (cs[j].poly.contains(c)) {
            cells_of_nucleus[i].push_back(j);
            nuclei_of_cell[j].push_back(i);
          }
        }
      }
      std::vector<bool> cell_used(cs.size(), false);
      for (std::size_t i = 0; i < ns.size(); ++i) {
        CellInstance inst{ns[i].id, patch_id, ns[i].poly, std::nullopt, ns[i].confidence, source};
        const auto& cand = cells_of_nucleus[i];
        if (cand.size() == 1 && nuclei_of_cell[cand[0]].size() == 1) {
          inst.cell = cs[cand[0]].poly;
          if (!inst.confidence) inst.confidence = cs[cand[0]].confidence;
          cell_used[cand[0]] = true;
        } else if (cand.size() > 1) {
          ds.warnings.push_back("nucleus " + ns[i].id + " lies in " + std::to_string(cand.size()) +
                                " cells; left unpaired");
        } else if (cand.size() == 1) {
          ds.warnings.push_back("cell " + cs[cand[0]].id + " holds " + std::to_string(nuclei_of_cell[cand[0]].size()) +
                                " nucleus centroids; left unpaired");
        }
        ds.instances.push_back(std::move(inst));
      }
      for (CellInstance& inst : nested[p]) ds.instances.push_back(std::move(inst));
      for (std::size_t j = 0; j < cs.size(); ++j) {
        if (!cell_used[j]) ds.unpaired_cells.push_back({cs[j].id, patch_id, cs[j].poly});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("unexpected COCO structure: ") + e.what());
  }
  return ds;
}

std::string write_coco(std::span<const PatchInfo> patches, std::span<const CellInstance> instances) {
  Json root;
  Json images = Json::array();
  std::map<std::string, std::int64_t> image_of;
  for (const PatchInfo& p : patches) {
    images.push_back({{"id", p.image_id},
                      {"file_name", p.file_name},
                      {"width", p.width},
                      {"height", p.height},
                      {"patient_id", p.patient_id}});
    image_of[p.patch_id] = p.image_id;
  }
  Json anns = Json::array();
  for (const CellInstance& c : instances) {
    const auto im = image_of.find(c.patch_id);
    if (im == image_of.end()) throw InvalidArgument("instance " + c.id + " refers to an unknown patch");
    Json a;
    a["id"] = c.id;
    a["image_id"] = im->second;
    a["category_id"] = c.cell ? 2 : 1;
    a["segmentation"] = Json::array({ring_to_flat(c.cell ? *c.cell : c.nucleus)});
    if (c.cell) a["nucleus_segmentation"] = Json::array({ring_to_flat(c.nucleus)});
    const Box b = (c.cell ? *c.cell : c.nucleus).bounds();
    a["bbox"] = {b.x, b.y, b.w, b.h};
    a["area"] = (c.cell ? *c.cell : c.nucleus).area();
    a["iscrowd"] = 0;
    if (c.confidence) a["score"] = *c.confidence;
    anns.push_back(std::move(a));
  }
  root["images"] = std::move(images);
  root["annotations"] = std::move(anns);
  root["categories"] = Json::array({{{"id", 1}, {"name", "nucleus"}}, {{"id", 2}, {"name", "cell"}}});
  return root.dump(1) + "\n";
}

SplitName parse_split_name(std::string_view s) {
  const std::string n = lower(s);
  if (n == "train") return SplitName::Train;
  if (n == "validation" || n == "val") return SplitName::Validation;
  if (n == "test") return SplitName::Test;
  throw InvalidArgument("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::Train: return "train";
    case SplitName::Validation: return "validation";
    case SplitName::Test: return "test";
  }
  return "?";
}

const std::vector<std::string>& patches_of(const DatasetSplit& s, SplitName which) {
  switch (which) {
    case SplitName::Train: return s.train;
    case SplitName::Validation: return s.validation;
    case SplitName::Test: return s.test;
  }
  return s.test;
}

DatasetSplit split_by_patient(std::span<const PatchInfo> patches, std::array<double, 3> fractions,
                              std::uint64_t seed) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("split fractions must sum to 1");
  for (double f : fractions) {
    if (!(f >= 0.0)) throw InvalidArgument("split fractions must be non-negative");
  }
  std::map<std::string, std::size_t> patch_count;
  for (const PatchInfo& p : patches) ++patch_count[p.patient_id];
  if (patch_count.size() < 3) throw InvalidArgument("need at least three patients to split");

  std::vector<std::string> patients;
  for (const auto& [id, n] : patch_count) patients.push_back(id);
  // Fisher-Yates with rejection sampling, so the order depends only on the
  // 64-bit engine and not on the library's distribution code.
  std::mt19937_64 rng(seed);
  for (std::size_t i = patients.size() - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(patients[i], patients[static_cast<std::size_t>(r % bound)]);
  }

  const double total = static_cast<double>(patches.size());
  std::array<double, 3> have{0.0, 0.0, 0.0};
  std::map<std::string, int> split_of;
  for (std::size_t k = 0; k < patients.size(); ++k) {
    int target = static_cast<int>(k);
    if (k >= 3) {
      target = 0;
      double best = fractions[0] * total - have[0];
      for (int s = 1; s < 3; ++s) {
        const double deficit = fractions[static_cast<std::size_t>(s)] * total - have[static_cast<std::size_t>(s)];
        if (deficit > best) {
          best = deficit;
          target = s;
        }
      }
    }
    split_of[patients[k]] = target;
    have[static_cast<std::size_t>(target)] += static_cast<double>(patch_count[patients[k]]);
  }
  DatasetSplit out;
  for (const PatchInfo& p : patches) {
    const int s = split_of[p.patient_id];
    (s == 0 ? out.train : s == 1 ? out.validation : out.test).push_back(p.patch_id);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InvalidArgument("cannot write " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cytobench::io
