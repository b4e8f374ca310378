#include "workspace.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>

#include "cytobench/error.hpp"
#include "cytobench/stain.hpp"

namespace cytobench::cli {

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string relative_label(const fs::path& path, const fs::path& root, const std::string& label) {
  return label + "/" + path.lexically_relative(root).generic_string();
}

}  // namespace

std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Workspace load_workspace(const Context& ctx) {
  if (ctx.data.empty()) throw UsageError("no dataset root given (--data)");
  if (!fs::is_directory(ctx.data)) throw UsageError("dataset root " + ctx.data.string() + " does not exist");
  Workspace ws;
  ws.annotations_path = ctx.data / ctx.cfg.get("annotations").value_or("annotations.json");
  if (!fs::is_regular_file(ws.annotations_path)) {
    throw DataError("annotation file " + ws.annotations_path.string() + " not found");
  }
  try {
    ws.gold = io::parse_coco(io::read_file(ws.annotations_path), Source::Gold);
  } catch (const ParseError& e) {
    throw DataError(ws.annotations_path.string() + ": " + e.what());
  }

  std::vector<io::PatchInfo> selected;
  if (ctx.split == "all") {
    selected = ws.gold.patches;
  } else {
    try {
      ws.split = io::split_by_patient(ws.gold.patches, {0.70, 0.15, 0.15}, ctx.seed);
    } catch (const InvalidArgument& e) {
      throw DataError(std::string("cannot split the dataset: ") + e.what());
    }
    const auto& ids = io::patches_of(ws.split, io::parse_split_name(ctx.split));
    for (const io::PatchInfo& p : ws.gold.patches) {
      if (std::find(ids.begin(), ids.end(), p.patch_id) != ids.end()) selected.push_back(p);
    }
  }
  std::sort(selected.begin(), selected.end(),
            [](const io::PatchInfo& a, const io::PatchInfo& b) { return a.patch_id < b.patch_id; });
  ws.patches = std::move(selected);
  return ws;
}

fs::path normalized_dir(const Context& ctx) { return ctx.out / "normalized"; }

fs::path model_dir(const Context& ctx, const std::string& model) { return ctx.out / "models" / model; }

ImagePatch load_patch(const Context& ctx, const io::PatchInfo& info, fs::path* used) {
  const fs::path dir = normalized_dir(ctx);
  if (!fs::is_directory(dir)) throw DataError("no normalized patches under " + dir.string() + "; run normalize first");
  fs::path path = dir / (info.patch_id + ".png");
  if (!fs::is_regular_file(path)) path = ctx.data / info.file_name;
  ImagePatch patch;
  try {
    patch = read_png(path, ctx.scale);
  } catch (const Error& e) {
    throw DataError(e.what());
  }
  if (patch.width() != info.width || patch.height() != info.height) {
    throw DataError(path.string() + " is " + std::to_string(patch.width()) + "x" + std::to_string(patch.height()) +
                    " but its annotation says " + std::to_string(info.width) + "x" + std::to_string(info.height));
  }
  patch.set_ids(info.patient_id, info.patch_id);
  if (used) *used = path;
  return patch;
}

InstancesByPatch group_by_patch(const std::vector<CellInstance>& instances) {
  InstancesByPatch out;
  for (const CellInstance& c : instances) out[c.patch_id].push_back(c);
  return out;
}

io::CocoDataset load_model(const Context& ctx, const Workspace& ws, const std::string& model, fs::path* used) {
  if (model == "gold") {
    if (used) *used = ws.annotations_path;
    return ws.gold;
  }
  const fs::path path = model_dir(ctx, model) / "predictions.json";
  if (!fs::is_regular_file(path)) throw DataError("model '" + model + "' has no predictions at " + path.string());
  if (used) *used = path;
  try {
    return io::parse_coco(io::read_file(path), Source::Predicted);
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<morph::FeatureRecord> compute_features(const Context& ctx, const std::vector<io::PatchInfo>& patches,
                                                   const InstancesByPatch& instances) {
  const stain::StainProfile profile = stain::reference_profile();
  const auto per_patch = parallel_slots<std::vector<morph::FeatureRecord>>(patches.size(), ctx.jobs, [&](std::size_t i) {
    std::vector<morph::FeatureRecord> recs;
    const auto it = instances.find(patches[i].patch_id);
    if (it == instances.end()) return recs;
    const bool any_cell = std::any_of(it->second.begin(), it->second.end(), [](const CellInstance& c) { return c.cell.has_value(); });
    if (!any_cell) return recs;
    const ImagePatch img = load_patch(ctx, patches[i]);
    const stain::ConcentrationMap conc = stain::deconvolve(img, profile);
    for (const CellInstance& c : it->second) {
      if (c.cell) recs.push_back(morph::feature_record(c, conc, ctx.scale));
    }
    return recs;
  });
  std::vector<morph::FeatureRecord> all;
  for (const auto& v : per_patch) all.insert(all.end(), v.begin(), v.end());
  return all;
}

Manifest::Manifest(std::string command, const Context& ctx) : command_(std::move(command)) {
  for (const auto& [k, v] : ctx.cfg.entries()) {
    if (k == "jobs" || k == "out" || k == "config") continue;
    snapshot_.set(k, v);
  }
  snapshot_.set("data", ctx.data.generic_string());
  snapshot_.set("split", ctx.split);
  snapshot_.set("seed", std::to_string(ctx.seed));
  snapshot_.set("scale", format_double(ctx.scale));
}

void Manifest::add_input(const fs::path& path, const fs::path& root, const std::string& label) {
  inputs_.emplace_back(relative_label(path, root, label), fnv1a64(io::read_file(path)));
}

void Manifest::add_input_bytes(const std::string& name, std::string_view bytes) {
  inputs_.emplace_back(name, fnv1a64(bytes));
}

void Manifest::add_output(const std::string& name, std::string_view bytes) { outputs_.emplace_back(name, fnv1a64(bytes)); }

void Manifest::write_output(const fs::path& out_root, const std::string& name, std::string_view content) {
  io::write_file(out_root / name, content);
  add_output(name, content);
}

std::string Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["version"] = kToolVersion;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : snapshot_.entries()) cfg[k] = v;
  j["config"] = std::move(cfg);
  auto files = [](const std::vector<std::pair<std::string, std::string>>& list) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& [name, digest] : list) a.push_back({{"path", name}, {"fnv1a64", digest}});
    return a;
  };
  j["inputs"] = files(inputs_);
  j["outputs"] = files(outputs_);
  return j.dump(2) + "\n";
}

}  // namespace cytobench::cli
