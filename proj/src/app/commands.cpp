#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <json.hpp>

#include "cytobench/cyto.hpp"
#include "cytobench/error.hpp"
#include "cytobench/evaluation.hpp"
#include "cytobench/expansion.hpp"
#include "cytobench/stain.hpp"
#include "cytobench/sweep.hpp"
#include "cytobench/watershed.hpp"

namespace cytobench::cli {

namespace {

double require_double(const Context& ctx, const std::string& key, double fallback) {
  try {
    return ctx.cfg.get_double(key, fallback);
  } catch (const ParseError& e) {
    throw UsageError(key + ": " + e.what());
  }
}

std::string require_string(const Context& ctx, const std::string& key) {
  const auto v = ctx.cfg.get(key);
  if (!v || v->empty()) throw UsageError("missing --" + key);
  return *v;
}

stain::StainProfile target_profile(const Context& ctx, Manifest& manifest) {
  const std::string spec = ctx.cfg.get("stain_target").value_or("reference");
  if (spec == "reference") return stain::reference_profile();
  try {
    const std::string text = io::read_file(spec);
    manifest.add_input_bytes("stain_target", text);
    return stain::profile_from_json(text);
  } catch (const Error& e) {
    throw UsageError("stain_target " + spec + ": " + e.what());
  }
}

watershed::WatershedParams resolve_params(const std::string& spec, std::string& label, Manifest& manifest) {
  if (spec == "default") {
    label = "default";
    return watershed::default_params();
  }
  if (spec == "finetuned") {
    label = "finetuned";
    return watershed::finetuned_params();
  }
  if (spec.rfind("file:", 0) != 0) throw UsageError("--params must be default, finetuned or file:<path>");
  const fs::path path = spec.substr(5);
  try {
    const Config pc = Config::load(path);
    pc.require_known(watershed::kParamKeys);
    manifest.add_input_bytes("params", io::read_file(path));
    label = path.stem().string();
    return watershed::params_from_config(pc, watershed::default_params());
  } catch (const Error& e) {
    throw UsageError("parameter file " + path.string() + ": " + e.what());
  }
}

void add_config(Manifest& m, const std::string& prefix, const Config& c) {
  for (const auto& [k, v] : c.entries()) m.set(prefix + k, v);
}

// predictions.json plus one GeoJSON file per patch.
void write_predictions(const Context& ctx, const Workspace& ws, const fs::path& dir,
                       const std::vector<std::vector<CellInstance>>& per_patch, Manifest& manifest) {
  std::vector<CellInstance> all;
  for (std::size_t i = 0; i < ws.patches.size(); ++i) {
    manifest.write_output(dir, "geojson/" + ws.patches[i].patch_id + ".geojson", io::export_geojson(per_patch[i]));
    all.insert(all.end(), per_patch[i].begin(), per_patch[i].end());
  }
  manifest.write_output(dir, "predictions.json", io::write_coco(ws.patches, all));
  (void)ctx;
}

std::vector<std::vector<CellInstance>> instances_on(const Workspace& ws, const InstancesByPatch& by_patch) {
  std::vector<std::vector<CellInstance>> out(ws.patches.size());
  for (std::size_t i = 0; i < ws.patches.size(); ++i) {
    const auto it = by_patch.find(ws.patches[i].patch_id);
    if (it != by_patch.end()) out[i] = it->second;
  }
  return out;
}

std::vector<double> parse_radii(const std::string& spec) {
  auto number = [&](std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw UsageError("bad number '" + std::string(s) + "' in --radii");
    return v;
  };
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    const std::size_t a = spec.find(':');
    const std::size_t b = spec.find(':', a + 1);
    if (b == std::string::npos) throw UsageError("--radii range must be start:stop:step");
    const double start = number(std::string_view(spec).substr(0, a));
    const double stop = number(std::string_view(spec).substr(a + 1, b - a - 1));
    const double step = number(std::string_view(spec).substr(b + 1));
    if (!(step > 0.0) || stop < start) throw UsageError("--radii range must have step > 0 and stop >= start");
    // Integer steps, so 0.5:10:0.5 gives exactly 20 values.
    const auto n = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
    for (long long k = 0; k <= n; ++k) out.push_back(start + static_cast<double>(k) * step);
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const std::size_t comma = std::min(spec.find(',', pos), spec.size());
      out.push_back(number(std::string_view(spec).substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  for (double r : out) {
    if (!(r >= 0.0)) throw UsageError("sweep radii must be non-negative");
  }
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const Manifest& m) {
  io::write_file(dir / (command + ".manifest.json"), m.to_json());
}

}  // namespace

void cmd_normalize(const Context& ctx, std::ostream& out) {
  const Workspace ws = load_workspace(ctx);
  Manifest manifest("normalize", ctx);
  const stain::StainProfile target = target_profile(ctx, manifest);
  manifest.add_input(ws.annotations_path, ctx.data, "data");
  const fs::path dir = normalized_dir(ctx);
  fs::create_directories(dir);

  struct Outcome {
    std::string skip_reason;
    std::string profile_json;
    std::string png_digest;
    std::string input_digest;
  };
  const auto outcomes = parallel_slots<Outcome>(ws.patches.size(), ctx.jobs, [&](std::size_t i) {
    const io::PatchInfo& info = ws.patches[i];
    const fs::path src = ctx.data / info.file_name;
    Outcome o;
    ImagePatch raw;
    try {
      o.input_digest = fnv1a64(io::read_file(src));
      raw = read_png(src, ctx.scale);
    } catch (const Error& e) {
      throw DataError(e.what());
    }
    try {
      const stain::StainProfile source = stain::estimate_stain_matrix(raw);
      const ImagePatch norm = stain::normalize(raw, source, target);
      const fs::path png = dir / (info.patch_id + ".png");
      write_png(png, norm);
      o.png_digest = fnv1a64(io::read_file(png));
      o.profile_json = stain::profile_to_json(source);
    } catch (const NoTissueError& e) {
      o.skip_reason = e.what();
      std::error_code ec;
      fs::remove(dir / (info.patch_id + ".png"), ec);
      fs::remove(dir / (info.patch_id + ".stain.json"), ec);
    }
    return o;
  });

  nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
  std::size_t done = 0;
  for (std::size_t i = 0; i < ws.patches.size(); ++i) {
    const std::string& id = ws.patches[i].patch_id;
    const Outcome& o = outcomes[i];
    manifest.add_input_digest("data/" + fs::path(ws.patches[i].file_name).generic_string(), o.input_digest);
    if (!o.skip_reason.empty()) {
      skipped.push_back({{"patch_id", id}, {"reason", o.skip_reason}});
      continue;
    }
    manifest.add_output_digest(id + ".png", o.png_digest);
    manifest.write_output(dir, id + ".stain.json", o.profile_json);
    ++done;
  }
  manifest.write_output(dir, "skipped.json", skipped.dump(2) + "\n");
  write_manifest(dir, "normalize", manifest);
  out << "normalized " << done << " patches, skipped " << skipped.size() << "\n";
}

void cmd_detect(const Context& ctx, std::ostream& out) {
  Manifest manifest("detect", ctx);
  std::string label;
  const watershed::WatershedParams params =
      resolve_params(ctx.cfg.get("params").value_or("default"), label, manifest);
  add_config(manifest, "watershed.", watershed::params_to_config(params));
  const std::string name = ctx.cfg.get("name").value_or("watershed-" + label);
  const Workspace ws = load_workspace(ctx);
  manifest.add_input(ws.annotations_path, ctx.data, "data");
  const stain::StainProfile profile = stain::reference_profile();

  struct Slot {
    std::vector<CellInstance> nuclei;
    std::string input_name;
    std::string input_digest;
  };
  const auto slots = parallel_slots<Slot>(ws.patches.size(), ctx.jobs, [&](std::size_t i) {
    fs::path used;
    const ImagePatch img = load_patch(ctx, ws.patches[i], &used);
    Slot s;
    s.nuclei = watershed::detect_nuclei(img, profile, params);
    s.input_name = used.parent_path() == normalized_dir(ctx) ? "out/normalized/" + used.filename().string()
                                                             : "data/" + ws.patches[i].file_name;
    s.input_digest = fnv1a64(io::read_file(used));
    return s;
  });
  std::vector<std::vector<CellInstance>> per_patch;
  std::size_t total = 0;
  for (const Slot& s : slots) {
    manifest.add_input_digest(s.input_name, s.input_digest);
    per_patch.push_back(s.nuclei);
    total += s.nuclei.size();
  }
  const fs::path dir = model_dir(ctx, name);
  manifest.write_output(dir, "params.cfg", watershed::params_to_config(params).to_string());
  write_predictions(ctx, ws, dir, per_patch, manifest);
  write_manifest(dir, "detect", manifest);
  out << name << ": " << total << " nuclei on " << ws.patches.size() << " patches\n";
}

void cmd_expand(const Context& ctx, std::ostream& out) {
  const std::string from = require_string(ctx, "from");
  const double radius = require_double(ctx, "radius", watershed::default_params().expansion_radius_um);
  if (!(radius >= 0.0)) throw UsageError("--radius must be non-negative");
  const std::string name = ctx.cfg.get("name").value_or(from + "-expand" + format_double(radius));
  Manifest manifest("expand", ctx);
  manifest.set("radius", format_double(radius));
  const Workspace ws = load_workspace(ctx);
  fs::path pred_path;
  const io::CocoDataset pred = load_model(ctx, ws, from, &pred_path);
  manifest.add_input(pred_path, ctx.out, "out");
  const auto nuclei = instances_on(ws, group_by_patch(pred.instances));

  const auto per_patch = parallel_slots<std::vector<CellInstance>>(ws.patches.size(), ctx.jobs, [&](std::size_t i) {
    std::vector<CellInstance> bare;
    for (const CellInstance& c : nuclei[i]) bare.push_back({c.id, c.patch_id, c.nucleus, std::nullopt, c.confidence, Source::Predicted});
    return expansion::expand(bare, radius, ws.patches[i].width, ws.patches[i].height, ctx.scale).cells;
  });
  const fs::path dir = model_dir(ctx, name);
  write_predictions(ctx, ws, dir, per_patch, manifest);
  write_manifest(dir, "expand", manifest);
  std::size_t total = 0;
  for (const auto& v : per_patch) total += v.size();
  out << name << ": " << total << " cells at radius " << format_double(radius) << " um\n";
}

void cmd_cyto(const Context& ctx, std::ostream& out) {
  const std::string from = require_string(ctx, "from");
  cyto::CytoParams params;
  params.scale_factor = require_double(ctx, "scale_factor", params.scale_factor);
  params.nms_iou_threshold = require_double(ctx, "nms", params.nms_iou_threshold);
  params.tissue_threshold = require_double(ctx, "tissue_threshold", params.tissue_threshold);
  try {
    params.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const std::string name = ctx.cfg.get("name").value_or(from + "-cyto");
  Manifest manifest("cyto", ctx);
  add_config(manifest, "cyto.", cyto::params_to_config(params));
  const Workspace ws = load_workspace(ctx);
  fs::path pred_path;
  const io::CocoDataset pred = load_model(ctx, ws, from, &pred_path);
  manifest.add_input(pred_path, ctx.out, "out");
  const auto nuclei = instances_on(ws, group_by_patch(pred.instances));
  const stain::StainProfile profile = stain::reference_profile();

  const auto per_patch = parallel_slots<std::vector<CellInstance>>(ws.patches.size(), ctx.jobs, [&](std::size_t i) {
    if (nuclei[i].empty()) return std::vector<CellInstance>{};
    const ImagePatch img = load_patch(ctx, ws.patches[i]);
    return cyto::run(img, profile, nuclei[i], params);
  });
  const fs::path dir = model_dir(ctx, name);
  write_predictions(ctx, ws, dir, per_patch, manifest);
  write_manifest(dir, "cyto", manifest);
  std::size_t total = 0;
  for (const auto& v : per_patch) total += v.size();
  out << name << ": " << total << " cells (scale factor " << format_double(params.scale_factor) << ", NMS "
      << format_double(params.nms_iou_threshold) << ")\n";
}

void cmd_features(const Context& ctx, std::ostream& out) {
  const std::string model = ctx.cfg.get("model").value_or("gold");
  Manifest manifest("features", ctx);
  manifest.set("model", model);
  const Workspace ws = load_workspace(ctx);
  fs::path src;
  const io::CocoDataset ds = load_model(ctx, ws, model, &src);
  manifest.add_input(src, model == "gold" ? ctx.data : ctx.out, model == "gold" ? "data" : "out");
  const auto records = compute_features(ctx, ws.patches, group_by_patch(ds.instances));
  const fs::path dir = model_dir(ctx, model);
  manifest.write_output(dir, "features.csv", io::export_feature_csv(records));
  write_manifest(dir, "features", manifest);
  out << model << ": " << records.size() << " feature records\n";
}

void cmd_eval(const Context& ctx, std::ostream& out) {
  const std::string model = require_string(ctx, "model");
  Manifest manifest("eval", ctx);
  manifest.set("model", model);
  const Workspace ws = load_workspace(ctx);
  manifest.add_input(ws.annotations_path, ctx.data, "data");
  fs::path src;
  const io::CocoDataset pred = load_model(ctx, ws, model, &src);
  if (model != "gold") manifest.add_input(src, ctx.out, "out");

  const InstancesByPatch gold = group_by_patch(ws.gold.instances);
  const InstancesByPatch predicted = group_by_patch(pred.instances);
  std::map<std::string, std::vector<Polygon>> unpaired;
  for (const io::UnpairedCell& u : ws.gold.unpaired_cells) unpaired[u.patch_id].push_back(u.cell);

  std::vector<eval::PatchEval> patches;
  std::size_t gold_nuclei = 0;
  std::size_t gold_cells = 0;
  static const std::vector<CellInstance> kNone;
  for (const io::PatchInfo& p : ws.patches) {
    const auto g = gold.find(p.patch_id);
    const auto d = predicted.find(p.patch_id);
    const auto u = unpaired.find(p.patch_id);
    const auto& gv = g == gold.end() ? kNone : g->second;
    const auto& dv = d == predicted.end() ? kNone : d->second;
    const std::span<const Polygon> uv = u == unpaired.end() ? std::span<const Polygon>{} : std::span<const Polygon>(u->second);
    patches.push_back(eval::make_patch_eval(p.patch_id, p.width, p.height, dv, gv, uv));
    gold_nuclei += patches.back().gold_nuclei.polygons.size();
    gold_cells += patches.back().gold_cells.polygons.size();
  }
  if (gold_nuclei == 0 || gold_cells == 0) {
    throw DataError("the " + ctx.split + " split has no gold " + (gold_nuclei == 0 ? "nuclei" : "cells"));
  }
  const auto features_pred = compute_features(ctx, ws.patches, predicted);
  const auto features_gold = compute_features(ctx, ws.patches, gold);
  const eval::EvalReport report = eval::build_report(patches, features_pred, features_gold);

  const fs::path dir = model_dir(ctx, model);
  manifest.write_output(dir, "eval.json", eval::report_to_json(report, model));
  const std::string text = eval::report_to_text(report, model);
  manifest.write_output(dir, "eval.txt", text);
  write_manifest(dir, "eval", manifest);
  out << text;
}

void cmd_sweep(const Context& ctx, std::ostream& out) {
  const std::string from = require_string(ctx, "from");
  const std::vector<double> radii =
      ctx.cfg.has("radii") ? parse_radii(*ctx.cfg.get("radii")) : expansion::default_sweep_radii();
  if (radii.empty()) throw UsageError("--radii is empty");
  Manifest manifest("sweep", ctx);
  std::string listed;
  for (double r : radii) listed += (listed.empty() ? "" : ",") + format_double(r);
  manifest.set("radii", listed);
  const Workspace ws = load_workspace(ctx);
  manifest.add_input(ws.annotations_path, ctx.data, "data");
  fs::path src;
  const io::CocoDataset pred = load_model(ctx, ws, from, &src);
  if (from != "gold") manifest.add_input(src, ctx.out, "out");

  const auto nuclei = instances_on(ws, group_by_patch(pred.instances));
  const auto gold = instances_on(ws, group_by_patch(ws.gold.instances));
  std::map<std::string, std::vector<Polygon>> unpaired;
  for (const io::UnpairedCell& u : ws.gold.unpaired_cells) unpaired[u.patch_id].push_back(u.cell);
  std::vector<expansion::SweepPatch> patches;
  for (std::size_t i = 0; i < ws.patches.size(); ++i) {
    expansion::SweepPatch sp;
    sp.patch_id = ws.patches[i].patch_id;
    sp.width = ws.patches[i].width;
    sp.height = ws.patches[i].height;
    sp.scale = ctx.scale;
    for (const CellInstance& c : nuclei[i]) sp.nuclei.push_back({c.id, c.patch_id, c.nucleus, std::nullopt, c.confidence, Source::Predicted});
    sp.gold = gold[i];
    sp.unpaired_gold_cells = unpaired[sp.patch_id];
    patches.push_back(std::move(sp));
  }
  expansion::SweepResult result;
  try {
    result = expansion::radius_sweep(patches, radii);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  const fs::path dir = model_dir(ctx, from);
  manifest.write_output(dir, "sweep.json", expansion::sweep_to_json(result));
  write_manifest(dir, "sweep", manifest);
  for (const auto& p : result.points) out << format_double(p.radius_um) << " um: AP50 cell " << p.ap50 << "\n";
  out << "best radius " << format_double(result.best_radius_um) << " um\n";
}

void cmd_report(const Context& ctx, std::ostream& out) {
  Manifest manifest("report", ctx);
  std::vector<eval::NamedReport> runs;
  const fs::path models = ctx.out / "models";
  std::vector<fs::path> dirs;
  if (fs::is_directory(models)) {
    for (const auto& entry : fs::directory_iterator(models)) {
      if (entry.is_directory() && fs::is_regular_file(entry.path() / "eval.json")) dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (const fs::path& d : dirs) {
    const fs::path file = d / "eval.json";
    const std::string text = io::read_file(file);
    manifest.add_input(file, ctx.out, "out");
    try {
      runs.push_back(eval::report_from_json(text));
      all.push_back(nlohmann::ordered_json::parse(text));
    } catch (const Error& e) {
      throw DataError(file.string() + ": " + e.what());
    }
  }
  const std::string text = eval::report_to_text(runs);
  manifest.write_output(ctx.out, "report.txt", text);
  manifest.write_output(ctx.out, "report.json", nlohmann::ordered_json{{"runs", all}}.dump(2) + "\n");
  io::write_file(ctx.out / "report.manifest.json", manifest.to_json());
  out << text;
}

}  // namespace cytobench::cli
