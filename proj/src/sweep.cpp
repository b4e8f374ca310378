#include "cytobench/sweep.hpp"

#include <json.hpp>

#include "cytobench/error.hpp"
#include "cytobench/evaluation.hpp"
#include "cytobench/expansion.hpp"

namespace cytobench::expansion {

std::vector<double> default_sweep_radii() {
  std::vector<double> r;
  for (int k = 1; k <= 20; ++k) r.push_back(0.5 * k);
  return r;
}

SweepResult radius_sweep(std::span<const SweepPatch> patches, std::span<const double> radii) {
  if (radii.empty()) throw InvalidArgument("radius sweep needs at least one radius");
  std::size_t gold_cells = 0;
  for (const SweepPatch& p : patches) {
    gold_cells += p.unpaired_gold_cells.size();
    for (const CellInstance& g : p.gold) gold_cells += g.cell ? 1 : 0;
  }
  if (gold_cells == 0) throw InvalidArgument("radius sweep needs gold cells");

  SweepResult out;
  for (double radius : radii) {
    std::vector<eval::PatchEval> evals(patches.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const SweepPatch& p = patches[i];
      const ExpansionResult ex = expand(p.nuclei, radius, p.width, p.height, p.scale);
      evals[i] = eval::make_patch_eval(p.patch_id, p.width, p.height, ex.cells, p.gold, p.unpaired_gold_cells);
    }
    const double ap50 = eval::average_precision(eval::detections_for(evals, eval::Class::Cell), 0.5);
    out.points.push_back({radius, ap50});
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    const SweepPoint& a = out.points[i];
    const SweepPoint& b = out.points[best];
    if (a.ap50 > b.ap50 || (a.ap50 == b.ap50 && a.radius_um < b.radius_um)) best = i;
  }
  out.best_radius_um = out.points[best].radius_um;
  return out;
}

std::string sweep_to_json(const SweepResult& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const SweepPoint& p : r.points) pts.push_back({{"radius", p.radius_um}, {"ap50", p.ap50}});
  j["points"] = pts;
  j["best_radius"] = r.best_radius_um;
  return j.dump(2) + "\n";
}

}  // namespace cytobench::expansion
