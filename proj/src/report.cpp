#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <json.hpp>

#include "cytobench/error.hpp"
#include "cytobench/evaluation.hpp"

namespace cytobench::eval {

namespace {

constexpr double kNotPublished = std::numeric_limits<double>::quiet_NaN();

// Published AP (percent) and KS statistics of the compared methods. They are
// display constants: nothing in the pipeline reproduces or consumes them.
constexpr ReferenceRow kReference[] = {
    {"QuPath default", 22.95, 6.85, 11.12, 0.28, 0.22,
     {.54, .60, .31, .11, .64, .39, .17, .11, .10, .05, .17, .13, .10, .07, .06, .07, .11}},
    {"QuPath finetuned", 35.24, 11.07, 19.46, 0.91, kNotPublished,
     {.26, .42, .61, .48, .48, .17, .37, .24, .17, .17, .09, .13, .16, .17, .17, .06, .11}},
    {"Cellpose", 48.35, 23.84, 31.85, 5.61, 0.23,
     {.27, .40, .47, .46, .42, .19, .51, .19, .19, .05, .07, .19, .19, .14, .10, .07, .08}},
    {"StarDist", 70.36, 47.24, 45.33, 2.32, 0.25,
     {.32, .49, .61, .55, .56, .21, .41, .13, .13, .12, .05, .10, .15, .15, .12, .06, .08}},
    {"Cyto R-CNN", 78.32, 42.54, 58.65, 11.56, 0.15,
     {.25, .29, .24, .24, .34, .20, .17, .14, .11, .07, .03, .04, .13, .11, .08, .07, .05}},
};

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}


}  // namespace

std::span<const ReferenceRow> reference_rows() { return kReference; }

std::string report_to_json(const EvalReport& r, const std::string& model_name) {
  nlohmann::ordered_json j;
  j["model"] = model_name;
  j["average_precision"] = {
      {"nucleus", {{"ap50", r.ap50_nucleus}, {"ap75", r.ap75_nucleus}}},
      {"cell", {{"ap50", r.ap50_cell}, {"ap75", r.ap75_cell}}},
  };
  j["counts"] = {{"predicted_nuclei", r.num_pred_nuclei},
                 {"predicted_cells", r.num_pred_cells},
                 {"gold_nuclei", r.num_gold_nuclei},
                 {"gold_cells", r.num_gold_cells}};
  if (r.ks) {
    nlohmann::ordered_json ks = nlohmann::ordered_json::object();
    for (std::size_t f = 0; f < morph::kFeatureCount; ++f) ks[std::string(morph::kFeatureNames[f])] = (*r.ks)[f];
    j["ks"] = ks;
    j["mean_d"] = *r.mean_d;
  } else {
    j["ks"] = nullptr;
    j["mean_d"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& r, const std::string& model_name) {
  const NamedReport one{model_name, r};
  return report_to_text(std::span(&one, 1));
}

std::string report_to_text(std::span<const NamedReport> runs) {
  std::size_t name_w = 36;
  for (const NamedReport& run : runs) name_w = std::max(name_w, run.model.size() + 13);
  const std::size_t col_w = 18;
  auto run_w = [](const NamedReport& run) { return std::max<std::size_t>(18, run.model.size() + 2); };
  std::string out;
  out += "Average precision (%)\n";
  out += pad("model", name_w) + pad("AP50 nucleus", 14) + pad("AP75 nucleus", 14) + pad("AP50 cell", 12) + "AP75 cell\n";
  for (const ReferenceRow& ref : kReference) {
    out += pad(std::string(ref.model) + " (reference)", name_w) + pad(fixed(ref.ap50_nucleus, 2), 14) +
           pad(fixed(ref.ap75_nucleus, 2), 14) + pad(fixed(ref.ap50_cell, 2), 12) + fixed(ref.ap75_cell, 2) + "\n";
  }
  for (const NamedReport& run : runs) {
    const EvalReport& r = run.report;
    out += pad(run.model + " (this run)", name_w) + pad(fixed(r.ap50_nucleus, 2), 14) +
           pad(fixed(r.ap75_nucleus, 2), 14) + pad(fixed(r.ap50_cell, 2), 12) + fixed(r.ap75_cell, 2) + "\n";
  }

  out += "\nKolmogorov-Smirnov D against gold\n";
  out += pad("feature", 20);
  for (const ReferenceRow& ref : kReference) out += pad(std::string(ref.model), col_w);
  for (const NamedReport& run : runs) out += pad(run.model, run_w(run));
  out += "\n";
  for (std::size_t f = 0; f < morph::kFeatureCount; ++f) {
    out += pad(std::string(morph::kFeatureNames[f]), 20);
    for (const ReferenceRow& ref : kReference) out += pad(fixed(ref.ks[f], 2), col_w);
    for (const NamedReport& run : runs) out += pad(run.report.ks ? fixed((*run.report.ks)[f], 2) : std::string("n/a"), run_w(run));
    out += "\n";
  }
  out += pad("mean D", 20);
  for (const ReferenceRow& ref : kReference) out += pad(std::isnan(ref.mean_d) ? std::string("-") : fixed(ref.mean_d, 2), col_w);
  for (const NamedReport& run : runs) out += pad(run.report.mean_d ? fixed(*run.report.mean_d, 2) : std::string("n/a"), run_w(run));
  out += "\n";
  // Trailing pad spaces are noise in diffs.
  std::string trimmed;
  std::size_t line_start = 0;
  while (line_start < out.size()) {
    const std::size_t nl = out.find('\n', line_start);
    std::string line = out.substr(line_start, nl - line_start);
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line + "\n";
    line_start = nl + 1;
  }
  return trimmed;
}

NamedReport report_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("evaluation report: ") + e.what(), e.byte == 0 ? 0 : e.byte - 1);
  }
  try {
    NamedReport out;
    out.model = j.at("model").get<std::string>();
    const auto& ap = j.at("average_precision");
    EvalReport& r = out.report;
    r.ap50_nucleus = ap.at("nucleus").at("ap50").get<double>();
    r.ap75_nucleus = ap.at("nucleus").at("ap75").get<double>();
    r.ap50_cell = ap.at("cell").at("ap50").get<double>();
    r.ap75_cell = ap.at("cell").at("ap75").get<double>();
    const auto& c = j.at("counts");
    r.num_pred_nuclei = c.at("predicted_nuclei").get<std::size_t>();
    r.num_pred_cells = c.at("predicted_cells").get<std::size_t>();
    r.num_gold_nuclei = c.at("gold_nuclei").get<std::size_t>();
    r.num_gold_cells = c.at("gold_cells").get<std::size_t>();
    if (!j.at("ks").is_null()) {
      std::array<double, morph::kFeatureCount> ks{};
      for (std::size_t f = 0; f < morph::kFeatureCount; ++f) ks[f] = j["ks"].at(std::string(morph::kFeatureNames[f])).get<double>();
      r.ks = ks;
      r.mean_d = j.at("mean_d").get<double>();
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("evaluation report: ") + e.what());
  }
}

}  // namespace cytobench::eval
