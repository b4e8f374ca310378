// Acceptance report: one PASS/FAIL line per criterion.
//
//   acceptance [--criteria 1,2,...]
//
// Criteria 1-3 need the CytoNuke dataset in the layout the command-line tool
// reads (CYTONUKE_ROOT, optionally CYTONUKE_ANNOTATIONS). Without it they are
// reported as FAIL and the exit code is 77 so ctest lists the run as skipped.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>
#include <json.hpp>

#include "cytobench/cli.hpp"
#include "cytobench/dataset.hpp"
#include "cytobench/evaluation.hpp"
#include "cytobench/stain.hpp"
#include "support/synthetic_dataset.hpp"

namespace fs = std::filesystem;
using namespace cytobench;

namespace {

// Gates, pinned here.
constexpr double kShapeRelTol = 0.05;
constexpr double kUnitlessAbsTol = 0.03;
constexpr double kIntensityRelTol = 0.25;
constexpr double kRuntimeLimitS = 120.0;
constexpr double kFinetunedAp50Floor = 15.0;
constexpr double kBestRadiusUm = 5.0;
constexpr double kBestRadiusTolUm = 1.5;
constexpr double kExpansionAp75Ceiling = 5.0;

int g_failed = 0;
bool g_unavailable = false;

void line(bool ok, const std::string& id, const std::string& text) {
  std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << text << "\n";
  if (!ok) ++g_failed;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fmt(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------- criteria 1-3

// Ground-truth row of the published cell measurements (mean, median).
struct GoldStat {
  const char* feature;
  double mean;
  double median;
};
constexpr GoldStat kGoldRow[] = {
    {"area_um2", 229.37, 202.10},      {"perimeter_um", 63.87, 62.21},   {"circularity", 0.66, 0.68},
    {"solidity", 0.93, 0.94},          {"max_diameter_um", 24.18, 23.16}, {"min_diameter_um", 13.11, 12.54},
    {"nucleus_cell_ratio", 0.32, 0.30}, {"h_median", 0.29, 0.28},         {"h_mean", 0.33, 0.31},
    {"h_std", 0.16, 0.14},             {"h_max", 0.92, 0.88},            {"h_min", 0.05, 0.07},
    {"e_median", 0.23, 0.27},          {"e_mean", 0.22, 0.27},           {"e_std", 0.07, 0.06},
    {"e_max", 0.42, 0.42},             {"e_min", -0.05, -0.04},
};

struct Dataset {
  fs::path root;
  std::string annotations;
  fs::path out;
};

std::vector<std::string> base_args(const Dataset& d, const std::string& split) {
  return {"--data", d.root.string(), "--out", d.out.string(), "--split", split, "--annotations", d.annotations};
}

bool step(const Dataset& d, std::vector<std::string> cmd, const std::string& split, const std::string& id) {
  const auto extra = base_args(d, split);
  cmd.insert(cmd.end(), extra.begin(), extra.end());
  const Run r = cli(cmd);
  if (r.code != 0) {
    std::string joined;
    for (const auto& a : cmd) joined += a + " ";
    line(false, id, "command failed (" + std::to_string(r.code) + "): " + joined + "| " + r.err);
  }
  return r.code == 0;
}

void criterion_1(const Dataset& d) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!step(d, {"normalize", "--jobs", "1"}, "test", "1") || !step(d, {"features", "--model", "gold", "--jobs", "1"}, "test", "1")) return;
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto records = io::parse_feature_csv(io::read_file(d.out / "models" / "gold" / "features.csv"));
  if (records.empty()) {
    line(false, "1", "no whole-cell gold records on the test split");
    return;
  }
  auto column = [&](std::size_t f) {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.values[f]);
    return v;
  };
  std::map<std::string, std::size_t> index;
  for (std::size_t f = 0; f < morph::kFeatureCount; ++f) index[std::string(morph::kFeatureNames[f])] = f;
  auto stat = [&](const char* name) -> const GoldStat& {
    for (const GoldStat& g : kGoldRow) {
      if (std::string(g.feature) == name) return g;
    }
    throw std::logic_error(name);
  };

  bool ok = true;
  std::string detail;
  auto check = [&](const std::string& label, double got, double want, bool absolute, double tol) {
    const double err = absolute ? std::abs(got - want) : std::abs(got - want) / std::abs(want);
    const bool pass = err <= tol;
    ok = ok && pass;
    detail += "\n        " + std::string(pass ? "ok  " : "off ") + label + " " + fmt(got, 3) + " vs " + fmt(want, 2);
  };
  check("area mean", mean(column(index["area_um2"])), stat("area_um2").mean, false, kShapeRelTol);
  for (const char* f : {"area_um2", "perimeter_um", "max_diameter_um", "min_diameter_um"}) {
    check(std::string(f) + " median", median(column(index[f])), stat(f).median, false, kShapeRelTol);
  }
  for (const char* f : {"circularity", "solidity", "nucleus_cell_ratio"}) {
    check(std::string(f) + " median", median(column(index[f])), stat(f).median, true, kUnitlessAbsTol);
  }
  for (std::size_t f = 7; f < morph::kFeatureCount; ++f) {
    const char* name = kGoldRow[f].feature;
    check(std::string(name) + " mean", mean(column(f)), kGoldRow[f].mean, false, kIntensityRelTol);
  }
  ok = ok && seconds < kRuntimeLimitS;
  line(ok, "1", "gold features on the test split (" + std::to_string(records.size()) + " cells, " + fmt(seconds, 1) +
                    " s single-threaded)" + detail);
}

double ap(const Dataset& d, const std::string& model, const char* cls, const char* which) {
  const auto j = nlohmann::json::parse(io::read_file(d.out / "models" / model / "eval.json"));
  return j["average_precision"][cls][which].get<double>();
}

void criterion_2(const Dataset& d) {
  for (const char* p : {"default", "finetuned"}) {
    if (!step(d, {"detect", "--params", p}, "test", "2")) return;
    if (!step(d, {"eval", "--model", std::string("watershed-") + p}, "test", "2")) return;
  }
  const double def = ap(d, "watershed-default", "nucleus", "ap50");
  const double fin = ap(d, "watershed-finetuned", "nucleus", "ap50");
  line(fin > def && fin >= kFinetunedAp50Floor, "2",
       "nucleus AP50 finetuned " + fmt(fin) + "% vs default " + fmt(def) + "% (need finetuned > default and >= " +
           fmt(kFinetunedAp50Floor, 0) + "%)");
}

void criterion_3(const Dataset& d) {
  if (!step(d, {"normalize"}, "validation", "3")) return;
  if (!step(d, {"detect", "--params", "finetuned", "--name", "val-finetuned"}, "validation", "3")) return;
  if (!step(d, {"sweep", "--from", "val-finetuned"}, "validation", "3")) return;
  const auto sweep = nlohmann::json::parse(io::read_file(d.out / "models" / "val-finetuned" / "sweep.json"));
  const double best = sweep["best_radius"].get<double>();

  double worst_ap75 = 0.0;
  for (const char* p : {"default", "finetuned"}) {
    const std::string from = std::string("watershed-") + p;
    if (!step(d, {"expand", "--from", from, "--radius", "5"}, "test", "3")) return;
    if (!step(d, {"eval", "--model", from + "-expand5"}, "test", "3")) return;
    worst_ap75 = std::max(worst_ap75, ap(d, from + "-expand5", "cell", "ap75"));
  }
  line(std::abs(best - kBestRadiusUm) <= kBestRadiusTolUm && worst_ap75 < kExpansionAp75Ceiling, "3",
       "validation sweep argmax " + fmt(best, 1) + " um (need 5 +- 1.5); expansion cell AP75 at most " + fmt(worst_ap75) +
           "% (need < 5%)");
}

void cytonuke(const std::set<int>& wanted) {
  const char* root = std::getenv("CYTONUKE_ROOT");
  const char* ann = std::getenv("CYTONUKE_ANNOTATIONS");
  if (!root || !fs::is_directory(root)) {
    g_unavailable = true;
    for (int c : {1, 2, 3}) {
      if (wanted.count(c)) line(false, std::to_string(c), "CytoNuke dataset not available (set CYTONUKE_ROOT); not evaluated");
    }
    return;
  }
  Dataset d{root, ann ? ann : "annotations.json", fs::temp_directory_path() / "cytobench_acceptance_cytonuke"};
  fs::remove_all(d.out);
  if (wanted.count(1)) criterion_1(d);
  if (wanted.count(2) || wanted.count(3)) {
    if (!fs::is_directory(d.out / "normalized")) step(d, {"normalize"}, "test", "2");
  }
  if (wanted.count(2) || wanted.count(3)) criterion_2(d);
  if (wanted.count(3)) criterion_3(d);
}

// ---------------------------------------------------------------- criterion 4

void criterion_4(const fs::path& source_dir) {
  // Every published learned-model AP value, as printed with two decimals.
  std::set<std::string> constants;
  for (const eval::ReferenceRow& r : eval::reference_rows()) {
    if (r.model.rfind("QuPath", 0) == 0) continue;
    for (double v : {r.ap50_nucleus, r.ap75_nucleus, r.ap50_cell, r.ap75_cell}) constants.insert(fmt(v));
  }
  bool ok = constants.count("58.65") && constants.count("70.36");
  std::vector<std::string> stray;
  for (const char* sub : {"src", "include", "tools"}) {
    for (const auto& e : fs::recursive_directory_iterator(source_dir / sub)) {
      if (!e.is_regular_file()) continue;
      const std::string rel = e.path().lexically_relative(source_dir).generic_string();
      if (rel == "src/report.cpp") continue;
      const std::string text = io::read_file(e.path());
      for (const std::string& c : constants) {
        if (std::regex_search(text, std::regex("(^|[^0-9.])" + std::regex_replace(c, std::regex("\\."), "\\.") + "([^0-9]|$)"))) {
          stray.push_back(rel + ":" + c);
        }
      }
    }
  }
  ok = ok && stray.empty();
  const std::string text = eval::report_to_text(eval::EvalReport{}, "run");
  const std::string json = eval::report_to_json(eval::EvalReport{}, "run");
  const bool shown = text.find("58.65") != std::string::npos && text.find("70.36") != std::string::npos;
  const bool kept_out = json.find("58.65") == std::string::npos && json.find("70.36") == std::string::npos;
  ok = ok && shown && kept_out;
  std::string why = std::to_string(constants.size()) + " learned-model AP constants, only in src/report.cpp";
  if (!stray.empty()) why += "; also found in " + stray.front();
  if (!shown) why += "; missing from the text report";
  if (!kept_out) why += "; leaked into the JSON report";
  line(ok, "4", "learned-model results are display constants of the report formatter (" + why + ")");
}

// ---------------------------------------------------------------- criterion 5

struct Suite {
  const char* label;
  const char* binary;
  std::vector<const char*> cases;
};

Run shell(const std::string& cmd) {
  std::string out;
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  if (!p) return {-1, "", "popen failed"};
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), p)) out += buf.data();
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, ""};
}

void criterion_5(const std::map<std::string, fs::path>& binaries) {
  const std::vector<Suite> suites = {
      {"AP engine vs oracle on 1000 cases, AP75 <= AP50", "test_evaluation", {"AP engine equals the oracle on 1000 random cases"}},
      {"KS engine vs pooled-CDF oracle on 1000 pairs, symmetry, monotone invariance", "test_evaluation",
       {"KS engine equals the pooled-CDF oracle on 1000 random pairs"}},
      {"calipers vs O(n^2) oracle on 1000 convex 3-30-gons", "test_morphometry",
       {"calipers agree exactly with the brute-force oracle on convex polygons"}},
      {"expansion disjointness, containment, monotonicity, dilation oracle on 200 layouts", "test_expansion",
       {"expansion properties on 200 random layouts"}},
      {"stain round trip on the 20x20 grid, Macenko within 2 deg on 50 patches", "test_stain",
       {"deconvolution inverts the forward model", "macenko recovers planted stain vectors on 50 patches"}},
      {"shape closed forms and similarity invariance", "test_morphometry",
       {"unit square closed forms", "rectangle and scale", "shape features are invariant under similarity transforms"}},
  };
  const std::regex ran(R"(test cases:\s*(\d+)\s*\|\s*(\d+) passed\s*\|\s*0 failed)");
  bool all = true;
  char sub = 'a';
  for (const Suite& s : suites) {
    bool ok = true;
    for (const char* c : s.cases) {
      const auto bin = binaries.find(s.binary);
      if (bin == binaries.end()) {
        ok = false;
        continue;
      }
      const Run r = shell("\"" + bin->second.string() + "\" --no-colors --test-case=\"" + std::string(c) + "\"");
      std::smatch m;
      ok = ok && r.code == 0 && std::regex_search(r.out, m, ran) && m[1] == "1" && m[2] == "1";
    }
    all = all && ok;
    std::cout << "      [5" << sub++ << "] " << (ok ? "pass " : "fail ") << s.label << "\n";
  }
  line(all, "5", "property suites");
}

// ---------------------------------------------------------------- criterion 6

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[e.path().lexically_relative(dir).generic_string()] = io::read_file(e.path());
  }
  return files;
}

void criterion_6() {
  const fs::path root = fs::temp_directory_path() / "cytobench_acceptance_determinism";
  fs::remove_all(root);
  synth::DatasetSpec spec;
  spec.patients = 6;
  spec.size = 128;
  spec.cells_per_side = 4;
  spec.blank_first_patch = true;
  synth::write_dataset(root / "data", spec);

  const std::vector<std::vector<std::string>> pipeline = {
      {"normalize"},
      {"detect", "--params", "default"},
      {"detect", "--params", "finetuned"},
      {"expand", "--from", "watershed-default", "--radius", "5"},
      {"cyto", "--from", "watershed-finetuned", "--scale-factor", "2", "--nms", "0.3"},
      {"features", "--model", "gold"},
      {"features", "--model", "watershed-finetuned-cyto"},
      {"eval", "--model", "watershed-default-expand5"},
      {"eval", "--model", "watershed-finetuned-cyto"},
      {"sweep", "--from", "watershed-default"},
      {"report"},
  };
  std::vector<std::map<std::string, std::string>> trees;
  bool ran = true;
  for (const std::string jobs : {"1", "2", "4", "4"}) {
    const fs::path out = root / ("out" + std::to_string(trees.size()));
    for (std::vector<std::string> cmd : pipeline) {
      cmd.insert(cmd.end(), {"--data", (root / "data").string(), "--out", out.string(), "--split", "all", "--jobs", jobs});
      ran = ran && cli(cmd).code == 0;
    }
    trees.push_back(tree(out));
  }
  std::size_t manifests = 0, reports = 0;
  for (const auto& [name, _] : trees[0]) {
    manifests += name.ends_with(".manifest.json");
    reports += name.ends_with("eval.json") || name.ends_with("eval.txt") || name.rfind("report.", 0) == 0;
  }
  bool same = ran && !trees[0].empty();
  for (std::size_t k = 1; k < trees.size(); ++k) same = same && trees[k] == trees[0];
  fs::remove_all(root);
  line(same && manifests >= 11 && reports >= 4, "6",
       "full pipeline with --jobs 1, 2, 4, 4: " + std::to_string(trees[0].size()) + " files byte-identical, including " +
           std::to_string(manifests) + " manifests and " + std::to_string(reports) + " reports");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted{1, 2, 3, 4, 5, 6};
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--criteria") {
      wanted.clear();
      std::stringstream ss(argv[i + 1]);
      for (std::string tok; std::getline(ss, tok, ',');) wanted.insert(std::stoi(tok));
    }
  }
  const std::map<std::string, fs::path> binaries = {
      {"test_evaluation", CYTOBENCH_TEST_EVALUATION},
      {"test_morphometry", CYTOBENCH_TEST_MORPHOMETRY},
      {"test_expansion", CYTOBENCH_TEST_EXPANSION},
      {"test_stain", CYTOBENCH_TEST_STAIN},
  };

  if (wanted.count(1) || wanted.count(2) || wanted.count(3)) cytonuke(wanted);
  if (wanted.count(4)) criterion_4(CYTOBENCH_SOURCE_DIR);
  if (wanted.count(5)) criterion_5(binaries);
  if (wanted.count(6)) criterion_6();

  std::cout << (g_failed == 0 ? "all selected criteria pass" : std::to_string(g_failed) + " criteria fail") << "\n";
  if (g_failed == 0) return 0;
  // Only unavailable data failed: report as skipped rather than passed.
  return g_unavailable && g_failed == static_cast<int>(std::count_if(wanted.begin(), wanted.end(), [](int c) { return c <= 3; }))
             ? 77
             : 1;
}
