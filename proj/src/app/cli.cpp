#include "cytobench/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <CLI11.hpp>

#include "commands.hpp"
#include "cytobench/error.hpp"

namespace cytobench::cli {

namespace {

// Keys a config file may set; flags use the same names with '-' for '_'.
constexpr std::string_view kConfigKeys[] = {
    "data", "out", "split", "seed", "scale", "jobs", "annotations", "stain_target", "params", "name",
    "from", "model", "radius", "scale_factor", "nms", "tissue_threshold", "radii"};

struct Subcommand {
  CLI::App* app;
  std::function<void(const Context&, std::ostream&)> body;
  std::vector<std::pair<std::string, CLI::Option*>> options;  // config key -> flag
  CLI::Option* config = nullptr;
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (char& c : f) c = c == '_' ? '-' : c;
  return "--" + f;
}

int parse_jobs(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1) throw UsageError("jobs must be a positive integer, got '" + s + "'");
  return v;
}

Context make_context(const Subcommand& sub, std::map<std::string, std::string>& values) {
  Context ctx;
  if (sub.config->count() > 0) {
    const std::string& file = values["config"];
    try {
      ctx.cfg = Config::load(file);
      ctx.cfg.require_known(kConfigKeys);
    } catch (const Error& e) {
      throw UsageError("config " + file + ": " + e.what());
    }
  }
  for (const auto& [key, opt] : sub.options) {
    if (opt->count() > 0) ctx.cfg.set(key, values[key]);
  }
  ctx.data = ctx.cfg.get("data").value_or("");
  ctx.out = ctx.cfg.get("out").value_or("cytobench-out");

  std::string split = ctx.cfg.get("split").value_or("test");
  if (split == "val") split = "validation";
  if (split != "train" && split != "validation" && split != "test" && split != "all") {
    throw UsageError("--split must be train, validation, test or all");
  }
  ctx.split = split;

  try {
    const long long seed = ctx.cfg.get_int("seed", 0);
    if (seed < 0) throw UsageError("--seed must be non-negative");
    ctx.seed = static_cast<std::uint64_t>(seed);
    ctx.scale = ctx.cfg.get_double("scale", 0.5);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }
  if (!(ctx.scale > 0.0)) throw UsageError("--scale must be positive");

  if (const auto j = ctx.cfg.get("jobs")) {
    ctx.jobs = parse_jobs(*j);
  } else if (const char* env = std::getenv("CYTOBENCH_JOBS"); env && *env) {
    ctx.jobs = parse_jobs(env);
  }
  return ctx;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cell and nucleus segmentation baselines and evaluation on H&E patches", "cytobench"};
  app.require_subcommand(1, 1);

  std::map<std::string, std::string> values;
  std::vector<Subcommand> subs;
  auto add = [&](const std::string& name, const std::string& help, std::function<void(const Context&, std::ostream&)> body,
                 std::vector<std::pair<std::string, std::string>> specific) {
    Subcommand sub{app.add_subcommand(name, help), std::move(body), {}, nullptr};
    sub.config = sub.app->add_option("--config", values["config"], "key = value file; flags override it");
    std::vector<std::pair<std::string, std::string>> common = {
        {"data", "dataset root holding annotations.json and the patch images"},
        {"out", "output directory (default cytobench-out)"},
        {"split", "train, validation, test (default) or all"},
        {"seed", "seed of the patient split (default 0)"},
        {"scale", "micrometres per pixel (default 0.5)"},
        {"jobs", "worker threads (default $CYTOBENCH_JOBS or 1)"},
        {"annotations", "annotation file relative to the dataset root"}};
    common.insert(common.end(), specific.begin(), specific.end());
    for (const auto& [key, text] : common) {
      sub.options.emplace_back(key, sub.app->add_option(flag_name(key), values[key], text));
    }
    subs.push_back(std::move(sub));
  };

  add("normalize", "Macenko-normalize every patch of the split", cmd_normalize,
      {{"stain_target", "reference (default) or a stain profile JSON file"}});
  add("detect", "watershed nucleus detection", cmd_detect,
      {{"params", "default, finetuned or file:<path>"}, {"name", "model name (default watershed-<params>)"}});
  add("expand", "grow detected nuclei into cells by a fixed radius", cmd_expand,
      {{"from", "detection model to expand"}, {"radius", "expansion radius in micrometres (default 5)"},
       {"name", "model name (default <from>-expand<radius>)"}});
  add("cyto", "scaled-ROI cytoplasm proposals with pair NMS", cmd_cyto,
      {{"from", "detection model giving the nuclei"}, {"scale_factor", "ROI scale factor (default 2)"},
       {"nms", "NMS IoU threshold (default 0.3)"}, {"tissue_threshold", "h + e concentration of cytoplasm (default 0.05)"},
       {"name", "model name (default <from>-cyto)"}});
  add("features", "morphometric feature table of whole cells", cmd_features,
      {{"model", "model name or gold (default)"}});
  add("eval", "AP and KS statistics of a model against gold", cmd_eval, {{"model", "model name or gold"}});
  add("sweep", "cell AP50 of nucleus expansion over a radius range", cmd_sweep,
      {{"from", "detection model to expand"}, {"radii", "start:stop:step or a comma list (default 0.5:10:0.5)"}});
  add("report", "collect every evaluated model next to the published results", cmd_report, {});

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (Subcommand& sub : subs) {
    if (!sub.app->parsed()) continue;
    try {
      const Context ctx = make_context(sub, values);
      sub.body(ctx, out);
      return kExitOk;
    } catch (const UsageError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const DataError& e) {
      err << "data error: " << e.what() << "\n";
      return kExitData;
    } catch (const Error& e) {
      err << "data error: " << e.what() << "\n";
      return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
      err << "data error: " << e.what() << "\n";
      return kExitData;
    }
  }
  err << "no subcommand\n";
  return kExitUsage;
}

}  // namespace cytobench::cli
