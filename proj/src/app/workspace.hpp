#pragma once

#include <exception>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cytobench/cell.hpp"
#include "cytobench/config.hpp"
#include "cytobench/dataset.hpp"
#include "cytobench/image.hpp"
#include "cytobench/morphometry.hpp"

namespace cytobench::cli {

namespace fs = std::filesystem;

// Maps to kExitUsage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Maps to kExitData.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a64(std::string_view bytes);

// Settings shared by every subcommand, resolved from the config file and flags.
struct Context {
  Config cfg;
  fs::path data;
  fs::path out;
  std::string split = "test";
  std::uint64_t seed = 0;
  double scale = 0.5;
  int jobs = 1;
};

// Gold annotations and the patches of the selected split, ordered by patch id.
struct Workspace {
  io::CocoDataset gold;
  io::DatasetSplit split;
  std::vector<io::PatchInfo> patches;
  fs::path annotations_path;
};

Workspace load_workspace(const Context& ctx);

fs::path normalized_dir(const Context& ctx);
fs::path model_dir(const Context& ctx, const std::string& model);

// The normalized patch when present, else the raw image (patches skipped by
// `normalize` for lack of tissue). Throws DataError without a normalize run.
ImagePatch load_patch(const Context& ctx, const io::PatchInfo& info, fs::path* used = nullptr);

// Instances grouped per patch id.
using InstancesByPatch = std::map<std::string, std::vector<CellInstance>>;
InstancesByPatch group_by_patch(const std::vector<CellInstance>& instances);

// Predictions of a model directory; "gold" gives the gold annotations.
io::CocoDataset load_model(const Context& ctx, const Workspace& ws, const std::string& model, fs::path* used = nullptr);

// Feature records of the whole-cell instances on the given patches, in patch
// then instance order.
std::vector<morph::FeatureRecord> compute_features(const Context& ctx, const std::vector<io::PatchInfo>& patches,
                                                   const InstancesByPatch& instances);

// Config snapshot plus digests of every input and output file.
class Manifest {
 public:
  Manifest(std::string command, const Context& ctx);
  void set(const std::string& key, const std::string& value) { snapshot_.set(key, value); }
  void add_input(const fs::path& path, const fs::path& root, const std::string& label);
  void add_input_bytes(const std::string& name, std::string_view bytes);
  void add_input_digest(const std::string& name, const std::string& digest) { inputs_.emplace_back(name, digest); }
  void add_output(const std::string& name, std::string_view bytes);
  void add_output_digest(const std::string& name, const std::string& digest) { outputs_.emplace_back(name, digest); }
  // Writes `content` under the output root and records its digest.
  void write_output(const fs::path& out_root, const std::string& name, std::string_view content);
  std::string to_json() const;

 private:
  std::string command_;
  Config snapshot_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

// Runs body(i) for i in [0, n) on `jobs` threads. Results land in slot i, so
// the merge order never depends on scheduling; the lowest-index exception is
// rethrown.
template <class T, class F>
std::vector<T> parallel_slots(std::size_t n, int jobs, F body) {
  std::vector<T> slots(n);
  std::vector<std::exception_ptr> errors(n);
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
  for (long long i = 0; i < count; ++i) {
    try {
      slots[static_cast<std::size_t>(i)] = body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return slots;
}

}  // namespace cytobench::cli
