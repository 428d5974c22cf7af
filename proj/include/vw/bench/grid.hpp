#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vw/embedding/transfer.hpp"
#include "vw/learn/prompt.hpp"
#include "vw/tasks/adapters.hpp"

namespace vw::bench {

struct GridSpec {
  std::vector<std::string> models;
  /// Models the prompt is scored on; empty means the training model.
  std::vector<std::string> eval_models;
  std::vector<tasks::TaskId> train_tasks;
  std::vector<tasks::TaskId> eval_tasks;
  std::vector<std::string> datasets;
  std::vector<std::string> concepts;
  /// Constraint levels; the unconstrained run is added when include_unconstrained.
  std::vector<double> deltas = {0.1, 0.2, 0.5, 1.0};
  bool include_unconstrained = true;
  /// Anchor words cycled over init seeds; empty takes the dataset's list.
  std::vector<std::string> anchors;
  int init_seeds = 10;
  int eval_repeats = 10;
  std::uint64_t base_seed = 0;
  learn::TrainConfig train;
  int k = 4;

  void validate() const;
};

GridSpec parse_grid_spec(const nlohmann::json& j);
nlohmann::json grid_spec_json(const GridSpec& spec);
GridSpec load_grid_spec(const std::filesystem::path& path);

struct Cell {
  std::string model;
  std::string eval_model;
  tasks::TaskId train_task = tasks::TaskId::kClassification;
  tasks::TaskId eval_task = tasks::TaskId::kClassification;
  std::string dataset;
  std::string concept_name;
  std::optional<double> delta;
  /// Set for constrained cells once the runner resolves it.
  std::string anchor;
  int seed_index = 0;
  std::uint64_t seed = 0;

  /// Coordinates without the seed, stable across runs.
  std::string key() const;
  bool transferred() const { return eval_model != model; }
};

/// Cartesian product in models, eval models, train tasks, eval tasks,
/// datasets, concepts, deltas (unconstrained first), seeds order.
std::vector<Cell> enumerate_cells(const GridSpec& spec);

enum class RunStatus { kOk, kFailed };

struct RunRecord {
  Cell cell;
  std::string digest;
  std::string metric_name;
  double value = 0.0;
  /// One metric value per evaluation repeat; value is their mean.
  std::vector<double> repeats;
  /// Artifact paths relative to the registry's cache directory.
  std::map<std::string, std::string> artifacts;
  double wall_seconds = 0.0;
  RunStatus status = RunStatus::kOk;
  std::string error;
  int training_steps = 0;
};

nlohmann::json record_json(const RunRecord& r);
RunRecord parse_record(const nlohmann::json& j);
const char* metric_name(tasks::TaskId task);

/// Everything a cell needs from the outside world.
class Registry {
 public:
  virtual ~Registry() = default;
  virtual const embedding::EmbeddingTable& table(const std::string& model_id) const = 0;
  virtual std::shared_ptr<const tasks::TaskAdapter> adapter(const std::string& model_id, tasks::TaskId task,
                                                            const std::string& dataset,
                                                            const std::string& concept_name) const = 0;
  virtual std::vector<std::string> anchors(const std::string& dataset) const = 0;
  virtual learn::TokenOverrides init_overrides(const std::string& dataset) const = 0;
  /// Identity of the backing artifacts, folded into every digest.
  virtual std::string fingerprint(const std::string& model_id) const = 0;
  /// Directory for cached prompts and transfer maps.
  virtual std::filesystem::path cache_dir() const = 0;
};

/// Append-only JSONL of run records with an in-memory digest index. A
/// torn final line left by a crash is ignored on load; duplicate digests
/// keep the first record.
class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }
  std::optional<RunRecord> find(const std::string& digest) const;
  /// Appends unless a record with the same digest exists; returns whether it wrote.
  bool append(const RunRecord& record);
  std::vector<RunRecord> records() const;
  size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<RunRecord> records_;
  std::map<std::string, size_t> index_;
};

/// Store contents with wall-clock fields removed, for byte comparisons.
std::string canonical_store_text(const std::filesystem::path& path);

/// Digest of a cell under a spec: coordinates, seed, training config and
/// the fingerprints of the models involved.
std::string cell_digest(const Cell& cell, const GridSpec& spec, const Registry& registry);

/// Trains (or reuses the cached prompt), transfers when the eval model
/// differs, scores, and appends to the store. An existing record with the
/// same digest is returned without any work. Failures become failed records.
RunRecord run_cell(Cell cell, const GridSpec& spec, const Registry& registry, ResultStore& store);

struct GridOptions {
  int workers = 1;
  std::function<void(const RunRecord&, size_t done, size_t total)> on_record;
};

std::vector<RunRecord> run_grid(const GridSpec& spec, const Registry& registry, ResultStore& store,
                                const GridOptions& options = {});

struct CIResult {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
  double level = 0.95;
  int n_trials = 0;
};

/// Percentile bootstrap of the mean.
CIResult aggregate_ci(const std::vector<double>& values, double level = 0.95, std::uint64_t seed = 0,
                      int n_resamples = 10000);

struct ReportFiles {
  std::filesystem::path matrix_csv;
  std::filesystem::path delta_csv;
  std::filesystem::path efficiency_csv;
  std::filesystem::path matrix_svg;
  std::filesystem::path delta_svg;
};

/// Transfer matrix (unconstrained cells), delta curves, and the
/// transferred/in-domain efficiency table, as CSV plus SVG plots.
ReportFiles emit_report(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir,
                        std::uint64_t seed = 0);

}  // namespace vw::bench
