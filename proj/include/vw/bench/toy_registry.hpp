#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "vw/bench/grid.hpp"
#include "vw/datasets/manifest.hpp"
#include "vw/toy/family.hpp"
#include "vw/toy/scene.hpp"

namespace vw::bench {

/// Artifact root layout: data/ holds the shapes dataset, models/<id>.vwc
/// the families (toy-a, toy-b, toy-judge, toy-a-clone, ...), cache/ the
/// prompts and transfer maps produced by grid runs.
struct ArtifactLayout {
  std::filesystem::path root;

  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path model(const std::string& id) const { return models() / (id + ".vwc"); }
  std::filesystem::path cache() const { return root / "cache"; }
};

/// $VW_ARTIFACT_ROOT, else ./artifacts.
std::filesystem::path default_artifact_root();

inline constexpr const char* kToyDataset = "toy-shapes";
inline constexpr const char* kJudgeModel = "toy-judge";

struct ToyRegistryOptions {
  int n_train = 8;
  std::uint64_t data_seed = 0;
  tasks::AdapterOptions adapter;
  std::filesystem::path concept_sets = datasets::default_concept_sets_path();
  /// Prompt and map cache; empty means the layout's cache/.
  std::filesystem::path cache_dir;
};

/// Registry over toy families loaded lazily from an artifact root. Only the
/// toy-shapes dataset is backed by images.
class ToyRegistry : public Registry {
 public:
  explicit ToyRegistry(ArtifactLayout layout, ToyRegistryOptions options = {});

  const embedding::EmbeddingTable& table(const std::string& model_id) const override;
  std::shared_ptr<const tasks::TaskAdapter> adapter(const std::string& model_id, tasks::TaskId task,
                                                    const std::string& dataset,
                                                    const std::string& concept_name) const override;
  std::vector<std::string> anchors(const std::string& dataset) const override;
  learn::TokenOverrides init_overrides(const std::string& dataset) const override;
  std::string fingerprint(const std::string& model_id) const override;
  std::filesystem::path cache_dir() const override {
    return options_.cache_dir.empty() ? layout_.cache() : options_.cache_dir;
  }

  const toy::ToyFamily& family(const std::string& model_id) const;
  /// Registers an in-memory family under its model id.
  void add_family(toy::ToyFamily family);
  const toy::ShapesDataset& dataset() const;
  const ArtifactLayout& layout() const { return layout_; }

 private:
  std::shared_ptr<const tasks::ConceptData> data_for(const std::string& dataset, const std::string& concept_name) const;

  ArtifactLayout layout_;
  ToyRegistryOptions options_;
  std::map<std::string, datasets::ConceptSet> sets_;
  mutable std::recursive_mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<const toy::ToyFamily>> families_;
  mutable std::map<std::string, std::string> fingerprints_;
  mutable std::unique_ptr<toy::ShapesDataset> data_;
  mutable std::map<std::string, std::shared_ptr<const tasks::ConceptData>> concept_data_;
  mutable std::map<std::string, std::shared_ptr<const tasks::TaskAdapter>> adapters_;
};

}  // namespace vw::bench
