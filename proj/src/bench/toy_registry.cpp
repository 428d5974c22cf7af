#include "vw/bench/toy_registry.hpp"

#include <cstdlib>

#include "vw/core/digest.hpp"
#include "vw/core/error.hpp"
#include "vw/toy/pipeline.hpp"

namespace vw::bench {

std::filesystem::path default_artifact_root() {
  if (const char* env = std::getenv("VW_ARTIFACT_ROOT"); env && *env) return env;
  return "artifacts";
}

ToyRegistry::ToyRegistry(ArtifactLayout layout, ToyRegistryOptions options)
    : layout_(std::move(layout)), options_(std::move(options)), sets_(datasets::load_concept_sets(options_.concept_sets)) {}

const toy::ToyFamily& ToyRegistry::family(const std::string& model_id) const {
  std::lock_guard lock(mutex_);
  auto it = families_.find(model_id);
  if (it == families_.end()) {
    const auto path = layout_.model(model_id);
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::kNotFound, "model '" + model_id + "' not found at " + path.string());
    auto f = std::make_shared<const toy::ToyFamily>(toy::load_family(path));
    if (f->model_id != model_id)
      throw Error(ErrorCode::kModelMismatch, path.string() + " holds model '" + f->model_id + "'");
    it = families_.emplace(model_id, std::move(f)).first;
  }
  return *it->second;
}

void ToyRegistry::add_family(toy::ToyFamily family) {
  std::lock_guard lock(mutex_);
  const std::string id = family.model_id;
  families_[id] = std::make_shared<const toy::ToyFamily>(std::move(family));
  fingerprints_.erase(id);
  for (auto it = adapters_.begin(); it != adapters_.end();)
    it = it->first.rfind(id + "|", 0) == 0 ? adapters_.erase(it) : std::next(it);
}

const toy::ShapesDataset& ToyRegistry::dataset() const {
  std::lock_guard lock(mutex_);
  if (!data_) data_ = std::make_unique<toy::ShapesDataset>(toy::load_shapes_dataset(layout_.data()));
  return *data_;
}

const embedding::EmbeddingTable& ToyRegistry::table(const std::string& model_id) const {
  return family(model_id).text->embeddings();
}

std::string ToyRegistry::fingerprint(const std::string& model_id) const {
  std::lock_guard lock(mutex_);
  if (auto it = fingerprints_.find(model_id); it != fingerprints_.end()) return it->second;
  const auto& o = options_;
  const std::string extra = "n_train=" + std::to_string(o.n_train) + ";data_seed=" + std::to_string(o.data_seed) +
                            ";samples=" + std::to_string(o.adapter.generation_samples) +
                            ";negatives=" + std::to_string(o.adapter.negatives_per_batch) +
                            ";template=" + o.adapter.template_text;
  std::string fp = family(model_id).fingerprint() + extra;
  if (family(model_id).denoiser) fp += ";judge=" + family(kJudgeModel).fingerprint();
  fp = hex_digest(fp);
  fingerprints_[model_id] = fp;
  return fp;
}

std::vector<std::string> ToyRegistry::anchors(const std::string& dataset) const {
  const auto it = sets_.find(dataset);
  if (it == sets_.end()) throw Error(ErrorCode::kNotFound, "unknown dataset '" + dataset + "'");
  return it->second.anchors;
}

learn::TokenOverrides ToyRegistry::init_overrides(const std::string& dataset) const {
  const auto it = sets_.find(dataset);
  if (it == sets_.end()) throw Error(ErrorCode::kNotFound, "unknown dataset '" + dataset + "'");
  return it->second.init_overrides;
}

std::shared_ptr<const tasks::ConceptData> ToyRegistry::data_for(const std::string& dataset,
                                                                const std::string& concept_name) const {
  if (dataset != kToyDataset) throw Error(ErrorCode::kNotFound, "dataset '" + dataset + "' has no local images");
  std::lock_guard lock(mutex_);
  auto it = concept_data_.find(concept_name);
  if (it == concept_data_.end()) {
    const auto set = sets_.find(dataset);
    if (set == sets_.end()) throw Error(ErrorCode::kNotFound, "unknown dataset '" + dataset + "'");
    auto d = toy::concept_data(layout_.data(), this->dataset().concepts, concept_name, set->second.concepts, options_.n_train,
                               derive_seed(options_.data_seed, concept_name));
    it = concept_data_.emplace(concept_name, std::move(d)).first;
  }
  return it->second;
}

std::shared_ptr<const tasks::TaskAdapter> ToyRegistry::adapter(const std::string& model_id, tasks::TaskId task,
                                                               const std::string& dataset,
                                                               const std::string& concept_name) const {
  std::lock_guard lock(mutex_);
  const std::string key = model_id + "|" + tasks::task_name(task) + "|" + dataset + "|" + concept_name;
  if (auto it = adapters_.find(key); it != adapters_.end()) return it->second;
  const auto& fam = family(model_id);
  const auto& judge = task == tasks::TaskId::kGeneration ? family(kJudgeModel) : fam;
  std::shared_ptr<const tasks::TaskAdapter> a =
      toy::make_adapter(task, fam, judge, data_for(dataset, concept_name), options_.adapter);
  adapters_[key] = a;
  return a;
}

}  // namespace vw::bench
