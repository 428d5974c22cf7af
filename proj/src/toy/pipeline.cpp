#include "vw/toy/pipeline.hpp"

#include <algorithm>

#include "vw/core/error.hpp"

namespace vw::toy {

std::shared_ptr<tasks::ConceptData> concept_data(const std::filesystem::path& root,
                                                 const datasets::DatasetManifest& manifest,
                                                 const std::string& concept_name,
                                                 const std::vector<std::string>& concept_set, int n_train,
                                                 std::uint64_t seed) {
  if (std::find(concept_set.begin(), concept_set.end(), concept_name) == concept_set.end())
    throw Error(ErrorCode::kInvalidInput, "concept '" + concept_name + "' is not in the concept set");
  auto d = std::make_shared<tasks::ConceptData>();
  d->name = concept_name;
  d->concept_set = concept_set;
  const auto pool = manifest.select(concept_name, datasets::Split::kTrain);
  d->train = datasets::load_examples(root, datasets::select_examples(pool, concept_name, n_train, seed));
  d->eval = datasets::load_examples(root, manifest.select(concept_name, datasets::Split::kEval));
  for (const auto& other : concept_set) {
    if (other == concept_name) continue;
    auto neg = datasets::load_examples(root, manifest.select(other, datasets::Split::kTrain));
    auto dis = datasets::load_examples(root, manifest.select(other, datasets::Split::kEval));
    d->negatives.insert(d->negatives.end(), neg.begin(), neg.end());
    d->distractors.insert(d->distractors.end(), dis.begin(), dis.end());
  }
  return d;
}

std::unique_ptr<tasks::TaskAdapter> make_adapter(tasks::TaskId task, const ToyFamily& family, const ToyFamily& judge,
                                                 std::shared_ptr<const tasks::ConceptData> data,
                                                 const tasks::AdapterOptions& options) {
  switch (task) {
    case tasks::TaskId::kGeneration:
      if (!family.denoiser) throw Error(ErrorCode::kInvalidInput, family.model_id + " has no denoiser");
      return std::make_unique<tasks::GenerationAdapter>(*family.denoiser, *family.text, judge.judge(), std::move(data),
                                                        options);
    case tasks::TaskId::kDetection:
      if (!family.detector) throw Error(ErrorCode::kInvalidInput, family.model_id + " has no detector");
      return std::make_unique<tasks::DetectionAdapter>(*family.detector, *family.text, std::move(data), options);
    case tasks::TaskId::kClassification:
      return std::make_unique<tasks::ClassificationAdapter>(*family.classifier, *family.text, std::move(data), options);
  }
  throw Error(ErrorCode::kInvalidInput, "unknown task");
}

}  // namespace vw::toy
