#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vw/datasets/manifest.hpp"
#include "vw/tasks/adapters.hpp"
#include "vw/toy/family.hpp"

namespace vw::toy {

/// Training and eval material for one concept of a concept manifest: n_train
/// sampled train images of the concept, all of its eval images, train images
/// of the other concept_set members as negatives and their eval images as
/// distractors.
std::shared_ptr<tasks::ConceptData> concept_data(const std::filesystem::path& root,
                                                 const datasets::DatasetManifest& manifest,
                                                 const std::string& concept_name,
                                                 const std::vector<std::string>& concept_set, int n_train,
                                                 std::uint64_t seed);

/// Adapter for `task` backed by the matching head of `family`; generation is
/// scored by `judge`.
std::unique_ptr<tasks::TaskAdapter> make_adapter(tasks::TaskId task, const ToyFamily& family, const ToyFamily& judge,
                                                 std::shared_ptr<const tasks::ConceptData> data,
                                                 const tasks::AdapterOptions& options = {});

}  // namespace vw::toy
