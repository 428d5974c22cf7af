#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vw/tasks/backends.hpp"
#include "vw/tasks/types.hpp"

namespace vw::datasets {

enum class Split { kTrain, kEval };
const char* split_name(Split s);

struct ManifestEntry {
  std::string image_path;  // relative to the manifest's directory
  std::string concept_name;
  std::vector<tasks::Box> boxes;
  std::string class_label;
  Split split = Split::kTrain;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string dataset_id;
  std::vector<ManifestEntry> entries;
  bool operator==(const DatasetManifest&) const = default;

  /// Entries of one concept in one split; an empty name selects the whole split.
  std::vector<ManifestEntry> select(const std::string& concept_name, Split split) const;
  std::vector<std::string> concepts() const;
};

/// One JSON object per line: dataset_id, image_path, concept, boxes as
/// [x_min, y_min, x_max, y_max], box_labels (parallel to boxes, null when a
/// box is unlabeled), class_label, split.
std::string serialize_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Loads the images of the given entries into examples, resolving paths
/// against `root`.
std::vector<tasks::Example> load_examples(const std::filesystem::path& root,
                                          const std::vector<ManifestEntry>& entries);

/// Uniform sample of n names without replacement.
std::vector<std::string> sample_concepts(const std::vector<std::string>& class_list, int n,
                                         std::uint64_t seed);

/// Uniform sample of n entries of `concept` from the pool, without replacement.
std::vector<ManifestEntry> select_examples(const std::vector<ManifestEntry>& pool,
                                           const std::string& concept_name, int n, std::uint64_t seed);

/// Label of the largest box; equal areas go to the lexicographically smaller label.
std::string class_from_largest_box(const std::vector<tasks::Box>& boxes);

struct PseudoLabels {
  std::vector<std::vector<tasks::Box>> boxes;
  /// Images with no detection above the threshold, left for manual review.
  std::vector<int> flagged;
};

PseudoLabels pseudo_label_boxes(const tasks::DetectionBackend& det, const tasks::TextEncoderBackend& txt,
                                const std::vector<Image>& images, const std::string& concept_name,
                                double score_threshold, const std::string& template_text = "a photo of {}");

struct ConceptSet {
  std::vector<std::string> concepts;
  std::vector<std::string> anchors;
  /// Single-token init words for multi-token concept names.
  std::map<std::string, std::string> init_overrides;
};

/// Concept and anchor lists keyed by dataset id.
std::map<std::string, ConceptSet> load_concept_sets(const std::filesystem::path& path);
std::filesystem::path default_concept_sets_path();

}  // namespace vw::datasets
