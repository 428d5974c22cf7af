#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vw/core/image.hpp"
#include "vw/datasets/manifest.hpp"
#include "vw/tasks/types.hpp"

namespace vw::toy {

inline const std::vector<std::string> kColors = {"red", "green", "blue", "yellow", "purple", "cyan"};
inline const std::vector<std::string> kShapes = {"circle", "square", "triangle", "cross"};

/// The 96 shared words of every toy vocabulary: colors, shapes, caption
/// words and unrelated nouns usable as anchors.
const std::vector<std::string>& vocabulary_words();
/// Every "color shape" name, colors major.
std::vector<std::string> all_concepts();
std::string concept_name(const std::string& color, const std::string& shape);

using ColorShape = std::pair<std::string, std::string>;

struct SceneObject {
  std::string shape;
  std::string color;
  tasks::Box box;  // square, integer-aligned
  std::string label() const { return color + " " + shape; }
};

struct ShapeScene {
  int width = 32;
  int height = 32;
  std::vector<SceneObject> objects;

  std::vector<tasks::Box> boxes() const;
};

/// Pixel mask of one shape in an s x s cell (row-major).
std::vector<bool> shape_mask(const std::string& shape, int size);
Image render_scene(const ShapeScene& scene, std::mt19937_64* color_jitter = nullptr);

struct SceneOptions {
  std::vector<int> primary_sizes = {12, 16};
  int distractor_size = 8;
  int max_distractors = 2;
  int max_retries = 200;
};

/// One scene whose largest object is `primary`; distractors are drawn from
/// `distractor_pool` (names) and never share the primary's concept.
ShapeScene sample_scene(const ColorShape& primary, const std::vector<ColorShape>& distractor_pool,
                        std::mt19937_64& rng, const SceneOptions& options = {});

struct ShapesDatasetOptions {
  std::uint64_t seed = 0;
  int n_train = 2400;
  int n_eval = 400;
  int concept_train_per = 16;
  int concept_eval_per = 16;
  std::vector<ColorShape> holdout = {{"red", "triangle"}, {"green", "cross"}, {"blue", "circle"}, {"yellow", "square"}};
  SceneOptions scene;
};

struct ShapesDataset {
  /// Scenes of held-in concepts only; supervises toy pretraining.
  datasets::DatasetManifest pretrain;
  /// Per-concept pools of every concept, holdouts included.
  datasets::DatasetManifest concepts;
};

inline constexpr const char* kPretrainManifest = "pretrain.jsonl";
inline constexpr const char* kConceptManifest = "concepts.jsonl";

/// Renders both datasets under `root` (PNG images plus two JSONL manifests).
ShapesDataset generate_shapes_dataset(const std::filesystem::path& root, const ShapesDatasetOptions& options);
ShapesDataset load_shapes_dataset(const std::filesystem::path& root);

std::vector<std::string> held_in_concepts(const std::vector<ColorShape>& holdout);

}  // namespace vw::toy
