#pragma once

#include <random>
#include <string>
#include <vector>

#include "vw/tasks/backends.hpp"

namespace vw::tasks {

/// Single-class average precision over a set of images. Predictions are
/// ranked by descending score (ties keep image-then-list order) and each is
/// matched greedily to the unmatched ground truth of highest IoU, counting a
/// hit when that IoU reaches the threshold. The area under the PR curve uses
/// the monotone precision envelope at every recall point.
double mean_average_precision(const std::vector<std::vector<ScoredBox>>& predictions,
                              const std::vector<std::vector<Box>>& ground_truth,
                              double iou_threshold = 0.5);

/// Mean of per-class values.
double mean_over_classes(const std::vector<double>& per_class);

/// Fraction of rows of `image_features` whose argmax-cosine text row equals
/// the label.
double classifier_accuracy(const Matrix& image_features, const std::vector<int>& labels,
                           const Matrix& text_features);

struct LabeledImage {
  const Image* image = nullptr;
  std::string label;
};

/// Each image is classified against "template" features of every name in
/// concept_set, except that `target_name` uses the prompt vectors.
double classifier_accuracy(const ClassificationBackend& cls, const TextEncoderBackend& txt,
                           const Matrix& vectors, const std::vector<LabeledImage>& eval_set,
                           const std::string& target_name, const std::vector<std::string>& concept_set,
                           const std::string& template_text = "a photo of {}");

/// Judge labels (indices into concept_set) of the given images.
std::vector<int> judge_images(const Judge& judge, const std::vector<Image>& images,
                              const std::vector<std::string>& concept_set);

/// Fraction of n_samples images generated from the prompt that the judge
/// assigns to `target_name`.
double generation_accuracy(const GenerationBackend& gen, const TextEncoderBackend& txt,
                           const Matrix& vectors, const Judge& judge, const std::string& target_name,
                           const std::vector<std::string>& concept_set, int n_samples,
                           std::mt19937_64& rng, const std::string& template_text = "a photo of {}");

/// Condition-level variant used by probes that build the feature themselves.
double generation_accuracy_from_feature(const GenerationBackend& gen, const Vector& cond,
                                        const Judge& judge, const std::string& target_name,
                                        const std::vector<std::string>& concept_set, int n_samples,
                                        std::mt19937_64& rng);

/// Top-scoring detections for a text feature after NMS.
std::vector<ScoredBox> detect(const DetectionBackend& det, const Image& image, const Vector& text_feature,
                              double nms_iou = 0.5, int max_detections = 10);

}  // namespace vw::tasks
