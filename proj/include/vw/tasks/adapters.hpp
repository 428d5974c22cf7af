#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vw/embedding/transfer.hpp"
#include "vw/tasks/backends.hpp"
#include "vw/tasks/losses.hpp"
#include "vw/tasks/metrics.hpp"

namespace vw::tasks {

/// Training and evaluation material for one concept.
struct ConceptData {
  std::string name;
  std::vector<Example> train;
  std::vector<Example> eval;
  /// Other-concept images: negatives for the classification loss.
  std::vector<Example> negatives;
  /// Other-concept images mixed into the classification eval set.
  std::vector<Example> distractors;
  std::vector<std::string> concept_set;
};

struct AdapterOptions {
  std::string template_text = "a photo of {}";
  LossOptions loss;
  int generation_samples = 64;
  int negatives_per_batch = 8;
  double nms_iou = 0.5;
  int max_detections = 10;
};

/// Loss and metric of one task, bound to one model and one concept.
class TaskAdapter {
 public:
  virtual ~TaskAdapter() = default;

  virtual TaskId task() const = 0;
  virtual const TextEncoderBackend& text() const = 0;
  const std::string& model_id() const { return text().model_id(); }
  virtual const ConceptData& data() const = 0;
  virtual int train_size() const { return static_cast<int>(data().train.size()); }

  /// Differentiable loss of the prompt on the given training items.
  virtual ad::Var loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& items,
                       std::mt19937_64& rng) const = 0;
  /// Metric on the eval split, in [0, 1].
  virtual double metric(const Matrix& vectors, std::mt19937_64& rng) const = 0;
};

class GenerationAdapter : public TaskAdapter {
 public:
  GenerationAdapter(const GenerationBackend& gen, const TextEncoderBackend& txt, Judge judge,
                    std::shared_ptr<const ConceptData> data, AdapterOptions options = {});

  TaskId task() const override { return TaskId::kGeneration; }
  const TextEncoderBackend& text() const override { return txt_; }
  const ConceptData& data() const override { return *data_; }
  ad::Var loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& items,
               std::mt19937_64& rng) const override;
  double metric(const Matrix& vectors, std::mt19937_64& rng) const override;

 private:
  const GenerationBackend& gen_;
  const TextEncoderBackend& txt_;
  Judge judge_;
  std::shared_ptr<const ConceptData> data_;
  AdapterOptions options_;
  std::vector<Matrix> latents_;
};

class DetectionAdapter : public TaskAdapter {
 public:
  DetectionAdapter(const DetectionBackend& det, const TextEncoderBackend& txt,
                   std::shared_ptr<const ConceptData> data, AdapterOptions options = {});

  TaskId task() const override { return TaskId::kDetection; }
  const TextEncoderBackend& text() const override { return txt_; }
  const ConceptData& data() const override { return *data_; }
  ad::Var loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& items,
               std::mt19937_64& rng) const override;
  double metric(const Matrix& vectors, std::mt19937_64& rng) const override;

 private:
  const DetectionBackend& det_;
  const TextEncoderBackend& txt_;
  std::shared_ptr<const ConceptData> data_;
  AdapterOptions options_;
  std::vector<RegionSet> train_regions_;
  std::vector<std::vector<Box>> train_targets_;
  std::vector<RegionSet> eval_regions_;
  std::vector<std::vector<Box>> eval_targets_;
};

class ClassificationAdapter : public TaskAdapter {
 public:
  ClassificationAdapter(const ClassificationBackend& cls, const TextEncoderBackend& txt,
                        std::shared_ptr<const ConceptData> data, AdapterOptions options = {});

  TaskId task() const override { return TaskId::kClassification; }
  const TextEncoderBackend& text() const override { return txt_; }
  const ConceptData& data() const override { return *data_; }
  ad::Var loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& items,
               std::mt19937_64& rng) const override;
  double metric(const Matrix& vectors, std::mt19937_64& rng) const override;

 private:
  const ClassificationBackend& cls_;
  const TextEncoderBackend& txt_;
  std::shared_ptr<const ConceptData> data_;
  AdapterOptions options_;
  Matrix train_features_;
  Matrix negative_features_;
  Matrix eval_features_;
  std::vector<int> eval_labels_;
};

/// Boxes of `target_name` among an example's annotations; unlabeled boxes count
/// as the concept.
std::vector<Box> target_boxes(const Example& example, const std::string& target_name);

/// Applies the map to prompt vectors trained on `train` and scores them with
/// `eval`. The input vectors are left untouched.
double evaluate_transferred(const TaskAdapter& train, const TaskAdapter& eval,
                            const embedding::TransferMap& map, const std::string& prompt_model_id,
                            const Matrix& vectors, std::mt19937_64& rng);

}  // namespace vw::tasks
