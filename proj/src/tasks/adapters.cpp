#include "vw/tasks/adapters.hpp"
#include "vw/ad/ops.hpp"

#include <algorithm>

#include "vw/core/error.hpp"

namespace vw::tasks {

std::vector<Box> target_boxes(const Example& example, const std::string& target_name) {
  std::vector<Box> out;
  for (const Box& b : example.boxes)
    if (!b.class_label || *b.class_label == target_name) out.push_back(b);
  return out;
}

namespace {

void require_items(const std::vector<int>& items, int n) {
  if (items.empty()) throw Error(ErrorCode::kInvalidInput, "loss: empty minibatch");
  for (int i : items)
    if (i < 0 || i >= n) throw Error(ErrorCode::kInvalidInput, "loss: item index out of range");
}

}  // namespace

GenerationAdapter::GenerationAdapter(const GenerationBackend& gen, const TextEncoderBackend& txt,
                                     Judge judge, std::shared_ptr<const ConceptData> data,
                                     AdapterOptions options)
    : gen_(gen), txt_(txt), judge_(judge), data_(std::move(data)), options_(std::move(options)) {
  for (const Example& e : data_->train) latents_.push_back(gen_.encode_latent(e.image));
}

ad::Var GenerationAdapter::loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& items,
                                std::mt19937_64& rng) const {
  require_items(items, static_cast<int>(latents_.size()));
  ad::Var feature = prompt_feature(tape, txt_, vectors, options_.template_text);
  std::vector<const Matrix*> batch;
  for (int i : items) batch.push_back(&latents_[i]);
  return denoising_loss(tape, gen_, feature, batch, rng);
}

double GenerationAdapter::metric(const Matrix& vectors, std::mt19937_64& rng) const {
  return generation_accuracy(gen_, txt_, vectors, judge_, data_->name, data_->concept_set,
                             options_.generation_samples, rng, options_.template_text);
}

DetectionAdapter::DetectionAdapter(const DetectionBackend& det, const TextEncoderBackend& txt,
                                   std::shared_ptr<const ConceptData> data, AdapterOptions options)
    : det_(det), txt_(txt), data_(std::move(data)), options_(std::move(options)) {
  for (const Example& e : data_->train) {
    train_regions_.push_back(det_.propose(e.image));
    train_targets_.push_back(target_boxes(e, data_->name));
  }
  for (const Example& e : data_->eval) {
    eval_regions_.push_back(det_.propose(e.image));
    eval_targets_.push_back(target_boxes(e, data_->name));
  }
}

ad::Var DetectionAdapter::loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& items,
                               std::mt19937_64&) const {
  require_items(items, static_cast<int>(train_regions_.size()));
  ad::Var feature = prompt_feature(tape, txt_, vectors, options_.template_text);
  ad::Var total;
  for (int i : items) {
    ad::Var l = detection_loss(tape, feature, train_regions_[i], train_targets_[i], options_.loss);
    total = total.valid() ? ad::add(total, l) : l;
  }
  return ad::scale(total, 1.0 / static_cast<double>(items.size()));
}

double DetectionAdapter::metric(const Matrix& vectors, std::mt19937_64&) const {
  if (eval_regions_.empty()) throw Error(ErrorCode::kUndefinedMetric, "detection metric: empty eval set");
  const Vector text = encode_prompt(txt_, vectors, options_.template_text);
  const double tn = text.norm();
  std::vector<std::vector<ScoredBox>> preds;
  for (const RegionSet& rs : eval_regions_) {
    std::vector<ScoredBox> scored;
    for (size_t r = 0; r < rs.boxes.size(); ++r) {
      const auto row = rs.features.row(static_cast<Eigen::Index>(r));
      const double denom = row.norm() * tn;
      scored.push_back({rs.boxes[r], denom > 0 ? row.dot(text) / denom : 0.0});
    }
    preds.push_back(non_max_suppression(std::move(scored), options_.nms_iou, options_.max_detections));
  }
  return mean_average_precision(preds, eval_targets_, options_.loss.iou_match);
}

ClassificationAdapter::ClassificationAdapter(const ClassificationBackend& cls,
                                             const TextEncoderBackend& txt,
                                             std::shared_ptr<const ConceptData> data,
                                             AdapterOptions options)
    : cls_(cls), txt_(txt), data_(std::move(data)), options_(std::move(options)) {
  auto embed = [&](const std::vector<Example>& xs) {
    std::vector<Image> imgs;
    for (const Example& e : xs) imgs.push_back(e.image);
    return imgs.empty() ? Matrix() : cls_.embed_images(imgs);
  };
  train_features_ = embed(data_->train);
  negative_features_ = embed(data_->negatives);
  std::vector<Example> eval = data_->eval;
  eval.insert(eval.end(), data_->distractors.begin(), data_->distractors.end());
  eval_features_ = embed(eval);
  for (const Example& e : eval) {
    auto it = std::find(data_->concept_set.begin(), data_->concept_set.end(), e.label);
    if (it == data_->concept_set.end())
      throw Error(ErrorCode::kInvalidInput, "classification: eval label '" + e.label + "' not in concept set");
    eval_labels_.push_back(static_cast<int>(it - data_->concept_set.begin()));
  }
}

ad::Var ClassificationAdapter::loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& items,
                                    std::mt19937_64& rng) const {
  require_items(items, static_cast<int>(train_features_.rows()));
  ad::Var feature = prompt_feature(tape, txt_, vectors, options_.template_text);
  MatchedBatch batch;
  for (int i : items) batch.add(train_features_.row(i).transpose(), -1);
  if (negative_features_.rows() > 0) {
    std::uniform_int_distribution<Eigen::Index> pick(0, negative_features_.rows() - 1);
    for (int j = 0; j < options_.negatives_per_batch; ++j) batch.add(negative_features_.row(pick(rng)).transpose(), 1);
  }
  return classification_loss(tape, feature, batch, options_.loss);
}

double ClassificationAdapter::metric(const Matrix& vectors, std::mt19937_64&) const {
  if (eval_features_.rows() == 0) throw Error(ErrorCode::kUndefinedMetric, "classification metric: empty eval set");
  const auto& names = data_->concept_set;
  const auto target = std::find(names.begin(), names.end(), data_->name);
  if (target == names.end()) throw Error(ErrorCode::kInvalidInput, "classification: concept not in concept set");
  std::vector<std::string> caps;
  const auto pos = options_.template_text.find("{}");
  for (const auto& n : names)
    caps.push_back(options_.template_text.substr(0, pos) + n + options_.template_text.substr(pos + 2));
  Matrix text = encode_texts(txt_, caps);
  text.row(target - names.begin()) = encode_prompt(txt_, vectors, options_.template_text).transpose();
  return classifier_accuracy(eval_features_, eval_labels_, text);
}

double evaluate_transferred(const TaskAdapter& train, const TaskAdapter& eval,
                            const embedding::TransferMap& map, const std::string& prompt_model_id,
                            const Matrix& vectors, std::mt19937_64& rng) {
  if (prompt_model_id != train.model_id() || prompt_model_id != map.source_model_id)
    throw Error(ErrorCode::kModelMismatch, "transfer: prompt model '" + prompt_model_id +
                                               "' does not match map source '" + map.source_model_id + "'");
  if (eval.model_id() != map.target_model_id)
    throw Error(ErrorCode::kModelMismatch, "transfer: eval model '" + eval.model_id() +
                                               "' does not match map target '" + map.target_model_id + "'");
  return eval.metric(embedding::apply_transfer(map, vectors), rng);
}

}  // namespace vw::tasks
