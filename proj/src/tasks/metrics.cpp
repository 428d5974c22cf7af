#include "vw/tasks/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vw/core/error.hpp"

namespace vw::tasks {

double mean_average_precision(const std::vector<std::vector<ScoredBox>>& predictions,
                              const std::vector<std::vector<Box>>& ground_truth,
                              double iou_threshold) {
  if (predictions.size() != ground_truth.size())
    throw Error(ErrorCode::kDimensionMismatch, "mAP: predictions and ground truth image counts differ");
  size_t n_gt = 0;
  for (const auto& g : ground_truth) n_gt += g.size();
  if (n_gt == 0) throw Error(ErrorCode::kUndefinedMetric, "mAP: no ground-truth boxes");

  struct Ranked {
    size_t image, index;
    double score;
  };
  std::vector<Ranked> ranked;
  for (size_t i = 0; i < predictions.size(); ++i) {
    for (size_t j = 0; j < predictions[i].size(); ++j) {
      if (!std::isfinite(predictions[i][j].score))
        throw Error(ErrorCode::kInvalidInput, "mAP: non-finite score");
      ranked.push_back({i, j, predictions[i][j].score});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> used(ground_truth.size());
  for (size_t i = 0; i < ground_truth.size(); ++i) used[i].assign(ground_truth[i].size(), false);

  std::vector<double> precision, recall;
  size_t tp = 0;
  for (size_t r = 0; r < ranked.size(); ++r) {
    const auto& gts = ground_truth[ranked[r].image];
    const Box& pb = predictions[ranked[r].image][ranked[r].index].box;
    int best = -1;
    double best_iou = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (used[ranked[r].image][g]) continue;
      const double v = iou(pb, gts[g]);
      if (v > best_iou) best_iou = v, best = static_cast<int>(g);
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      used[ranked[r].image][best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }

  for (size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0, prev_recall = 0;
  for (size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double mean_over_classes(const std::vector<double>& per_class) {
  if (per_class.empty()) throw Error(ErrorCode::kUndefinedMetric, "mAP: no classes");
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(per_class.size());
}

double classifier_accuracy(const Matrix& image_features, const std::vector<int>& labels,
                           const Matrix& text_features) {
  if (image_features.rows() == 0) throw Error(ErrorCode::kUndefinedMetric, "classifier accuracy: empty eval set");
  if (static_cast<Eigen::Index>(labels.size()) != image_features.rows())
    throw Error(ErrorCode::kDimensionMismatch, "classifier accuracy: label count");
  int correct = 0;
  for (Eigen::Index i = 0; i < image_features.rows(); ++i) {
    if (argmax_cosine(image_features.row(i).transpose(), text_features) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

int index_of(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorCode::kInvalidInput, "'" + name + "' is not in the concept set");
  return static_cast<int>(it - names.begin());
}

std::vector<std::string> captions(const std::string& template_text, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  const auto pos = template_text.find("{}");
  for (const auto& n : names) {
    out.push_back(pos == std::string::npos ? template_text + " " + n
                                           : template_text.substr(0, pos) + n + template_text.substr(pos + 2));
  }
  return out;
}

}  // namespace

double classifier_accuracy(const ClassificationBackend& cls, const TextEncoderBackend& txt,
                           const Matrix& vectors, const std::vector<LabeledImage>& eval_set,
                           const std::string& target_name, const std::vector<std::string>& concept_set,
                           const std::string& template_text) {
  if (eval_set.empty()) throw Error(ErrorCode::kUndefinedMetric, "classifier accuracy: empty eval set");
  const int target = index_of(concept_set, target_name);
  Matrix text = encode_texts(txt, captions(template_text, concept_set));
  text.row(target) = encode_prompt(txt, vectors, template_text).transpose();
  Matrix feats(static_cast<Eigen::Index>(eval_set.size()), text.cols());
  std::vector<int> labels;
  for (size_t i = 0; i < eval_set.size(); ++i) {
    feats.row(static_cast<Eigen::Index>(i)) = cls.embed_image(*eval_set[i].image).transpose();
    labels.push_back(index_of(concept_set, eval_set[i].label));
  }
  return classifier_accuracy(feats, labels, text);
}

std::vector<int> judge_images(const Judge& judge, const std::vector<Image>& images,
                              const std::vector<std::string>& concept_set) {
  const Matrix text = encode_texts(*judge.text, captions(judge.template_text, concept_set));
  const Matrix feats = judge.classifier->embed_images(images);
  std::vector<int> out;
  for (Eigen::Index i = 0; i < feats.rows(); ++i) out.push_back(argmax_cosine(feats.row(i).transpose(), text));
  return out;
}

double generation_accuracy_from_feature(const GenerationBackend& gen, const Vector& cond,
                                        const Judge& judge, const std::string& target_name,
                                        const std::vector<std::string>& concept_set, int n_samples,
                                        std::mt19937_64& rng) {
  if (n_samples < 1) throw Error(ErrorCode::kInvalidInput, "generation accuracy: n_samples < 1");
  const int target = index_of(concept_set, target_name);
  const Matrix c = cond.transpose().replicate(n_samples, 1);
  const std::vector<int> labels = judge_images(judge, gen.sample(c, rng), concept_set);
  const auto hits = std::count(labels.begin(), labels.end(), target);
  return static_cast<double>(hits) / static_cast<double>(n_samples);
}

double generation_accuracy(const GenerationBackend& gen, const TextEncoderBackend& txt,
                           const Matrix& vectors, const Judge& judge, const std::string& target_name,
                           const std::vector<std::string>& concept_set, int n_samples,
                           std::mt19937_64& rng, const std::string& template_text) {
  return generation_accuracy_from_feature(gen, encode_prompt(txt, vectors, template_text), judge,
                                          target_name, concept_set, n_samples, rng);
}

std::vector<ScoredBox> detect(const DetectionBackend& det, const Image& image, const Vector& text_feature,
                              double nms_iou, int max_detections) {
  const RegionSet rs = det.propose(image);
  const double tn = text_feature.norm();
  std::vector<ScoredBox> scored;
  for (size_t r = 0; r < rs.boxes.size(); ++r) {
    const double denom = rs.features.row(static_cast<Eigen::Index>(r)).norm() * tn;
    const double cos = denom > 0 ? rs.features.row(static_cast<Eigen::Index>(r)).dot(text_feature) / denom : 0.0;
    scored.push_back({rs.boxes[r], cos});
  }
  return non_max_suppression(std::move(scored), nms_iou, max_detections);
}

}  // namespace vw::tasks
