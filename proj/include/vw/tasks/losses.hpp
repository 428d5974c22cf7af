#pragma once

#include <random>
#include <vector>

#include "vw/ad/tape.hpp"
#include "vw/tasks/backends.hpp"

namespace vw::tasks {

struct LossOptions {
  /// Cosine similarity when set; raw dot products otherwise.
  bool normalize = true;
  double iou_match = 0.5;
};

/// Mean over items of || eps - eps_theta(sqrt(ab_t) z + sqrt(1 - ab_t) eps, t, c) ||^2 / dim.
/// For each latent in order, t is drawn uniformly over the schedule and then
/// eps entry by entry.
ad::Var denoising_loss(ad::Tape& tape, const GenerationBackend& gen, ad::Var text_feature,
                       const std::vector<const Matrix*>& latents, std::mt19937_64& rng);

/// Mean over regions of w * cos(region, text); w = -1 for regions with IoU at
/// least iou_match against some ground-truth box.
ad::Var detection_loss(ad::Tape& tape, ad::Var text_feature, const RegionSet& regions,
                       const std::vector<Box>& gt_boxes, const LossOptions& options = {});

/// Mean over items of w * cos(image, text).
ad::Var classification_loss(ad::Tape& tape, ad::Var text_feature, const MatchedBatch& batch,
                            const LossOptions& options = {});

/// Region weights used by detection_loss.
std::vector<int> region_weights(const RegionSet& regions, const std::vector<Box>& gt_boxes,
                                double iou_match);

}  // namespace vw::tasks
