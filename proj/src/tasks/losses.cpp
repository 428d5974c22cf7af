#include "vw/tasks/losses.hpp"

#include <cmath>

#include "vw/ad/ops.hpp"
#include "vw/core/error.hpp"

namespace vw::tasks {

namespace {

// Weighted mean of rows(features) . text, with text l2-normalized on the
// tape when requested.
ad::Var weighted_similarity(ad::Tape& tape, ad::Var text_feature, Matrix features,
                            const std::vector<int>& weights, bool normalize) {
  if (text_feature.rows() != 1 || text_feature.cols() != features.cols())
    throw Error(ErrorCode::kDimensionMismatch, "loss: text feature width");
  if (normalize) {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const double n = features.row(i).norm();
      if (n > 0) features.row(i) /= n;
    }
    text_feature = ad::l2_normalize_rows(text_feature);
  }
  Matrix w(features.rows(), 1);
  for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, 0) = weights[i];
  const double inv_n = 1.0 / static_cast<double>(features.rows());
  ad::Var sims = ad::matmul_nt(tape.constant(std::move(features)), text_feature);
  return ad::scale(ad::sum(ad::mul(sims, tape.constant(std::move(w)))), inv_n);
}

}  // namespace

ad::Var denoising_loss(ad::Tape& tape, const GenerationBackend& gen, ad::Var text_feature,
                       const std::vector<const Matrix*>& latents, std::mt19937_64& rng) {
  if (latents.empty()) throw Error(ErrorCode::kInvalidInput, "denoising_loss: empty batch");
  const DiffusionSchedule& sched = gen.schedule();
  const LatentShape ls = gen.latent_shape();
  const int n = static_cast<int>(latents.size());
  std::uniform_int_distribution<int> pick_t(0, sched.n_steps() - 1);
  std::normal_distribution<double> normal;
  Matrix z_t(static_cast<Eigen::Index>(n) * ls.pixels(), ls.channels);
  Matrix eps(z_t.rows(), z_t.cols());
  std::vector<int> ts(n);
  for (int i = 0; i < n; ++i) {
    const Matrix& z0 = *latents[i];
    if (z0.rows() != ls.pixels() || z0.cols() != ls.channels)
      throw Error(ErrorCode::kDimensionMismatch, "denoising_loss: latent shape");
    ts[i] = pick_t(rng);
    const double ab = sched.alpha_bar[ts[i]];
    auto e = eps.middleRows(static_cast<Eigen::Index>(i) * ls.pixels(), ls.pixels());
    for (Eigen::Index r = 0; r < e.rows(); ++r)
      for (Eigen::Index c = 0; c < e.cols(); ++c) e(r, c) = normal(rng);
    z_t.middleRows(static_cast<Eigen::Index>(i) * ls.pixels(), ls.pixels()) =
        std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * e;
  }
  ad::Var cond = text_feature.rows() == n ? text_feature : ad::repeat_rows(text_feature, n);
  ad::Var pred = gen.predict_noise(tape, tape.constant(std::move(z_t)), ts, cond);
  return ad::mse(pred, tape.constant(std::move(eps)));
}

std::vector<int> region_weights(const RegionSet& regions, const std::vector<Box>& gt_boxes,
                                double iou_match) {
  if (!(iou_match > 0.0 && iou_match <= 1.0))
    throw Error(ErrorCode::kInvalidInput, "detection: iou_match outside (0, 1]");
  std::vector<int> w(regions.boxes.size(), 1);
  bool any = false;
  for (size_t r = 0; r < regions.boxes.size(); ++r) {
    for (const Box& g : gt_boxes) {
      if (iou(regions.boxes[r], g) >= iou_match) {
        w[r] = -1;
        any = true;
        break;
      }
    }
  }
  if (!any) throw Error(ErrorCode::kUnmatchedTarget, "detection: no region matches a ground-truth box");
  return w;
}

ad::Var detection_loss(ad::Tape& tape, ad::Var text_feature, const RegionSet& regions,
                       const std::vector<Box>& gt_boxes, const LossOptions& options) {
  if (static_cast<Eigen::Index>(regions.boxes.size()) != regions.features.rows())
    throw Error(ErrorCode::kDimensionMismatch, "detection: boxes and features disagree");
  const std::vector<int> w = region_weights(regions, gt_boxes, options.iou_match);
  return weighted_similarity(tape, text_feature, regions.features, w, options.normalize);
}

ad::Var classification_loss(ad::Tape& tape, ad::Var text_feature, const MatchedBatch& batch,
                            const LossOptions& options) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidInput, "classification_loss: empty batch");
  Matrix f(static_cast<Eigen::Index>(batch.items.size()), batch.items[0].feature.size());
  std::vector<int> w;
  for (size_t i = 0; i < batch.items.size(); ++i) {
    if (batch.items[i].feature.size() != f.cols())
      throw Error(ErrorCode::kDimensionMismatch, "classification_loss: feature width");
    f.row(static_cast<Eigen::Index>(i)) = batch.items[i].feature.transpose();
    w.push_back(batch.items[i].weight);
  }
  return weighted_similarity(tape, text_feature, std::move(f), w, options.normalize);
}

}  // namespace vw::tasks
