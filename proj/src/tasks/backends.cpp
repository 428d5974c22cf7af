#include "vw/tasks/backends.hpp"

#include <cmath>
#include <limits>

#include "vw/core/error.hpp"

namespace vw::tasks {

ad::Var prompt_feature(ad::Tape& tape, const TextEncoderBackend& text, ad::Var vectors,
                       const std::string& template_text, const EncodeOptions& options) {
  const TokenSequence seq = text.tokenize(template_text, static_cast<int>(vectors.rows()));
  return text.encode(tape, {seq}, vectors, options).features;
}

Matrix encode_texts(const TextEncoderBackend& text, const std::vector<std::string>& texts) {
  std::vector<TokenSequence> seqs;
  seqs.reserve(texts.size());
  for (const auto& t : texts) seqs.push_back(text.tokenize(t));
  ad::Tape tape;
  return text.encode(tape, seqs, ad::Var()).features.value();
}

Vector encode_prompt(const TextEncoderBackend& text, const Matrix& vectors,
                     const std::string& template_text) {
  ad::Tape tape;
  return prompt_feature(tape, text, tape.constant(vectors), template_text).value().row(0).transpose();
}

std::vector<Image> GenerationBackend::sample(const Matrix& cond, std::mt19937_64& rng) const {
  const DiffusionSchedule& sched = schedule();
  const LatentShape ls = latent_shape();
  const int n = static_cast<int>(cond.rows());
  std::normal_distribution<double> normal;
  Matrix z(static_cast<Eigen::Index>(n) * ls.pixels(), ls.channels);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  Matrix x0 = z;
  const double w = guidance_scale();
  const bool guided = w != 1.0;
  // Guided steps run the conditional and unconditional halves as one batch.
  Matrix cond_in = cond;
  if (guided) {
    cond_in = Matrix::Zero(2 * n, cond.cols());
    cond_in.topRows(n) = cond;
  }
  const int batch = guided ? 2 * n : n;
  for (int t = sched.n_steps() - 1; t >= 0; --t) {
    ad::Tape tape;
    Matrix eps;
    if (guided) {
      Matrix zz(2 * z.rows(), z.cols());
      zz << z, z;
      const Matrix both = predict_noise(tape, tape.constant(zz), std::vector<int>(batch, t), tape.constant(cond_in)).value();
      eps = both.bottomRows(z.rows()) + w * (both.topRows(z.rows()) - both.bottomRows(z.rows()));
    } else {
      eps = predict_noise(tape, tape.constant(z), std::vector<int>(n, t), tape.constant(cond_in)).value();
    }
    const double ab = sched.alpha_bar[t];
    const double ab_prev = t > 0 ? sched.alpha_bar[t - 1] : 1.0;
    x0 = ((z - std::sqrt(1 - ab) * eps) / std::sqrt(ab)).cwiseMax(-1.0).cwiseMin(1.0);
    // Noise direction consistent with the clipped estimate.
    const Matrix dir = (z - std::sqrt(ab) * x0) / std::sqrt(1 - ab);
    z = std::sqrt(ab_prev) * x0 + std::sqrt(1 - ab_prev) * dir;
  }
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(decode_latent(x0.middleRows(static_cast<Eigen::Index>(i) * ls.pixels(), ls.pixels())));
  return out;
}

Matrix ClassificationBackend::embed_images(const std::vector<Image>& images) const {
  Matrix out;
  for (size_t i = 0; i < images.size(); ++i) {
    const Vector f = embed_image(images[i]);
    if (i == 0) out.resize(static_cast<Eigen::Index>(images.size()), f.size());
    out.row(static_cast<Eigen::Index>(i)) = f.transpose();
  }
  return out;
}

int argmax_cosine(const Vector& feature, const Matrix& text_features) {
  if (text_features.rows() == 0) throw Error(ErrorCode::kEmptyCandidates, "argmax_cosine: no classes");
  const double fn = feature.norm();
  int best = 0;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < text_features.rows(); ++c) {
    const double denom = fn * text_features.row(c).norm();
    const double cos = denom > 0 ? text_features.row(c).dot(feature) / denom : 0.0;
    if (cos > best_cos) {
      best_cos = cos;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace vw::tasks
