#pragma once

// Small hand-checkable backends for exercising losses and metrics.

#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "vw/ad/ops.hpp"
#include "vw/core/error.hpp"
#include "vw/tasks/backends.hpp"

namespace vw::testing {

/// Feature = (sum of the token embeddings of a sequence) * W. Filler words
/// embed to zero, so "a photo of x" encodes like "x" alone.
class LinearText : public tasks::TextEncoderBackend {
 public:
  LinearText(std::string id, std::vector<std::string> words, Matrix word_embed, Matrix w,
             std::vector<std::string> fillers = {"a", "photo", "of"})
      : id_(std::move(id)), w_(std::move(w)) {
    std::vector<std::string> tokens = {"<v>"};
    tokens.insert(tokens.end(), fillers.begin(), fillers.end());
    tokens.insert(tokens.end(), words.begin(), words.end());
    Matrix e = Matrix::Zero(static_cast<Eigen::Index>(tokens.size()), word_embed.cols());
    e.bottomRows(word_embed.rows()) = word_embed;
    table_ = std::make_shared<embedding::EmbeddingTable>(id_, tokens, e, std::set<std::string>{"<v>"});
  }

  const std::string& model_id() const override { return id_; }
  const embedding::EmbeddingTable& embeddings() const override { return *table_; }
  int block_count() const override { return 1; }
  int feature_dim() const override { return static_cast<int>(w_.cols()); }

  tasks::TokenSequence tokenize(std::string_view text, int k) const override {
    tasks::TokenSequence s;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) {
      if (word == "{}") {
        for (int i = 0; i < k; ++i) s.placeholders.push_back(static_cast<int>(s.ids.size())), s.ids.push_back(0);
      } else {
        auto id = table_->find(word);
        if (!id) throw Error(ErrorCode::kNotFound, word);
        s.ids.push_back(*id);
      }
    }
    s.pool = static_cast<int>(s.ids.size()) - 1;
    return s;
  }

  tasks::Encoded encode(ad::Tape& tape, const std::vector<tasks::TokenSequence>& seqs, ad::Var injected,
                        const tasks::EncodeOptions& = {}) const override {
    std::vector<int> ids, slots;
    Matrix gather = Matrix::Zero(static_cast<Eigen::Index>(seqs.size()), 0);
    int total = 0;
    for (const auto& s : seqs) total += static_cast<int>(s.ids.size());
    gather = Matrix::Zero(static_cast<Eigen::Index>(seqs.size()), total);
    int off = 0;
    for (size_t i = 0; i < seqs.size(); ++i) {
      for (size_t j = 0; j < seqs[i].ids.size(); ++j) {
        ids.push_back(seqs[i].ids[j]);
        gather(static_cast<Eigen::Index>(i), off + static_cast<Eigen::Index>(j)) = 1.0;
      }
      if (injected.valid())
        for (int p : seqs[i].placeholders) slots.push_back(off + p);
      off += static_cast<int>(seqs[i].ids.size());
    }
    ad::Var x = ad::rows(tape.constant(table_->matrix()), ids);
    if (!slots.empty()) {
      std::vector<ad::Var> parts(slots.size() / static_cast<size_t>(injected.rows()), injected);
      x = ad::replace_rows(x, slots, ad::concat_rows(parts));
    }
    return {ad::matmul(ad::matmul(tape.constant(std::move(gather)), x), tape.constant(w_)), {}};
  }

 private:
  std::string id_;
  Matrix w_;
  std::shared_ptr<embedding::EmbeddingTable> table_;
};

/// Feature = mean RGB of the image in [-1, 1], optionally followed by a map.
class MeanColorClassifier : public tasks::ClassificationBackend {
 public:
  explicit MeanColorClassifier(std::string id = "mean-color") : id_(std::move(id)) {}
  const std::string& model_id() const override { return id_; }
  Vector embed_image(const Image& image) const override {
    return image_to_matrix(image).colwise().mean().transpose();
  }

 private:
  std::string id_;
};

/// Returns the same feature for every image.
class ConstantClassifier : public tasks::ClassificationBackend {
 public:
  explicit ConstantClassifier(Vector f) : f_(std::move(f)) {}
  const std::string& model_id() const override { return id_; }
  Vector embed_image(const Image&) const override { return f_; }

 private:
  std::string id_ = "constant";
  Vector f_;
};

/// Generator on a tiny latent. `leak` makes predict_noise return the exact
/// noise for latents equal to `z0`; otherwise it predicts zero and records
/// its inputs.
class RecordingGenerator : public tasks::GenerationBackend {
 public:
  RecordingGenerator(Matrix z0, bool leak) : z0_(std::move(z0)), leak_(leak), sched_(tasks::DiffusionSchedule::cosine(50)) {}

  const std::string& model_id() const override { return id_; }
  const tasks::DiffusionSchedule& schedule() const override { return sched_; }
  tasks::LatentShape latent_shape() const override { return {static_cast<int>(z0_.rows()), 1, static_cast<int>(z0_.cols())}; }
  int condition_dim() const override { return 2; }
  Matrix encode_latent(const Image&) const override { return z0_; }
  Image decode_latent(const Matrix&) const override { return Image(1, 1); }

  ad::Var predict_noise(ad::Tape& tape, ad::Var z_t, const std::vector<int>& t, ad::Var cond) const override {
    last_z = z_t.value();
    last_t = t;
    last_cond = cond.value();
    if (!leak_) return ad::scale(z_t, 0.0);
    Matrix eps(z_t.rows(), z_t.cols());
    const Eigen::Index p = z0_.rows();
    for (size_t i = 0; i < t.size(); ++i) {
      const double ab = sched_.alpha_bar[t[i]];
      eps.middleRows(static_cast<Eigen::Index>(i) * p, p) =
          (z_t.value().middleRows(static_cast<Eigen::Index>(i) * p, p) - std::sqrt(ab) * z0_) / std::sqrt(1 - ab);
    }
    return tape.constant(std::move(eps));
  }

  mutable Matrix last_z, last_cond;
  mutable std::vector<int> last_t;

 private:
  std::string id_ = "recording";
  Matrix z0_;
  bool leak_;
  tasks::DiffusionSchedule sched_;
};

/// Emits a fixed list of images regardless of the condition.
class CannedGenerator : public tasks::GenerationBackend {
 public:
  explicit CannedGenerator(std::vector<Image> images) : images_(std::move(images)), sched_(tasks::DiffusionSchedule::cosine(50)) {}
  const std::string& model_id() const override { return id_; }
  const tasks::DiffusionSchedule& schedule() const override { return sched_; }
  tasks::LatentShape latent_shape() const override { return {1, 1, 3}; }
  int condition_dim() const override { return 0; }
  Matrix encode_latent(const Image&) const override { return Matrix::Zero(1, 3); }
  Image decode_latent(const Matrix&) const override { return images_.front(); }
  ad::Var predict_noise(ad::Tape& tape, ad::Var z_t, const std::vector<int>&, ad::Var) const override {
    return tape.constant(Matrix::Zero(z_t.rows(), z_t.cols()));
  }
  std::vector<Image> sample(const Matrix& cond, std::mt19937_64&) const override {
    std::vector<Image> out;
    for (Eigen::Index i = 0; i < cond.rows(); ++i) out.push_back(images_[static_cast<size_t>(i) % images_.size()]);
    return out;
  }

 private:
  std::string id_ = "canned";
  std::vector<Image> images_;
  tasks::DiffusionSchedule sched_;
};

inline Image solid(std::uint8_t r, std::uint8_t g, std::uint8_t b, int size = 4) {
  Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      auto* p = img.at(x, y);
      p[0] = r, p[1] = g, p[2] = b;
    }
  return img;
}

}  // namespace vw::testing
