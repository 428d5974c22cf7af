#pragma once

#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vw/ad/tape.hpp"
#include "vw/embedding/table.hpp"
#include "vw/tasks/types.hpp"

namespace vw::tasks {

/// Token ids of one prompt, with the rows where injected vectors go and the
/// row whose activation is the sequence feature.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<int> placeholders;
  int pool = 0;
};

struct EncodeOptions {
  /// Number of blocks to run; 0 means all of them.
  int n_blocks = 0;
  /// 1-indexed block outputs whose pooled activations are captured.
  std::vector<int> capture_layers;
};

struct Encoded {
  ad::Var features;               // n_seq x feature_dim
  std::vector<ad::Var> captured;  // one n_seq x feature_dim per capture layer
};

class TextEncoderBackend {
 public:
  virtual ~TextEncoderBackend() = default;

  virtual const std::string& model_id() const = 0;
  virtual const embedding::EmbeddingTable& embeddings() const = 0;
  virtual int block_count() const = 0;
  virtual int feature_dim() const = 0;

  /// Tokenizes `text`; each "{}" expands to k placeholder tokens.
  virtual TokenSequence tokenize(std::string_view text, int k = 0) const = 0;

  /// Encodes a batch of sequences. When `injected` is valid (k x d), its rows
  /// replace the embeddings at every sequence's placeholder positions.
  virtual Encoded encode(ad::Tape& tape, const std::vector<TokenSequence>& seqs, ad::Var injected,
                         const EncodeOptions& options = {}) const = 0;
};

/// Pooled feature of `template_text` with `vectors` at its placeholder.
ad::Var prompt_feature(ad::Tape& tape, const TextEncoderBackend& text, ad::Var vectors,
                       const std::string& template_text, const EncodeOptions& options = {});
/// Features of plain texts, one row each.
Matrix encode_texts(const TextEncoderBackend& text, const std::vector<std::string>& texts);
/// Inference-only prompt feature as a vector.
Vector encode_prompt(const TextEncoderBackend& text, const Matrix& vectors,
                     const std::string& template_text);

struct LatentShape {
  int height = 0;
  int width = 0;
  int channels = 0;
  int pixels() const { return height * width; }
  int size() const { return pixels() * channels; }
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  virtual const std::string& model_id() const = 0;
  virtual const DiffusionSchedule& schedule() const = 0;
  virtual LatentShape latent_shape() const = 0;
  virtual int condition_dim() const = 0;
  /// Latent as a pixels x channels matrix.
  virtual Matrix encode_latent(const Image& image) const = 0;
  virtual Image decode_latent(const Matrix& latent) const = 0;

  /// z_t stacks `t.size()` latents (pixels rows each); cond is one row per item.
  virtual ad::Var predict_noise(ad::Tape& tape, ad::Var z_t, const std::vector<int>& t,
                                ad::Var cond) const = 0;

  /// Classifier-free guidance weight used by sample(); the all-zero
  /// condition is the unconditional input. 1 disables guidance.
  virtual double guidance_scale() const { return 1.0; }

  /// Deterministic DDIM sampling over the full schedule, one image per row of cond.
  virtual std::vector<Image> sample(const Matrix& cond, std::mt19937_64& rng) const;
};

struct RegionSet {
  std::vector<Box> boxes;
  Matrix features;  // one row per box
};

class DetectionBackend {
 public:
  virtual ~DetectionBackend() = default;
  virtual const std::string& model_id() const = 0;
  virtual RegionSet propose(const Image& image) const = 0;
};

class ClassificationBackend {
 public:
  virtual ~ClassificationBackend() = default;
  virtual const std::string& model_id() const = 0;
  virtual Vector embed_image(const Image& image) const = 0;
  virtual Matrix embed_images(const std::vector<Image>& images) const;
};

/// A classifier with the text encoder that names its classes.
struct Judge {
  const ClassificationBackend* classifier = nullptr;
  const TextEncoderBackend* text = nullptr;
  std::string template_text = "a photo of {}";
};

/// Index of the row of `text_features` with the highest cosine to `feature`;
/// ties go to the lowest index.
int argmax_cosine(const Vector& feature, const Matrix& text_features);

}  // namespace vw::tasks
