#pragma once

#include <random>
#include <string>
#include <vector>

#include "vw/ad/params.hpp"
#include "vw/tasks/backends.hpp"

namespace vw::toy {

/// Stacks images into a (n * H * W) x 3 matrix in [-1, 1].
Matrix stack_images(const std::vector<const Image*>& images);
/// 2x average pooling followed by nearest upsampling, the degradation a
/// generated image goes through.
Image coarsen(const Image& image);

struct ClassifierConfig {
  std::vector<int> channels = {16, 32, 48, 64};
  int feature_dim = 32;
  int image_size = 32;
};

/// Convolutional image tower of the dual encoder.
class ToyClassifier : public tasks::ClassificationBackend {
 public:
  ToyClassifier(std::string model_id, ClassifierConfig config, std::mt19937_64& rng);
  ToyClassifier(std::string model_id, ClassifierConfig config, ad::ParamSet params);

  const std::string& model_id() const override { return model_id_; }
  Vector embed_image(const Image& image) const override;
  Matrix embed_images(const std::vector<Image>& images) const override;

  /// pixels as from stack_images; returns n x feature_dim.
  ad::Var forward(ad::Binding& params, const Matrix& pixels, int n) const;

  const ClassifierConfig& config() const { return config_; }
  const ad::ParamSet& params() const { return params_; }
  void set_params(ad::ParamSet p) { params_ = std::move(p); }
  void set_model_id(std::string id) { model_id_ = std::move(id); }

 private:
  std::string model_id_;
  ClassifierConfig config_;
  ad::ParamSet params_;
};

struct DetectorConfig {
  std::vector<int> channels = {16, 32, 32};
  int hidden = 64;
  int feature_dim = 32;
  std::vector<int> scales = {8, 12, 16};
  int grid = 16;
  int image_size = 32;
};

/// Region-feature detector: a stride-2 feature map pooled over a fixed
/// lattice of square anchors (inner box, centre and context rings) and
/// projected into the text feature space.
class ToyDetector : public tasks::DetectionBackend {
 public:
  ToyDetector(std::string model_id, DetectorConfig config, std::mt19937_64& rng);
  ToyDetector(std::string model_id, DetectorConfig config, ad::ParamSet params);

  const std::string& model_id() const override { return model_id_; }
  tasks::RegionSet propose(const Image& image) const override;

  const std::vector<tasks::Box>& anchors() const { return anchors_; }
  ad::Var feature_map(ad::Binding& params, const Matrix& pixels, int n) const;
  /// One row per (item, anchor index) pair.
  ad::Var region_features(ad::Binding& params, ad::Var fmap, int n,
                          const std::vector<std::pair<int, int>>& regions) const;

  const DetectorConfig& config() const { return config_; }
  const ad::ParamSet& params() const { return params_; }
  void set_params(ad::ParamSet p) { params_ = std::move(p); }
  void set_model_id(std::string id) { model_id_ = std::move(id); }

 private:
  void build_anchors();
  int map_size() const { return config_.image_size / 2; }

  std::string model_id_;
  DetectorConfig config_;
  ad::ParamSet params_;
  std::vector<tasks::Box> anchors_;
};

struct DenoiserConfig {
  int c1 = 12;
  int c2 = 24;
  int cond_dim = 32;
  int time_dim = 16;
  int hidden = 64;
  int n_steps = 50;
  int image_size = 32;
  /// Fraction of training items whose condition is zeroed, so the same
  /// network also predicts unconditionally.
  double cond_dropout = 0.1;
  double guidance = 3.0;
};

/// Two-level convolutional noise predictor on a 2x average-pooled latent,
/// conditioned through FiLM on the text feature and a sinusoidal timestep.
class ToyDenoiser : public tasks::GenerationBackend {
 public:
  ToyDenoiser(std::string model_id, DenoiserConfig config, std::mt19937_64& rng);
  ToyDenoiser(std::string model_id, DenoiserConfig config, ad::ParamSet params);

  const std::string& model_id() const override { return model_id_; }
  const tasks::DiffusionSchedule& schedule() const override { return schedule_; }
  tasks::LatentShape latent_shape() const override;
  int condition_dim() const override { return config_.cond_dim; }
  double guidance_scale() const override { return config_.guidance; }
  Matrix encode_latent(const Image& image) const override;
  Image decode_latent(const Matrix& latent) const override;
  ad::Var predict_noise(ad::Tape& tape, ad::Var z_t, const std::vector<int>& t, ad::Var cond) const override;

  /// Raw network output, the velocity v = sqrt(ab) eps - sqrt(1 - ab) z_0;
  /// predict_noise converts it to eps.
  ad::Var forward(ad::Binding& params, ad::Var z_t, const std::vector<int>& t, ad::Var cond) const;

  const DenoiserConfig& config() const { return config_; }
  const ad::ParamSet& params() const { return params_; }
  void set_params(ad::ParamSet p) { params_ = std::move(p); }
  void set_model_id(std::string id) { model_id_ = std::move(id); }

 private:
  Matrix time_embedding(const std::vector<int>& t) const;

  std::string model_id_;
  DenoiserConfig config_;
  ad::ParamSet params_;
  tasks::DiffusionSchedule schedule_;
};

}  // namespace vw::toy
