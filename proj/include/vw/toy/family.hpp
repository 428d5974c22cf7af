#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vw/toy/scene.hpp"
#include "vw/toy/text_encoder.hpp"
#include "vw/toy/vision.hpp"

namespace vw::toy {

/// A and B are the two independently trained families; J is the judge that
/// scores generated images (classifier and text tower only, trained on
/// every concept).
enum class Variant { kA, kB, kJudge };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);

struct FamilyConfig {
  TextConfig text;
  ClassifierConfig classifier;
  DetectorConfig detector;
  DenoiserConfig denoiser;
  std::uint64_t seed = 0;
  bool has_detector = true;
  bool has_denoiser = true;
};

FamilyConfig variant_config(Variant v);

/// Caption templates used to supervise the text tower.
const std::vector<std::string>& caption_templates();

struct PretrainConfig {
  int classifier_steps = 1500;
  int classifier_batch = 32;
  double classifier_lr = 2e-3;
  int detector_steps = 1200;
  int detector_batch = 16;
  double detector_lr = 2e-3;
  int denoiser_steps = 4000;
  int denoiser_batch = 32;
  double denoiser_lr = 2e-3;
  double logit_scale = 10.0;
  double min_accuracy = 0.9;
  /// Judge only: scenes rendered per step instead of read from disk.
  int judge_pool = 4800;
  /// Added to the variant's base seed.
  std::uint64_t seed_offset = 0;
  std::function<void(const std::string& stage, int step, double loss)> on_step;
};

struct PretrainReport {
  double held_in_accuracy = 0;
  /// Holdout images scored against captions of every concept.
  double holdout_zero_shot_accuracy = 0;
  double holdout_chance = 0;
  double detector_map = 0;
  double denoiser_loss = 0;
  double classifier_loss = 0;
  double detector_loss = 0;
  std::vector<std::string> held_in;
  std::vector<std::string> holdout;
};

struct ToyFamily {
  std::string model_id;
  Variant variant = Variant::kA;
  FamilyConfig config;
  std::shared_ptr<ToyTextEncoder> text;
  std::shared_ptr<ToyClassifier> classifier;
  std::shared_ptr<ToyDetector> detector;
  std::shared_ptr<ToyDenoiser> denoiser;
  PretrainReport report;

  tasks::Judge judge() const { return {classifier.get(), text.get(), "a photo of {}"}; }
  /// Digest over every weight of every head.
  std::string fingerprint() const;
};

/// Untrained family with the variant's architecture, initialized exactly as
/// pretrain_family starts from.
ToyFamily init_family(Variant variant, std::uint64_t seed_offset = 0);

/// Trains one family on the pretraining split of `data` (rooted at `root`).
/// Throws kPretrainingFailed when held-in accuracy misses the bar.
ToyFamily pretrain_family(Variant variant, const std::filesystem::path& root, const ShapesDataset& data,
                          const PretrainConfig& config = {});

/// Functionally identical copy with token embeddings E*Q and input
/// projection Q^-1*W, registered as "<id>-clone".
ToyFamily make_clone(const ToyFamily& family, std::uint64_t q_seed, double max_condition = 100.0);

void save_family(const std::filesystem::path& path, const ToyFamily& family);
ToyFamily load_family(const std::filesystem::path& path);

/// Captions "<template with concept>" for every name.
std::vector<std::string> captions(const std::vector<std::string>& names, const std::string& template_text);

}  // namespace vw::toy
