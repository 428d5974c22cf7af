#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vw/core/types.hpp"
#include "vw/tasks/backends.hpp"

namespace vw::analysis {

/// floor(i*B/n) for i = 1..n, as 1-indexed block outputs.
std::vector<int> evenly_spaced_layers(int block_count, int n);

/// Pooled feature after only the first n_blocks blocks, final norm included.
Vector truncated_encode(const tasks::TextEncoderBackend& txt, const tasks::TokenSequence& tokens,
                        const Matrix& injected, int n_blocks);

/// Pooled-token features of one prompt at several depths.
struct ActivationTrace {
  std::string model_id;
  std::string prompt_id;
  std::vector<int> layer_indices;
  Matrix features;  // one row per layer
  std::string anchor;
  std::string target;
};

ActivationTrace capture_activations(const tasks::TextEncoderBackend& txt, const Matrix& vectors,
                                    const std::string& template_text, const std::vector<int>& layers,
                                    std::string prompt_id = {}, std::string anchor = {}, std::string target = {});

void save_trace(const std::filesystem::path& path, const ActivationTrace& trace);
ActivationTrace load_trace(const std::filesystem::path& path);

/// Names one generated image.
using SampleJudge = std::function<std::string(const Image&)>;

/// Judge that labels by argmax cosine over "template" captions of `labels`.
SampleJudge make_sample_judge(const tasks::Judge& judge, std::vector<std::string> labels);

struct LayerFractions {
  int layer = 0;
  double anchor = 0;
  double target = 0;
  double other = 0;
};

struct ProbeReport {
  std::vector<LayerFractions> layers;
  /// Smallest probed depth where the target outnumbers the anchor.
  std::optional<int> transition_layer;
};

struct ProbeOptions {
  std::string template_text = "a photo of {}";
  int samples_per_layer = 32;
};

ProbeReport truncated_generation_probe(const tasks::GenerationBackend& gen, const tasks::TextEncoderBackend& txt,
                                       const Matrix& vectors, const SampleJudge& judge, const std::string& anchor,
                                       const std::string& target, const std::vector<int>& layers,
                                       std::mt19937_64& rng, const ProbeOptions& options = {});

/// Columns layer, anchor_fraction, target_fraction, other_fraction.
std::string probe_csv(const ProbeReport& report);

struct Projection {
  Matrix coords;  // n x 2
  /// Every input point was identical; coords are all zero.
  bool degenerate = false;
};

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
};

/// Exact t-SNE, deterministic given the seed. Perplexity is capped at
/// (n - 1) / 3 for small inputs.
Projection project_2d(const Matrix& points, std::uint64_t seed, const TsneOptions& options = {});

/// Leave-one-out nearest-centroid accuracy. Points whose class has a single
/// member are not scored; centroid ties go to the smaller label.
double cluster_purity(const Matrix& points, const std::vector<std::string>& labels);

}  // namespace vw::analysis
