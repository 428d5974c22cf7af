#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vw/core/types.hpp"
#include "vw/embedding/table.hpp"
#include "vw/tasks/adapters.hpp"

namespace vw::learn {

struct ConceptSpec {
  std::string concept_name;
  std::string dataset_id;
  /// Token the prompt starts from; also the anchor of constrained runs.
  std::string init_word;
  int k = 4;

  void validate(const embedding::EmbeddingTable& table) const;
};

struct ConstraintSpec {
  std::string anchor;
  double delta = 0.5;
  /// delta times the anchor's nearest-word distance.
  double cached_cap = 0.0;
};

ConstraintSpec make_constraint(const embedding::EmbeddingTable& table, const std::string& anchor,
                               double delta);

struct TrainConfig {
  double learning_rate = 1e-4;
  int steps = 1000;
  int batch_size = 8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  /// Stable hash of every field.
  std::string digest() const;
};

struct LossPoint {
  int step = 0;
  double loss = 0.0;
};

struct SoftPrompt {
  ConceptSpec spec;
  std::string model_id;
  tasks::TaskId task_id = tasks::TaskId::kClassification;
  Matrix vectors;  // k x d
  std::optional<ConstraintSpec> constraint;
  std::vector<LossPoint> loss_trace;
  /// Largest normalized radius over the k vectors after each step; empty
  /// for unconstrained prompts.
  std::vector<double> radius_trace;
  std::string config_digest;
};

using TokenOverrides = std::map<std::string, std::string>;

/// The prompt's starting token for a concept name: the name itself when it
/// is one token, else the override, else the first sub-token.
std::string select_init_word(const std::string& concept_name, const embedding::EmbeddingTable& table,
                             const TokenOverrides& overrides = {});

/// Word-level split of a name into vocabulary tokens (spaces, '_' and '-'
/// separate words; unknown words are dropped).
std::vector<std::string> vocabulary_tokens(const std::string& name, const embedding::EmbeddingTable& table);

SoftPrompt init_prompt(const embedding::EmbeddingTable& table, const ConceptSpec& spec,
                       tasks::TaskId task, double jitter_sigma = 1e-4, std::uint64_t seed = 0);

struct OptimizeHooks {
  std::function<void(int step, double loss, const Matrix& vectors)> on_step;
};

/// Adam on the prompt vectors only, with projection onto the anchor ball
/// after every update when the prompt is constrained.
SoftPrompt optimize(SoftPrompt prompt, const tasks::TaskAdapter& adapter, const TrainConfig& config,
                    const OptimizeHooks& hooks = {});

/// Minibatch indices for one step: without replacement when the pool is at
/// least as large as the batch, with replacement otherwise.
std::vector<int> draw_minibatch(int pool, int batch_size, std::mt19937_64& rng);

void save_prompt(const std::filesystem::path& path, const SoftPrompt& prompt);
SoftPrompt load_prompt(const std::filesystem::path& path);
std::filesystem::path loss_trace_path(const std::filesystem::path& prompt_path);

/// Prompt on the target model of `map`, for transferred evaluation.
double evaluate_transferred(const tasks::TaskAdapter& train, const tasks::TaskAdapter& eval,
                            const embedding::TransferMap& map, const SoftPrompt& prompt,
                            std::mt19937_64& rng);

}  // namespace vw::learn
