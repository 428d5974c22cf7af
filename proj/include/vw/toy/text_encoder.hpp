#pragma once

#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vw/ad/params.hpp"
#include "vw/tasks/backends.hpp"

namespace vw::toy {

enum class TokenStyle {
  kPlain,   // "red", specials "<bos>" ...
  kMarker,  // "▁red", specials "[BOS]" ...
};

struct TextConfig {
  std::string model_id;
  TokenStyle style = TokenStyle::kPlain;
  int dim = 32;
  int blocks = 4;
  int heads = 2;
  int max_len = 16;
  int mlp_mult = 4;
  int feature_dim = 32;
};

/// Word-level causal transformer text encoder: token embedding, square input
/// projection, learned positions, pre-norm blocks, and a final norm and
/// projection applied to the pooling token that closes every sequence.
class ToyTextEncoder : public tasks::TextEncoderBackend {
 public:
  /// Fresh randomly initialized encoder over the shared toy vocabulary.
  ToyTextEncoder(TextConfig config, std::mt19937_64& rng);
  ToyTextEncoder(TextConfig config, ad::ParamSet params);

  const std::string& model_id() const override { return config_.model_id; }
  const embedding::EmbeddingTable& embeddings() const override { return *table_; }
  int block_count() const override { return config_.blocks; }
  int feature_dim() const override { return config_.feature_dim; }
  tasks::TokenSequence tokenize(std::string_view text, int k = 0) const override;
  tasks::Encoded encode(ad::Tape& tape, const std::vector<tasks::TokenSequence>& seqs, ad::Var injected,
                        const tasks::EncodeOptions& options = {}) const override;

  /// Same computation with parameters bound through `params`, so the
  /// caller decides which weights receive gradients.
  tasks::Encoded forward(ad::Binding& params, const std::vector<tasks::TokenSequence>& seqs, ad::Var injected,
                         const tasks::EncodeOptions& options = {}) const;

  const TextConfig& config() const { return config_; }
  const ad::ParamSet& params() const { return params_; }
  /// Replaces the weights (same names and shapes) and refreshes the table.
  void set_params(ad::ParamSet params);
  void set_model_id(std::string id);

  std::string token_for(const std::string& word) const;
  int placeholder_id() const { return placeholder_; }

 private:
  void build_vocabulary();

  TextConfig config_;
  ad::ParamSet params_;
  std::vector<std::string> tokens_;
  std::set<std::string> specials_;
  std::shared_ptr<embedding::EmbeddingTable> table_;
  int bos_ = 0, pool_ = 0, pad_ = 0, placeholder_ = 0;
};

}  // namespace vw::toy
