#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vw/embedding/table.hpp"

namespace vw::embedding {

enum class NormalizeRule {
  kExact,
  /// Drops word-boundary decorations ("▁", "Ġ", "##", "</w>") and lowercases.
  kStripMarkerLowercase,
};

std::string normalize_token(std::string_view token, NormalizeRule rule);

struct AlignedPair {
  std::string token;  // normalized form
  int source_row = 0;
  int target_row = 0;
};

/// Words present in both vocabularies. Row i of `source` (Y, n x d_y) and
/// `target` (X, n x d_x) embed pairs[i].
struct AlignedVocabulary {
  std::string source_model_id;
  std::string target_model_id;
  std::vector<AlignedPair> pairs;
  Matrix source;
  Matrix target;

  int size() const { return static_cast<int>(pairs.size()); }
};

struct AlignOptions {
  NormalizeRule rule = NormalizeRule::kStripMarkerLowercase;
  /// When set, fewer than max(d_x, d_y) + 1 pairs raise alignment-too-small.
  bool require_fit_size = true;
};

AlignedVocabulary align_vocabularies(const EmbeddingTable& source, const EmbeddingTable& target,
                                     const AlignOptions& options = {});

}  // namespace vw::embedding
