#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vw/core/types.hpp"

namespace vw::embedding {

/// A model's vocabulary together with its word-embedding matrix, one row per
/// token. Immutable once built.
class EmbeddingTable {
 public:
  EmbeddingTable(std::string model_id, std::vector<std::string> tokens, Matrix matrix,
                 std::set<std::string> special_tokens = {});

  const std::string& model_id() const { return model_id_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  int dim() const { return static_cast<int>(matrix_.cols()); }
  const Matrix& matrix() const { return matrix_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::set<std::string>& special_tokens() const { return special_; }

  std::optional<int> find(std::string_view token) const;
  /// Row index of `token`; throws not-found.
  int index(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  bool is_special(std::string_view token) const;
  Vector row(int i) const { return matrix_.row(i).transpose(); }
  Vector embedding(std::string_view token) const { return row(index(token)); }

  /// Same vocabulary with a replaced matrix (rows must match).
  EmbeddingTable with_matrix(Matrix matrix, std::string model_id) const;

 private:
  std::string model_id_;
  std::vector<std::string> tokens_;
  Matrix matrix_;
  std::set<std::string> special_;
  std::unordered_map<std::string, int> vocab_;
};

void save_table(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_table(const std::filesystem::path& path);

}  // namespace vw::embedding
