#pragma once

#include <filesystem>
#include <string>

#include "vw/embedding/alignment.hpp"

namespace vw::embedding {

/// Linear map between two embedding spaces in row-vector convention:
/// transferred = v * matrix, with matrix of shape d_source x d_target.
struct TransferMap {
  std::string source_model_id;
  std::string target_model_id;
  Matrix matrix;
  double fit_mse = 0.0;
  int n_fit_words = 0;
  bool rank_deficient = false;

  int source_dim() const { return static_cast<int>(matrix.rows()); }
  int target_dim() const { return static_cast<int>(matrix.cols()); }
};

struct FitOptions {
  /// Tikhonov coefficient; 0 gives the plain least-squares estimator.
  double ridge = 0.0;
};

/// Least-squares fit of target ~ source * M over the aligned words.
TransferMap fit_transfer(const AlignedVocabulary& vocab, const FitOptions& options = {});

/// Row-wise v * M for a k x d_source matrix.
Matrix apply_transfer(const TransferMap& map, const Matrix& vectors);
Vector apply_transfer(const TransferMap& map, const Vector& vector);

void save_transfer_map(const std::filesystem::path& path, const TransferMap& map);
TransferMap load_transfer_map(const std::filesystem::path& path);

}  // namespace vw::embedding
