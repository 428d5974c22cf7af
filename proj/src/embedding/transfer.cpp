#include "vw/embedding/transfer.hpp"

#include <Eigen/QR>

#include "vw/core/container.hpp"
#include "vw/core/error.hpp"

namespace vw::embedding {

TransferMap fit_transfer(const AlignedVocabulary& vocab, const FitOptions& options) {
  const Matrix& Y = vocab.source;
  const Matrix& X = vocab.target;
  if (Y.rows() != X.rows() || Y.rows() == 0) {
    throw Error(ErrorCode::kInvalidInput, "fit_transfer: source and target row counts differ");
  }
  if (!Y.allFinite() || !X.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, "fit_transfer: non-finite embedding entries");
  }
  if (options.ridge < 0.0) throw Error(ErrorCode::kInvalidInput, "fit_transfer: negative ridge");

  const Eigen::Index d_y = Y.cols();
  Eigen::MatrixXd A = Y;
  Eigen::MatrixXd B = X;
  if (options.ridge > 0.0) {
    // min ||X - Y M||^2 + ridge ||M||^2 as an augmented least-squares system
    A.conservativeResize(Y.rows() + d_y, d_y);
    A.bottomRows(d_y) = std::sqrt(options.ridge) * Eigen::MatrixXd::Identity(d_y, d_y);
    B.conservativeResize(X.rows() + d_y, X.cols());
    B.bottomRows(d_y).setZero();
  }

  TransferMap map;
  map.source_model_id = vocab.source_model_id;
  map.target_model_id = vocab.target_model_id;
  map.n_fit_words = static_cast<int>(Y.rows());

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() == d_y) {
    map.matrix = qr.solve(B);
  } else {
    map.rank_deficient = true;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    map.matrix = cod.solve(B);  // minimum-norm solution
  }
  const Matrix residual = X - Y * map.matrix;
  map.fit_mse = residual.rowwise().squaredNorm().mean();
  return map;
}

Matrix apply_transfer(const TransferMap& map, const Matrix& vectors) {
  if (vectors.cols() != map.source_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "apply_transfer: vector width " + std::to_string(vectors.cols()) +
                    " but map source dimension " + std::to_string(map.source_dim()));
  }
  return vectors * map.matrix;
}

Vector apply_transfer(const TransferMap& map, const Vector& vector) {
  Matrix row = vector.transpose();
  return apply_transfer(map, row).row(0).transpose();
}

void save_transfer_map(const std::filesystem::path& path, const TransferMap& map) {
  nlohmann::json header = {
      {"kind", "transfer_map"},
      {"source_model_id", map.source_model_id},
      {"target_model_id", map.target_model_id},
      {"d_y", map.source_dim()},
      {"d_x", map.target_dim()},
      {"fit_mse", map.fit_mse},
      {"n_fit_words", map.n_fit_words},
      {"rank_deficient", map.rank_deficient},
  };
  io::write_container(path, std::move(header), {{"matrix", map.matrix}});
}

TransferMap load_transfer_map(const std::filesystem::path& path) {
  const io::Container c = io::read_container(path);
  TransferMap map;
  const auto& h = c.header;
  map.source_model_id = h.at("source_model_id").get<std::string>();
  map.target_model_id = h.at("target_model_id").get<std::string>();
  map.fit_mse = h.at("fit_mse").get<double>();
  map.n_fit_words = h.at("n_fit_words").get<int>();
  map.rank_deficient = h.at("rank_deficient").get<bool>();
  map.matrix = c.tensor("matrix");
  if (map.source_dim() != h.at("d_y").get<int>() || map.target_dim() != h.at("d_x").get<int>()) {
    throw Error(ErrorCode::kFormat, path.string() + ": matrix shape disagrees with header");
  }
  return map;
}

}  // namespace vw::embedding
