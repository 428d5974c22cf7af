#include "vw/embedding/geometry.hpp"

#include <limits>

#include "vw/core/error.hpp"

namespace vw::embedding {

Neighbor nearest_word(const EmbeddingTable& table, const Vector& v,
                      const std::set<std::string>& exclude) {
  if (v.size() != table.dim()) throw Error(ErrorCode::kDimensionMismatch, "nearest_word: width");
  if (!v.allFinite()) throw Error(ErrorCode::kInvalidInput, "nearest_word: non-finite query");
  const std::string* best = nullptr;
  double best_sq = std::numeric_limits<double>::infinity();
  for (int i = 0; i < table.size(); ++i) {
    const std::string& tok = table.tokens()[i];
    if (table.is_special(tok) || exclude.count(tok)) continue;
    const double sq = (table.matrix().row(i).transpose() - v).squaredNorm();
    if (sq < best_sq || (sq == best_sq && best && tok < *best)) {
      best_sq = sq;
      best = &tok;
    }
  }
  if (!best) throw Error(ErrorCode::kEmptyCandidates, "nearest_word: no candidate tokens");
  return {*best, std::sqrt(best_sq)};
}

double anchor_scale(const EmbeddingTable& table, const std::string& anchor) {
  const Neighbor n = nearest_word(table, table.embedding(anchor), {anchor});
  if (!(n.distance > 0.0)) {
    throw Error(ErrorCode::kDegenerateAnchor,
                "anchor '" + anchor + "' shares its embedding with '" + n.token + "'");
  }
  return n.distance;
}

double normalized_radius(const EmbeddingTable& table, const Vector& v, const std::string& anchor) {
  return (v - table.embedding(anchor)).norm() / anchor_scale(table, anchor);
}

Vector project_to_ball(const EmbeddingTable& table, const Vector& v, const std::string& anchor,
                       double delta) {
  return AnchorBall(table, anchor, delta).project(v);
}

AnchorBall::AnchorBall(const EmbeddingTable& table, std::string anchor, double delta)
    : AnchorBall(anchor, table.embedding(anchor), anchor_scale(table, anchor), delta) {}

AnchorBall::AnchorBall(std::string anchor, Vector center, double scale, double delta)
    : anchor_(std::move(anchor)), center_(std::move(center)), scale_(scale), delta_(delta) {
  if (!(delta_ > 0.0)) throw Error(ErrorCode::kInvalidInput, "anchor ball: delta must be positive");
  if (!(scale_ > 0.0)) throw Error(ErrorCode::kDegenerateAnchor, "anchor ball: zero anchor scale");
}

double AnchorBall::normalized_radius(const Vector& v) const { return (v - center_).norm() / scale_; }

Vector AnchorBall::project(const Vector& v) const {
  if (v.size() != center_.size()) throw Error(ErrorCode::kDimensionMismatch, "project: width");
  const Vector u = v - center_;
  const double dist = u.norm();
  const double cap = radius();
  if (dist <= cap * (1.0 + 1e-12)) return v;
  return center_ + u * (cap / dist);
}

Matrix AnchorBall::project_rows(const Matrix& vectors) const {
  Matrix out(vectors.rows(), vectors.cols());
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    out.row(i) = project(vectors.row(i).transpose()).transpose();
  }
  return out;
}

}  // namespace vw::embedding
