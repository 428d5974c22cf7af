#pragma once

#include <set>
#include <string>

#include "vw/embedding/table.hpp"

namespace vw::embedding {

struct Neighbor {
  std::string token;
  double distance = 0.0;
};

/// Closest non-special, non-excluded token to v. Ties go to the
/// lexicographically smaller token.
Neighbor nearest_word(const EmbeddingTable& table, const Vector& v,
                      const std::set<std::string>& exclude = {});

/// Distance from `anchor` to its nearest distinct word; the radius unit for
/// anchor-constrained prompts. Throws degenerate-anchor when it is zero.
double anchor_scale(const EmbeddingTable& table, const std::string& anchor);

/// ||v - y(anchor)|| / anchor_scale(anchor).
double normalized_radius(const EmbeddingTable& table, const Vector& v, const std::string& anchor);

Vector project_to_ball(const EmbeddingTable& table, const Vector& v, const std::string& anchor,
                       double delta);

/// The ball {v : normalized_radius(v) <= delta} around a fixed anchor, with
/// the anchor scale resolved once at construction.
class AnchorBall {
 public:
  AnchorBall(const EmbeddingTable& table, std::string anchor, double delta);
  AnchorBall(std::string anchor, Vector center, double scale, double delta);

  const std::string& anchor() const { return anchor_; }
  const Vector& center() const { return center_; }
  double scale() const { return scale_; }
  double delta() const { return delta_; }
  double radius() const { return delta_ * scale_; }

  double normalized_radius(const Vector& v) const;
  /// Points already inside (up to a 1e-12 relative slack, which keeps the
  /// projection exactly idempotent) come back unchanged.
  Vector project(const Vector& v) const;
  /// Row-wise projection of a k x d matrix.
  Matrix project_rows(const Matrix& vectors) const;

 private:
  std::string anchor_;
  Vector center_;
  double scale_;
  double delta_;
};

}  // namespace vw::embedding
