#pragma once

#include <vector>

#include "vw/ad/tape.hpp"

namespace vw::ad {

// Elementwise and linear algebra. Shapes must agree exactly unless noted.
Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_row(Var a, Var row);  // broadcasts a 1 x c row over every row of a
Var square(Var a);
Var silu(Var a);
Var tanh(Var a);
Var transpose(Var a);

Var sum(Var a);        // 1 x 1
Var mean(Var a);       // 1 x 1
Var mean_rows(Var a);  // 1 x c column means
Var mse(Var a, Var b); // mean of squared differences, 1 x 1

Var rows(Var a, const std::vector<int>& index);
/// Copy of `base` with row index[i] replaced by row i of `src`.
Var replace_rows(Var base, const std::vector<int>& index, Var src);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, int start, int count);
Var repeat_rows(Var row, int n);

Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var l2_normalize_rows(Var x, double eps = 1e-12);

/// Mean softmax cross-entropy of each logits row against its target column.
Var softmax_cross_entropy(Var logits, const std::vector<int>& targets);

/// Multi-head scaled dot-product attention over `n_seq` stacked sequences of
/// `seq_len` rows each. q, k, v are (n_seq * seq_len) x d.
Var attention(Var q, Var k, Var v, int n_seq, int seq_len, int heads, bool causal);

/// Spatial layout of a stacked feature map: rows are (item, y, x) in
/// row-major order, columns are channels.
struct MapShape {
  int batch = 1;
  int height = 0;
  int width = 0;
  int pixels() const { return height * width; }
};

/// 3x3 convolution, stride 1, zero padding 1. weight is (9 * c_in) x c_out,
/// row index (ky * 3 + kx) * c_in + c.
Var conv3x3(Var x, Var weight, Var bias, MapShape shape);
Var avg_pool2(Var x, MapShape shape);
Var upsample2(Var x, MapShape shape);
/// y = x * (1 + scale[item]) + shift[item]; scale and shift are batch x c.
Var film(Var x, Var scale, Var shift, int pixels_per_item);

/// Half-open cell rectangle on item `item` of a feature map.
struct PoolBox {
  int item = 0;
  int y0 = 0, x0 = 0, y1 = 0, x1 = 0;
};
/// Mean feature over each box; one output row per box.
Var box_mean_pool(Var fmap, MapShape shape, const std::vector<PoolBox>& boxes);

}  // namespace vw::ad
