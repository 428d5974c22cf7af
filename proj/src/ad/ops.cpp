#include "vw/ad/ops.hpp"

#include <cmath>
#include <string>

#include "vw/core/error.hpp"

namespace vw::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, what);
}

bool any_grad(Var a) { return a.requires_grad(); }
bool any_grad(Var a, Var b) { return a.requires_grad() || b.requires_grad(); }
bool any_grad(Var a, Var b, Var c) {
  return a.requires_grad() || b.requires_grad() || c.requires_grad();
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tape& t = a.tape();
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), any_grad(a, b), [a, b, &t](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  Tape& t = a.tape();
  Matrix out = a.value() * b.value().transpose();
  return t.record(std::move(out), any_grad(a, b), [a, b, &t](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value());
    if (b.requires_grad()) t.accumulate(b, g.transpose() * a.value());
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Tape& t = a.tape();
  return t.record(a.value() + b.value(), any_grad(a, b), [a, b, &t](const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  Tape& t = a.tape();
  return t.record(a.value() - b.value(), any_grad(a, b), [a, b, &t](const Matrix& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  Tape& t = a.tape();
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), any_grad(a, b), [a, b, &t](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  Tape& t = a.tape();
  return t.record(a.value() * s, any_grad(a), [a, s, &t](const Matrix& g) { t.accumulate(a, g * s); });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: row shape mismatch");
  Tape& t = a.tape();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), any_grad(a, row), [a, row, &t](const Matrix& g) {
    t.accumulate(a, g);
    if (row.requires_grad()) t.accumulate(row, g.colwise().sum());
  });
}

Var square(Var a) {
  Tape& t = a.tape();
  return t.record(a.value().array().square().matrix(), any_grad(a), [a, &t](const Matrix& g) {
    t.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var silu(Var a) {
  Tape& t = a.tape();
  const Matrix sig = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  Matrix out = a.value().cwiseProduct(sig);
  return t.record(std::move(out), any_grad(a), [a, sig, &t](const Matrix& g) {
    // d/dx x*s(x) = s + x*s*(1-s)
    const auto s = sig.array();
    t.accumulate(a, (g.array() * (s + a.value().array() * s * (1.0 - s))).matrix());
  });
}

Var tanh(Var a) {
  Tape& t = a.tape();
  Matrix out = a.value().array().tanh().matrix();
  return t.record(out, any_grad(a), [a, out, &t](const Matrix& g) {
    t.accumulate(a, (g.array() * (1.0 - out.array().square())).matrix());
  });
}

Var transpose(Var a) {
  Tape& t = a.tape();
  return t.record(a.value().transpose(), any_grad(a),
                  [a, &t](const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var sum(Var a) {
  Tape& t = a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), any_grad(a), [a, &t](const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var mean_rows(Var a) {
  Tape& t = a.tape();
  const double n = static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() / n;
  return t.record(std::move(out), any_grad(a), [a, n, &t](const Matrix& g) {
    Matrix full = g.replicate(a.rows(), 1) / n;
    t.accumulate(a, full);
  });
}

Var mse(Var a, Var b) { return mean(square(sub(a, b))); }

Var rows(Var a, const std::vector<int>& index) {
  Tape& t = a.tape();
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < a.rows(), "rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return t.record(std::move(out), any_grad(a), [a, index, &t](const Matrix& g) {
    Matrix& buf = t.grad_buffer(a);
    for (size_t i = 0; i < index.size(); ++i) buf.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var replace_rows(Var base, const std::vector<int>& index, Var src) {
  require(src.rows() == static_cast<Eigen::Index>(index.size()) && src.cols() == base.cols(),
          "replace_rows: source shape mismatch");
  Tape& t = base.tape();
  Matrix out = base.value();
  for (size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < base.rows(), "replace_rows: index out of range");
    out.row(index[i]) = src.value().row(static_cast<Eigen::Index>(i));
  }
  return t.record(std::move(out), any_grad(base, src), [base, src, index, &t](const Matrix& g) {
    if (base.requires_grad()) {
      Matrix gb = g;
      for (int r : index) gb.row(r).setZero();
      t.accumulate(base, gb);
    }
    if (src.requires_grad()) {
      Matrix gs(src.rows(), src.cols());
      for (size_t i = 0; i < index.size(); ++i) gs.row(static_cast<Eigen::Index>(i)) = g.row(index[i]);
      t.accumulate(src, gs);
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no parts");
  Tape& t = parts.front().tape();
  Eigen::Index total = 0;
  bool grad = false;
  for (const Var& p : parts) {
    require(p.cols() == parts.front().cols(), "concat_rows: column mismatch");
    total += p.rows();
    grad = grad || p.requires_grad();
  }
  Matrix out(total, parts.front().cols());
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.record(std::move(out), grad, [parts, &t](const Matrix& g) {
    Eigen::Index r = 0;
    for (const Var& p : parts) {
      if (p.requires_grad()) t.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  Tape& t = parts.front().tape();
  Eigen::Index total = 0;
  bool grad = false;
  for (const Var& p : parts) {
    require(p.rows() == parts.front().rows(), "concat_cols: row mismatch");
    total += p.cols();
    grad = grad || p.requires_grad();
  }
  Matrix out(parts.front().rows(), total);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.record(std::move(out), grad, [parts, &t](const Matrix& g) {
    Eigen::Index c = 0;
    for (const Var& p : parts) {
      if (p.requires_grad()) t.accumulate(p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var slice_cols(Var a, int start, int count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  Tape& t = a.tape();
  return t.record(a.value().middleCols(start, count), any_grad(a),
                  [a, start, count, &t](const Matrix& g) {
                    t.grad_buffer(a).middleCols(start, count) += g;
                  });
}

Var repeat_rows(Var row, int n) {
  require(row.rows() == 1, "repeat_rows: expects a single row");
  Tape& t = row.tape();
  return t.record(row.value().replicate(n, 1), any_grad(row),
                  [row, &t](const Matrix& g) { t.accumulate(row, g.colwise().sum()); });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  require(gamma.rows() == 1 && gamma.cols() == x.cols(), "layer_norm: gamma shape");
  require(beta.rows() == 1 && beta.cols() == x.cols(), "layer_norm: beta shape");
  Tape& t = x.tape();
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  Matrix xhat(n, x.cols());
  Vector inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = x.value().row(i);
    const double mu = row.mean();
    const double var = (row.array() - mu).square().sum() / d;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return t.record(std::move(out), any_grad(x, gamma, beta),
                  [x, gamma, beta, xhat, inv_std, d, &t](const Matrix& g) {
                    if (gamma.requires_grad()) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                    if (beta.requires_grad()) t.accumulate(beta, g.colwise().sum());
                    if (x.requires_grad()) {
                      const Matrix gh = (g.array().rowwise() * gamma.value().row(0).array()).matrix();
                      Matrix gx(g.rows(), g.cols());
                      for (Eigen::Index i = 0; i < g.rows(); ++i) {
                        const double m1 = gh.row(i).mean();
                        const double m2 = gh.row(i).dot(xhat.row(i)) / d;
                        gx.row(i) = inv_std(i) * (gh.row(i).array() - m1 - xhat.row(i).array() * m2);
                      }
                      t.accumulate(x, gx);
                    }
                  });
}

Var l2_normalize_rows(Var x, double eps) {
  Tape& t = x.tape();
  Vector norms = x.value().rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) norms(i) = std::max(norms(i), eps);
  Matrix out = x.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= norms(i);
  return t.record(out, any_grad(x), [x, out, norms, &t](const Matrix& g) {
    Matrix gx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double proj = g.row(i).dot(out.row(i));
      gx.row(i) = (g.row(i) - proj * out.row(i)) / norms(i);
    }
    t.accumulate(x, gx);
  });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& targets) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(),
          "softmax_cross_entropy: one target per row");
  Tape& t = logits.tape();
  const Eigen::Index n = logits.rows();
  Matrix probs(n, logits.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    require(targets[i] >= 0 && targets[i] < logits.cols(), "softmax_cross_entropy: bad target");
    const auto row = logits.value().row(i);
    const double mx = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - mx).exp().matrix();
    const double z = e.sum();
    probs.row(i) = e / z;
    loss -= row(targets[i]) - mx - std::log(z);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / static_cast<double>(n);
  return t.record(std::move(out), any_grad(logits), [logits, probs, targets, n, &t](const Matrix& g) {
    Matrix gl = probs;
    for (Eigen::Index i = 0; i < n; ++i) gl(i, targets[i]) -= 1.0;
    t.accumulate(logits, gl * (g(0, 0) / static_cast<double>(n)));
  });
}

Var attention(Var q, Var k, Var v, int n_seq, int seq_len, int heads, bool causal) {
  const Eigen::Index d = q.cols();
  require(q.rows() == static_cast<Eigen::Index>(n_seq) * seq_len, "attention: q rows");
  require(k.rows() == q.rows() && v.rows() == q.rows(), "attention: k/v rows");
  require(k.cols() == d && v.cols() == d && heads > 0 && d % heads == 0, "attention: widths");
  Tape& t = q.tape();
  const int dh = static_cast<int>(d / heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(q.rows(), d);
  std::vector<Matrix> probs(static_cast<size_t>(n_seq) * heads);
  for (int s = 0; s < n_seq; ++s) {
    for (int h = 0; h < heads; ++h) {
      const auto Q = q.value().block(s * seq_len, h * dh, seq_len, dh);
      const auto K = k.value().block(s * seq_len, h * dh, seq_len, dh);
      const auto V = v.value().block(s * seq_len, h * dh, seq_len, dh);
      Matrix scores = (Q * K.transpose()) * inv_sqrt;
      for (int i = 0; i < seq_len; ++i) {
        const int last = causal ? i : seq_len - 1;
        const double mx = scores.row(i).head(last + 1).maxCoeff();
        double z = 0.0;
        for (int j = 0; j < seq_len; ++j) {
          const double e = j <= last ? std::exp(scores(i, j) - mx) : 0.0;
          scores(i, j) = e;
          z += e;
        }
        scores.row(i) /= z;
      }
      out.block(s * seq_len, h * dh, seq_len, dh) = scores * V;
      probs[static_cast<size_t>(s) * heads + h] = std::move(scores);
    }
  }
  return t.record(std::move(out), any_grad(q, k, v),
                  [q, k, v, probs, n_seq, seq_len, heads, dh, inv_sqrt, &t](const Matrix& g) {
                    Matrix gq = Matrix::Zero(q.rows(), q.cols());
                    Matrix gk = Matrix::Zero(k.rows(), k.cols());
                    Matrix gv = Matrix::Zero(v.rows(), v.cols());
                    for (int s = 0; s < n_seq; ++s) {
                      for (int h = 0; h < heads; ++h) {
                        const Matrix& P = probs[static_cast<size_t>(s) * heads + h];
                        const auto Q = q.value().block(s * seq_len, h * dh, seq_len, dh);
                        const auto K = k.value().block(s * seq_len, h * dh, seq_len, dh);
                        const auto V = v.value().block(s * seq_len, h * dh, seq_len, dh);
                        const auto G = g.block(s * seq_len, h * dh, seq_len, dh);
                        gv.block(s * seq_len, h * dh, seq_len, dh) = P.transpose() * G;
                        const Matrix gp = G * V.transpose();
                        Matrix gs = P.cwiseProduct(gp);
                        const Vector rs = gs.rowwise().sum();
                        gs -= (P.array().colwise() * rs.array()).matrix();
                        gs *= inv_sqrt;
                        gq.block(s * seq_len, h * dh, seq_len, dh) = gs * K;
                        gk.block(s * seq_len, h * dh, seq_len, dh) = gs.transpose() * Q;
                      }
                    }
                    t.accumulate(q, gq);
                    t.accumulate(k, gk);
                    t.accumulate(v, gv);
                  });
}

namespace {

Matrix im2col(const Matrix& x, MapShape s) {
  const Eigen::Index c = x.cols();
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(s.batch) * s.pixels(), 9 * c);
  for (int b = 0; b < s.batch; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * s.pixels();
    for (int y = 0; y < s.height; ++y) {
      for (int xx = 0; xx < s.width; ++xx) {
        const Eigen::Index r = base + y * s.width + xx;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= s.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= s.width) continue;
            cols.row(r).segment((ky * 3 + kx) * c, c) = x.row(base + sy * s.width + sx);
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, MapShape s, Eigen::Index c) {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(s.batch) * s.pixels(), c);
  for (int b = 0; b < s.batch; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * s.pixels();
    for (int y = 0; y < s.height; ++y) {
      for (int xx = 0; xx < s.width; ++xx) {
        const Eigen::Index r = base + y * s.width + xx;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= s.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= s.width) continue;
            x.row(base + sy * s.width + sx) += cols.row(r).segment((ky * 3 + kx) * c, c);
          }
        }
      }
    }
  }
  return x;
}

}  // namespace

Var conv3x3(Var x, Var weight, Var bias, MapShape shape) {
  require(x.rows() == static_cast<Eigen::Index>(shape.batch) * shape.pixels(), "conv3x3: x rows");
  require(weight.rows() == 9 * x.cols(), "conv3x3: weight rows");
  require(bias.rows() == 1 && bias.cols() == weight.cols(), "conv3x3: bias shape");
  Tape& t = x.tape();
  Matrix cols = im2col(x.value(), shape);
  Matrix out = cols * weight.value();
  out.rowwise() += bias.value().row(0);
  const bool grad = any_grad(x, weight, bias);
  if (!grad) return t.record(std::move(out), false, nullptr);
  return t.record(std::move(out), true,
                  [x, weight, bias, shape, cols = std::move(cols), &t](const Matrix& g) {
                    if (weight.requires_grad()) t.accumulate(weight, cols.transpose() * g);
                    if (bias.requires_grad()) t.accumulate(bias, g.colwise().sum());
                    if (x.requires_grad()) {
                      t.accumulate(x, col2im(g * weight.value().transpose(), shape, x.cols()));
                    }
                  });
}

Var avg_pool2(Var x, MapShape s) {
  require(s.height % 2 == 0 && s.width % 2 == 0, "avg_pool2: odd spatial size");
  require(x.rows() == static_cast<Eigen::Index>(s.batch) * s.pixels(), "avg_pool2: x rows");
  Tape& t = x.tape();
  const int oh = s.height / 2, ow = s.width / 2;
  Matrix out(static_cast<Eigen::Index>(s.batch) * oh * ow, x.cols());
  for (int b = 0; b < s.batch; ++b) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        const Eigen::Index src = static_cast<Eigen::Index>(b) * s.pixels() + 2 * y * s.width + 2 * xx;
        out.row(static_cast<Eigen::Index>(b) * oh * ow + y * ow + xx) =
            0.25 * (x.value().row(src) + x.value().row(src + 1) + x.value().row(src + s.width) +
                    x.value().row(src + s.width + 1));
      }
    }
  }
  return t.record(std::move(out), any_grad(x), [x, s, oh, ow, &t](const Matrix& g) {
    Matrix& buf = t.grad_buffer(x);
    for (int b = 0; b < s.batch; ++b) {
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          const Eigen::Index src = static_cast<Eigen::Index>(b) * s.pixels() + 2 * y * s.width + 2 * xx;
          const auto gr = 0.25 * g.row(static_cast<Eigen::Index>(b) * oh * ow + y * ow + xx);
          buf.row(src) += gr;
          buf.row(src + 1) += gr;
          buf.row(src + s.width) += gr;
          buf.row(src + s.width + 1) += gr;
        }
      }
    }
  });
}

Var upsample2(Var x, MapShape s) {
  require(x.rows() == static_cast<Eigen::Index>(s.batch) * s.pixels(), "upsample2: x rows");
  Tape& t = x.tape();
  const int oh = s.height * 2, ow = s.width * 2;
  Matrix out(static_cast<Eigen::Index>(s.batch) * oh * ow, x.cols());
  for (int b = 0; b < s.batch; ++b) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        out.row(static_cast<Eigen::Index>(b) * oh * ow + y * ow + xx) =
            x.value().row(static_cast<Eigen::Index>(b) * s.pixels() + (y / 2) * s.width + xx / 2);
      }
    }
  }
  return t.record(std::move(out), any_grad(x), [x, s, oh, ow, &t](const Matrix& g) {
    Matrix& buf = t.grad_buffer(x);
    for (int b = 0; b < s.batch; ++b) {
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          buf.row(static_cast<Eigen::Index>(b) * s.pixels() + (y / 2) * s.width + xx / 2) +=
              g.row(static_cast<Eigen::Index>(b) * oh * ow + y * ow + xx);
        }
      }
    }
  });
}

Var film(Var x, Var scale_v, Var shift_v, int pixels_per_item) {
  require(scale_v.cols() == x.cols() && shift_v.cols() == x.cols(), "film: channel mismatch");
  require(scale_v.rows() == shift_v.rows(), "film: scale/shift rows");
  require(x.rows() == scale_v.rows() * pixels_per_item, "film: batch mismatch");
  Tape& t = x.tape();
  const Eigen::Index batch = scale_v.rows();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto blk = x.value().middleRows(b * pixels_per_item, pixels_per_item);
    out.middleRows(b * pixels_per_item, pixels_per_item) =
        ((blk.array().rowwise() * (1.0 + scale_v.value().row(b).array())).rowwise() +
         shift_v.value().row(b).array())
            .matrix();
  }
  return t.record(std::move(out), any_grad(x, scale_v, shift_v),
                  [x, scale_v, shift_v, pixels_per_item, batch, &t](const Matrix& g) {
                    Matrix gx(x.rows(), x.cols());
                    Matrix gs(batch, x.cols());
                    Matrix gb(batch, x.cols());
                    for (Eigen::Index b = 0; b < batch; ++b) {
                      const auto gblk = g.middleRows(b * pixels_per_item, pixels_per_item);
                      const auto xblk = x.value().middleRows(b * pixels_per_item, pixels_per_item);
                      gx.middleRows(b * pixels_per_item, pixels_per_item) =
                          (gblk.array().rowwise() * (1.0 + scale_v.value().row(b).array())).matrix();
                      gs.row(b) = gblk.cwiseProduct(xblk).colwise().sum();
                      gb.row(b) = gblk.colwise().sum();
                    }
                    t.accumulate(x, gx);
                    t.accumulate(scale_v, gs);
                    t.accumulate(shift_v, gb);
                  });
}

Var box_mean_pool(Var fmap, MapShape s, const std::vector<PoolBox>& boxes) {
  require(fmap.rows() == static_cast<Eigen::Index>(s.batch) * s.pixels(), "box_mean_pool: rows");
  Tape& t = fmap.tape();
  const Eigen::Index c = fmap.cols();
  const int sw = s.width + 1;
  const int cells = (s.height + 1) * sw;
  // Summed-area table per item: sat[(b * cells) + y * sw + x] = sum over [0,y) x [0,x).
  Matrix sat = Matrix::Zero(static_cast<Eigen::Index>(s.batch) * cells, c);
  for (int b = 0; b < s.batch; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * cells;
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        sat.row(base + (y + 1) * sw + x + 1) =
            fmap.value().row(static_cast<Eigen::Index>(b) * s.pixels() + y * s.width + x) +
            sat.row(base + y * sw + x + 1) + sat.row(base + (y + 1) * sw + x) -
            sat.row(base + y * sw + x);
      }
    }
  }
  Matrix out(static_cast<Eigen::Index>(boxes.size()), c);
  for (size_t i = 0; i < boxes.size(); ++i) {
    const PoolBox& bx = boxes[i];
    require(bx.item >= 0 && bx.item < s.batch && bx.y0 >= 0 && bx.x0 >= 0 && bx.y1 <= s.height &&
                bx.x1 <= s.width && bx.y1 > bx.y0 && bx.x1 > bx.x0,
            "box_mean_pool: box out of range");
    const Eigen::Index base = static_cast<Eigen::Index>(bx.item) * cells;
    const double area = static_cast<double>((bx.y1 - bx.y0) * (bx.x1 - bx.x0));
    out.row(static_cast<Eigen::Index>(i)) =
        (sat.row(base + bx.y1 * sw + bx.x1) - sat.row(base + bx.y0 * sw + bx.x1) -
         sat.row(base + bx.y1 * sw + bx.x0) + sat.row(base + bx.y0 * sw + bx.x0)) /
        area;
  }
  return t.record(std::move(out), any_grad(fmap), [fmap, s, boxes, c, sw, cells, &t](const Matrix& g) {
    // Scatter through a 2D difference array, then prefix-sum back to cells.
    Matrix diff = Matrix::Zero(static_cast<Eigen::Index>(s.batch) * cells, c);
    for (size_t i = 0; i < boxes.size(); ++i) {
      const PoolBox& bx = boxes[i];
      const Eigen::Index base = static_cast<Eigen::Index>(bx.item) * cells;
      const double area = static_cast<double>((bx.y1 - bx.y0) * (bx.x1 - bx.x0));
      const auto gr = g.row(static_cast<Eigen::Index>(i)) / area;
      diff.row(base + bx.y0 * sw + bx.x0) += gr;
      diff.row(base + bx.y0 * sw + bx.x1) -= gr;
      diff.row(base + bx.y1 * sw + bx.x0) -= gr;
      diff.row(base + bx.y1 * sw + bx.x1) += gr;
    }
    Matrix& buf = t.grad_buffer(fmap);
    for (int b = 0; b < s.batch; ++b) {
      const Eigen::Index base = static_cast<Eigen::Index>(b) * cells;
      for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
          if (y > 0) diff.row(base + y * sw + x) += diff.row(base + (y - 1) * sw + x);
        }
      }
      for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
          if (x > 0) diff.row(base + y * sw + x) += diff.row(base + y * sw + x - 1);
          buf.row(static_cast<Eigen::Index>(b) * s.pixels() + y * s.width + x) += diff.row(base + y * sw + x);
        }
      }
    }
  });
}

}  // namespace vw::ad
