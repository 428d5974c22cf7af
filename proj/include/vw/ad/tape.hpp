#pragma once

#include <deque>
#include <functional>

#include "vw/core/types.hpp"

namespace vw::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  double scalar() const { return value()(0, 0); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order; backward() walks them in reverse. Nodes that do not depend on any
/// gradient-requiring leaf carry no backward closure and cost nothing on the
/// reverse sweep.
class Tape {
 public:
  using Backward = std::function<void(const Matrix& out_grad)>;

  Var constant(Matrix value);
  Var variable(Matrix value);

  /// Records an op result. `backward` is dropped when `requires_grad` is false.
  Var record(Matrix value, bool requires_grad, Backward backward);

  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  /// Adds `g` into v's gradient buffer; no-op when v does not require grad.
  void accumulate(Var v, const Matrix& g);
  /// Zero-initialized gradient buffer of v for scatter-style accumulation.
  Matrix& grad_buffer(Var v);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

}  // namespace vw::ad
