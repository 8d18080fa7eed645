// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over dense matrices. A Tape records a fixed
// set of matrix primitives together with hand-written adjoints; Var is a
// cheap handle into it. Scalars are 1x1 matrices.
#pragma once

#include "gdkm/numerics.hpp"

#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace gdkm::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  double scalar() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Receives the tape, the output adjoint and the output value.
  using Backward = std::function<void(Tape&, const Matrix&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable input.
  Var leaf(Matrix value);
  /// Input that never receives a gradient.
  Var constant(Matrix value);
  Var scalar_constant(double value);

  /// Adds a node. The closure is kept only if some input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

  /// Accumulates d(output)/d(node) into every node that requires a gradient.
  /// `output` must be 1x1.
  void backward(Var output);

  bool requires_grad(Var v) const { return nodes_[index(v)].requires_grad; }
  /// Adjoint of v after backward(); zeros if nothing reached it.
  Matrix grad(Var v) const;
  void accumulate(Var v, const Matrix& g);

  const Matrix& value(Var v) const { return nodes_[index(v)].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };

  std::size_t index(Var v) const;

  std::deque<Node> nodes_;
};

// Elementwise and structural primitives.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
/// s * a with s a 1x1 Var.
Var scale_by(Var a, Var s);
/// a + s on every entry, s a 1x1 Var.
Var add_scalar(Var a, Var s);
/// rows x cols matrix filled with the 1x1 Var s.
Var fill(Var s, Index rows, Index cols);
Var hcat(Var a, Var b);
Var vcat(Var a, Var b);
Var transpose(Var a);
Var gather_rows(Var a, std::span<const Index> rows);
Var gather_cols(Var a, std::span<const Index> cols);

// Products.
Var matmul(Var a, Var b);
/// s a with a constant sparse s.
Var sparse_left(const SparseMatrix& s, Var a);
/// a s with a constant sparse s.
Var sparse_right(Var a, const SparseMatrix& s);

// Factorizations.
struct CholeskyInfo {
  double jitter = 0.0;
  int level = 0;
};
/// Lower Cholesky factor of a symmetric a, with the jitter ladder applied.
Var cholesky(Var a, const numerics::JitterPolicy& policy = {}, CholeskyInfo* info = nullptr);
/// Solve with a lower-triangular h; see numerics::tri_solve for the flags.
Var tri_solve(Var h, Var b, numerics::Side side, bool transpose);

// Kernel maps.
/// Arccosine entries of a cross block g given the row and column diagonals
/// (column vectors).
Var arccos(Var g, Var d_row, Var d_col);
/// Diagonal as a column vector.
Var diag(Var a);
/// Squared Euclidean norm of every row, as a column vector.
Var row_sq_norms(Var a);
/// (I - ones/rows) a.
Var center(Var a);

// Reductions to 1x1.
Var trace(Var a);
Var sum(Var a);
Var sum_log_diag(Var a);
Var frobenius_sq(Var a);
Var inner(Var a, Var b);
/// sum_r log softmax(logits.row(r))[labels[r]].
Var softmax_loglik(Var logits, std::span<const int> labels);

}  // namespace gdkm::ad
