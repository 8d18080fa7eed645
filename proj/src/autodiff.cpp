// SPDX-License-Identifier: Apache-2.0
#include "gdkm/autodiff.hpp"

#include "gdkm/error.hpp"
#include "gdkm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gdkm::ad {

using numerics::Side;

const Matrix& Var::value() const {
  if (!tape_) fail(ErrorCode::DimensionMismatch, "use of an empty Var");
  return tape_->value(*this);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) fail(ErrorCode::DimensionMismatch, "Var is not a scalar");
  return v(0, 0);
}

std::size_t Tape::index(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    fail(ErrorCode::DimensionMismatch, "Var does not belong to this tape");
  }
  return static_cast<std::size_t>(v.id_);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, false, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, false, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::scalar_constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[index(in)].requires_grad;
  nodes_.push_back(Node{std::move(value), Matrix(), needs, false, needs ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[index(v)];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
    fail(ErrorCode::DimensionMismatch, "adjoint shape mismatch");
  }
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Tape::backward(Var output) {
  const std::size_t out = index(output);
  if (nodes_[out].value.size() != 1) fail(ErrorCode::DimensionMismatch, "backward needs a scalar");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  if (!nodes_[out].requires_grad) return;
  nodes_[out].grad = Matrix::Ones(1, 1);
  nodes_[out].has_grad = true;
  for (std::size_t k = out + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.has_grad && n.backward) n.backward(*this, n.grad, n.value);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[index(v)];
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

namespace {

void same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorCode::DimensionMismatch, what);
}

void require_scalar(const Matrix& s, const char* what) {
  if (s.rows() != 1 || s.cols() != 1) fail(ErrorCode::DimensionMismatch, what);
}

Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }

Matrix lower(const Matrix& m) { return m.triangularView<Eigen::Lower>(); }

}  // namespace

Var add(Var a, Var b) {
  same_shape(a.value(), b.value(), "add");
  return a.tape()->record(a.value() + b.value(), {a, b},
                          [a, b](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, g);
                            t.accumulate(b, g);
                          });
}

Var sub(Var a, Var b) {
  same_shape(a.value(), b.value(), "sub");
  return a.tape()->record(a.value() - b.value(), {a, b},
                          [a, b](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, g);
                            t.accumulate(b, -g);
                          });
}

Var scale(Var a, double c) {
  return a.tape()->record(c * a.value(), {a},
                          [a, c](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, c * g); });
}

Var scale_by(Var a, Var s) {
  require_scalar(s.value(), "scale_by expects a scalar");
  return a.tape()->record(s.scalar() * a.value(), {a, s},
                          [a, s](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, s.scalar() * g);
                            t.accumulate(s, scalar_matrix(g.cwiseProduct(a.value()).sum()));
                          });
}

Var add_scalar(Var a, Var s) {
  require_scalar(s.value(), "add_scalar expects a scalar");
  return a.tape()->record(a.value().array() + s.scalar(), {a, s},
                          [a, s](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, g);
                            t.accumulate(s, scalar_matrix(g.sum()));
                          });
}

Var fill(Var s, Index rows, Index cols) {
  require_scalar(s.value(), "fill expects a scalar");
  return s.tape()->record(Matrix::Constant(rows, cols, s.scalar()), {s},
                          [s](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(s, scalar_matrix(g.sum()));
                          });
}

Var hcat(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) fail(ErrorCode::DimensionMismatch, "hcat rows");
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const Index ca = av.cols();
  const Index cb = bv.cols();
  return a.tape()->record(std::move(out), {a, b},
                          [a, b, ca, cb](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, g.leftCols(ca));
                            t.accumulate(b, g.rightCols(cb));
                          });
}

Var vcat(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) fail(ErrorCode::DimensionMismatch, "vcat cols");
  Matrix out(av.rows() + bv.rows(), av.cols());
  out << av, bv;
  const Index ra = av.rows();
  const Index rb = bv.rows();
  return a.tape()->record(std::move(out), {a, b},
                          [a, b, ra, rb](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, g.topRows(ra));
                            t.accumulate(b, g.bottomRows(rb));
                          });
}

Var transpose(Var a) {
  return a.tape()->record(a.value().transpose(), {a},
                          [a](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, g.transpose()); });
}

Var gather_rows(Var a, std::span<const Index> rows) {
  const Matrix& av = a.value();
  std::vector<Index> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Index>(idx.size()), av.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= av.rows()) fail(ErrorCode::DimensionMismatch, "gather_rows index");
    out.row(static_cast<Index>(k)) = av.row(idx[k]);
  }
  return a.tape()->record(std::move(out), {a},
                          [a, idx](Tape& t, const Matrix& g, const Matrix&) {
                            Matrix ga = Matrix::Zero(a.rows(), a.cols());
                            for (std::size_t k = 0; k < idx.size(); ++k) {
                              ga.row(idx[k]) += g.row(static_cast<Index>(k));
                            }
                            t.accumulate(a, ga);
                          });
}

Var gather_cols(Var a, std::span<const Index> cols) {
  const Matrix& av = a.value();
  std::vector<Index> idx(cols.begin(), cols.end());
  Matrix out(av.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= av.cols()) fail(ErrorCode::DimensionMismatch, "gather_cols index");
    out.col(static_cast<Index>(k)) = av.col(idx[k]);
  }
  return a.tape()->record(std::move(out), {a},
                          [a, idx](Tape& t, const Matrix& g, const Matrix&) {
                            Matrix ga = Matrix::Zero(a.rows(), a.cols());
                            for (std::size_t k = 0; k < idx.size(); ++k) {
                              ga.col(idx[k]) += g.col(static_cast<Index>(k));
                            }
                            t.accumulate(a, ga);
                          });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) fail(ErrorCode::DimensionMismatch, "matmul inner dimension");
  return a.tape()->record(a.value() * b.value(), {a, b},
                          [a, b](Tape& t, const Matrix& g, const Matrix&) {
                            if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
                            if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
                          });
}

Var sparse_left(const SparseMatrix& s, Var a) {
  if (s.cols() != a.rows()) fail(ErrorCode::DimensionMismatch, "sparse_left dims");
  return a.tape()->record(s * a.value(), {a},
                          [a, s](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, s.transpose() * g);
                          });
}

Var sparse_right(Var a, const SparseMatrix& s) {
  if (a.cols() != s.rows()) fail(ErrorCode::DimensionMismatch, "sparse_right dims");
  return a.tape()->record(a.value() * s, {a},
                          [a, s](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, g * s.transpose());
                          });
}

Var cholesky(Var a, const numerics::JitterPolicy& policy, CholeskyInfo* info) {
  const auto f = numerics::cholesky(a.value(), policy);
  if (info) *info = CholeskyInfo{f.jitter, f.level};
  const Index n = a.rows();
  const double mean_diag = n > 0 ? a.value().diagonal().mean() : 0.0;
  // Jitter is a multiple of mean(diag(a)) and so depends on a.
  const double slope =
      (f.level > 0 && mean_diag > 0.0) ? policy.ladder[static_cast<std::size_t>(f.level)] / static_cast<double>(n) : 0.0;
  return a.tape()->record(f.factor.matrix(), {a},
                          [a, slope](Tape& t, const Matrix& g, const Matrix& l) {
                            const Matrix lbar = lower(g);
                            Matrix p = lower(l.transpose() * lbar);
                            p.diagonal() *= 0.5;
                            // s = l^{-T} p l^{-1}
                            const auto tri = l.triangularView<Eigen::Lower>();
                            Matrix s = tri.transpose().solve(p);
                            s = tri.transpose().solve(s.transpose()).transpose();
                            Matrix abar = 0.5 * (s + s.transpose());
                            if (slope != 0.0) abar.diagonal().array() += slope * abar.trace();
                            t.accumulate(a, abar);
                          });
}

Var tri_solve(Var h, Var b, Side side, bool transpose) {
  const numerics::LowerTriangular hl(h.value());
  Matrix x = numerics::tri_solve(hl, b.value(), side, transpose);
  return h.tape()->record(std::move(x), {h, b},
                          [h, b, side, transpose](Tape& t, const Matrix& g, const Matrix& x) {
                            const numerics::LowerTriangular hl(h.value());
                            Matrix bbar;
                            Matrix hbar;
                            if (side == Side::Left && !transpose) {
                              bbar = numerics::tri_solve(hl, g, Side::Left, true);
                              hbar = -lower(bbar * x.transpose());
                            } else if (side == Side::Left) {
                              bbar = numerics::tri_solve(hl, g, Side::Left, false);
                              hbar = -lower(x * bbar.transpose());
                            } else if (!transpose) {
                              bbar = numerics::tri_solve(hl, g, Side::Right, true);
                              hbar = -lower(x.transpose() * bbar);
                            } else {
                              bbar = numerics::tri_solve(hl, g, Side::Right, false);
                              hbar = -lower(bbar.transpose() * x);
                            }
                            t.accumulate(h, hbar);
                            t.accumulate(b, bbar);
                          });
}

Var arccos(Var g, Var d_row, Var d_col) {
  if (d_row.cols() != 1 || d_col.cols() != 1) fail(ErrorCode::DimensionMismatch, "arccos diagonals");
  Matrix out = kernels::arccos_cross(g.value(), d_row.value().col(0), d_col.value().col(0));
  return g.tape()->record(
      std::move(out), {g, d_row, d_col}, [g, d_row, d_col](Tape& t, const Matrix& gbar, const Matrix&) {
        const Matrix& gv = g.value();
        const Vector dr = d_row.value().col(0);
        const Vector dc = d_col.value().col(0);
        const Vector sr = dr.cwiseMax(kernels::kDiagFloor).cwiseSqrt();
        const Vector sc = dc.cwiseMax(kernels::kDiagFloor).cwiseSqrt();
        Matrix dg(gv.rows(), gv.cols());
        Matrix ds(gv.rows(), gv.cols());  // adjoint of s = sqrt(dr dc), times s
        for (Index c = 0; c < gv.cols(); ++c) {
          for (Index r = 0; r < gv.rows(); ++r) {
            const double s = sr(r) * sc(c);
            const double theta = std::acos(std::clamp(gv(r, c) / s, -1.0, 1.0));
            dg(r, c) = gbar(r, c) * (std::numbers::pi - theta) / std::numbers::pi;
            ds(r, c) = gbar(r, c) * std::sin(theta) / std::numbers::pi * s;
          }
        }
        t.accumulate(g, dg);
        // ds/d(dr) = s / (2 dr); zero below the floor.
        Vector gr = ds.rowwise().sum();
        Vector gc = ds.colwise().sum().transpose();
        for (Index r = 0; r < gr.size(); ++r) gr(r) = dr(r) > kernels::kDiagFloor ? gr(r) / (2.0 * dr(r)) : 0.0;
        for (Index c = 0; c < gc.size(); ++c) gc(c) = dc(c) > kernels::kDiagFloor ? gc(c) / (2.0 * dc(c)) : 0.0;
        t.accumulate(d_row, gr);
        t.accumulate(d_col, gc);
      });
}

Var diag(Var a) {
  if (a.rows() != a.cols()) fail(ErrorCode::DimensionMismatch, "diag of a non-square matrix");
  return a.tape()->record(a.value().diagonal(), {a},
                          [a](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, Matrix(g.col(0).asDiagonal()));
                          });
}

Var row_sq_norms(Var a) {
  return a.tape()->record(a.value().rowwise().squaredNorm(), {a},
                          [a](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, 2.0 * g.col(0).asDiagonal() * a.value());
                          });
}

Var center(Var a) {
  return a.tape()->record(kernels::center_rows(a.value()), {a},
                          [a](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, kernels::center_rows(g));
                          });
}

Var trace(Var a) {
  if (a.rows() != a.cols()) fail(ErrorCode::DimensionMismatch, "trace of a non-square matrix");
  return a.tape()->record(scalar_matrix(a.value().trace()), {a},
                          [a](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, g(0, 0) * Matrix::Identity(a.rows(), a.cols()));
                          });
}

Var sum(Var a) {
  return a.tape()->record(scalar_matrix(a.value().sum()), {a},
                          [a](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                          });
}

Var sum_log_diag(Var a) {
  if (a.rows() != a.cols()) fail(ErrorCode::DimensionMismatch, "sum_log_diag of a non-square matrix");
  const Vector d = a.value().diagonal();
  if ((d.array() <= 0.0).any()) fail(ErrorCode::NonPositiveDiagonal, "log of a non-positive diagonal entry");
  return a.tape()->record(scalar_matrix(d.array().log().sum()), {a},
                          [a](Tape& t, const Matrix& g, const Matrix&) {
                            const Vector inv = a.value().diagonal().cwiseInverse();
                            t.accumulate(a, Matrix((g(0, 0) * inv).asDiagonal()));
                          });
}

Var frobenius_sq(Var a) {
  return a.tape()->record(scalar_matrix(a.value().squaredNorm()), {a},
                          [a](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, 2.0 * g(0, 0) * a.value());
                          });
}

Var inner(Var a, Var b) {
  same_shape(a.value(), b.value(), "inner");
  return a.tape()->record(scalar_matrix(a.value().cwiseProduct(b.value()).sum()), {a, b},
                          [a, b](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a, g(0, 0) * b.value());
                            t.accumulate(b, g(0, 0) * a.value());
                          });
}

Var softmax_loglik(Var logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  if (static_cast<Index>(labels.size()) != z.rows()) {
    fail(ErrorCode::DimensionMismatch, "one label per logit row expected");
  }
  std::vector<int> y(labels.begin(), labels.end());
  Matrix prob(z.rows(), z.cols());
  double total = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const int label = y[static_cast<std::size_t>(r)];
    if (label < 0 || label >= z.cols()) fail(ErrorCode::DimensionMismatch, "label out of range");
    const double m = z.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(r).array() - m).exp();
    const double norm = e.sum();
    prob.row(r) = e / norm;
    total += z(r, label) - m - std::log(norm);
  }
  return logits.tape()->record(scalar_matrix(total), {logits},
                               [logits, y, prob](Tape& t, const Matrix& g, const Matrix&) {
                                 Matrix d = -prob;
                                 for (Index r = 0; r < d.rows(); ++r) d(r, y[static_cast<std::size_t>(r)]) += 1.0;
                                 t.accumulate(logits, g(0, 0) * d);
                               });
}

}  // namespace gdkm::ad
