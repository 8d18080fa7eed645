// SPDX-License-Identifier: Apache-2.0
#include "gdkm/kernels.hpp"

#include "gdkm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gdkm::kernels {

namespace {

void require_dims(bool ok, const char* what) {
  if (!ok) fail(ErrorCode::DimensionMismatch, what);
}

Vector floored(const Vector& d) { return d.cwiseMax(kDiagFloor); }

}  // namespace

Matrix BlockGram::assemble() const {
  if (!tt) fail(ErrorCode::DimensionMismatch, "assemble needs the full test-test block");
  const Index pi = ii.rows();
  const Index pt = ti.rows();
  Matrix out(pi + pt, pi + pt);
  out.topLeftCorner(pi, pi) = ii;
  out.bottomLeftCorner(pt, pi) = ti;
  out.topRightCorner(pi, pt) = ti.transpose();
  out.bottomRightCorner(pt, pt) = *tt;
  return out;
}

BlockGram BlockGram::from_full(const Matrix& g, Index num_inducing) {
  numerics::require_square(g, "BlockGram::from_full");
  const Index pt = g.rows() - num_inducing;
  require_dims(num_inducing >= 0 && pt >= 0, "inducing count exceeds matrix size");
  BlockGram out;
  out.ii = g.topLeftCorner(num_inducing, num_inducing);
  out.ti = g.bottomLeftCorner(pt, num_inducing);
  out.tt = g.bottomRightCorner(pt, pt);
  out.tt_diag = out.tt->diagonal();
  return out;
}

Matrix arccos_cross(const Matrix& g, const Vector& d_row, const Vector& d_col) {
  require_dims(g.rows() == d_row.size() && g.cols() == d_col.size(), "arccos_cross dims");
  const Vector sr = floored(d_row).cwiseSqrt();
  const Vector sc = floored(d_col).cwiseSqrt();
  Matrix out(g.rows(), g.cols());
  for (Index c = 0; c < g.cols(); ++c) {
    for (Index r = 0; r < g.rows(); ++r) {
      const double s = sr(r) * sc(c);
      const double cos_t = std::clamp(g(r, c) / s, -1.0, 1.0);
      const double theta = std::acos(cos_t);
      out(r, c) = s / std::numbers::pi *
                  (std::sin(theta) + (std::numbers::pi - theta) * cos_t);
    }
  }
  return out;
}

Matrix arccos_kernel(const Matrix& g) {
  numerics::require_square(g, "arccos_kernel");
  const Vector d = g.diagonal();
  return numerics::symmetrize(arccos_cross(g, d, d));
}

BlockGram arccos_kernel_cross(const BlockGram& g) {
  const Vector di = g.ii.diagonal();
  BlockGram out;
  out.ii = numerics::symmetrize(arccos_cross(g.ii, di, di));
  out.ti = arccos_cross(g.ti, g.tt_diag, di);
  out.tt_diag = floored(g.tt_diag);
  if (g.tt) {
    out.tt = numerics::symmetrize(arccos_cross(*g.tt, g.tt_diag, g.tt_diag));
  }
  return out;
}

Matrix apply_kernel(BaseKernel kind, const Matrix& g) {
  return kind == BaseKernel::Arccos ? arccos_kernel(g) : linear_kernel(g);
}

BlockGram apply_kernel(BaseKernel kind, const BlockGram& g) {
  return kind == BaseKernel::Arccos ? arccos_kernel_cross(g) : g;
}

Matrix graph_conv(const Matrix& k, const SparseMatrix& a) {
  require_dims(a.cols() == k.rows() && k.rows() == k.cols(), "graph_conv dims");
  const Matrix ak = a * k;
  return numerics::symmetrize(Matrix(ak * a.transpose()));
}

Matrix graph_conv(const Matrix& k, const graph::NormalizedAdjacency& a) {
  return graph_conv(k, a.matrix);
}

BlockGram graph_conv_block(const BlockGram& k, const BlockAdjacency& a) {
  const Index pi = k.num_inducing();
  const Index pt = k.num_test();
  require_dims(a.ii.rows() == pi && a.ii.cols() == pi, "A_ii dims");
  require_dims(a.ti.rows() == pt && a.ti.cols() == pi, "A_ti dims");
  require_dims(a.tt.rows() == pt && a.tt.cols() == pt, "A_tt dims");
  const bool cross = !a.cross_is_zero();
  if (cross && !k.tt) {
    fail(ErrorCode::DimensionMismatch, "nonzero A_ti needs the full test-test block");
  }

  // [M_i; M_t] = k [A_ii, A_it]^T with A_it = A_ti^T.
  const SparseMatrix a_ii_t = a.ii.transpose();
  Matrix m_i = k.ii * a_ii_t;
  Matrix m_t = k.ti * a_ii_t;
  if (cross) {
    m_i += k.ti.transpose() * a.ti;
    m_t += *k.tt * a.ti;
  }

  BlockGram out;
  out.ii = a.ii * m_i;
  out.ti = a.tt * m_t;
  if (cross) {
    out.ii += a.ti.transpose() * m_t;
    out.ti += a.ti * m_i;
  }
  out.ii = numerics::symmetrize(out.ii);

  if (k.tt) {
    // [N_i; N_t] = k [A_ti, A_tt]^T, then K_tt = A_ti N_i + A_tt N_t.
    const SparseMatrix a_tt_t = a.tt.transpose();
    Matrix n_i = k.ti.transpose() * a_tt_t;  // k_it A_tt^T
    Matrix n_t = *k.tt * a_tt_t;             // k_tt A_tt^T
    if (cross) {
      const SparseMatrix a_ti_t = a.ti.transpose();
      n_i += k.ii * a_ti_t;
      n_t += k.ti * a_ti_t;
    }
    Matrix tt = a.tt * n_t;
    if (cross) tt += a.ti * n_i;
    out.tt = numerics::symmetrize(tt);
    out.tt_diag = out.tt->diagonal();
  } else {
    // Without the full block, diag(A_tt k_tt A_tt^T) is known only for diagonal A_tt.
    bool diagonal = true;
    for (Index c = 0; c < a.tt.outerSize() && diagonal; ++c) {
      for (SparseMatrix::InnerIterator it(a.tt, c); it; ++it) {
        if (it.row() != it.col() && it.value() != 0.0) {
          diagonal = false;
          break;
        }
      }
    }
    if (!diagonal) fail(ErrorCode::DimensionMismatch, "test-test diagonal needs the full block");
    const Vector ad = Matrix(a.tt).diagonal();
    out.tt_diag = ad.cwiseProduct(ad).cwiseProduct(k.tt_diag);
  }
  return out;
}

Matrix center_rows(const Matrix& f) {
  if (f.rows() == 0) return f;
  const Eigen::RowVectorXd mean = f.colwise().mean();
  return f.rowwise() - mean;
}

Matrix center_kernel(const Matrix& k, const CenteringParams& p) {
  if (!p.enabled) return k;
  numerics::require_square(k, "center_kernel");
  const Matrix ck = center_rows(center_rows(k).transpose());
  return numerics::symmetrize(p.gamma * p.gamma * ck +
                              Matrix::Constant(k.rows(), k.cols(), p.beta * p.beta));
}

Matrix center_features(const Matrix& f, const CenteringParams& p) {
  if (!p.enabled) return f;
  Matrix out(f.rows(), f.cols() + 1);
  out.leftCols(f.cols()) = p.gamma * center_rows(f);
  out.col(f.cols()).setConstant(p.beta);
  return out;
}

double cka(const Matrix& k1, const Matrix& k2) {
  numerics::require_square(k1, "cka");
  require_dims(k1.rows() == k2.rows() && k1.cols() == k2.cols(), "cka dims");
  const Matrix c1 = center_rows(center_rows(k1).transpose());
  const Matrix c2 = center_rows(center_rows(k2).transpose());
  const double n1 = c1.squaredNorm();
  const double n2 = c2.squaredNorm();
  const double tiny = 1e-28;
  if (n1 <= tiny * std::max(1.0, k1.squaredNorm()) || n2 <= tiny * std::max(1.0, k2.squaredNorm())) fail(ErrorCode::DegenerateKernel, "centered kernel is zero");
  const double value = c1.cwiseProduct(c2).sum() / std::sqrt(n1 * n2);
  return std::clamp(value, 0.0, 1.0);
}

Matrix normalize_kernel(const Matrix& k) {
  numerics::require_square(k, "normalize_kernel");
  const Vector inv = k.diagonal().cwiseMax(kDiagFloor).cwiseSqrt().cwiseInverse();
  return inv.asDiagonal() * k * inv.asDiagonal();
}

}  // namespace gdkm::kernels
