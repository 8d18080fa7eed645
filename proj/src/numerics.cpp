// SPDX-License-Identifier: Apache-2.0
#include "gdkm/numerics.hpp"

#include "gdkm/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

namespace gdkm::numerics {

namespace {

constexpr double kNegativeEigenvalueClip = -1e-8;

void fix_signs(Matrix& vectors) {
  for (Index c = 0; c < vectors.cols(); ++c) {
    for (Index r = 0; r < vectors.rows(); ++r) {
      const double v = vectors(r, c);
      if (std::abs(v) > 1e-14) {
        if (v < 0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace

LowerTriangular::LowerTriangular(Matrix data) : data_(std::move(data)) {
  if (data_.rows() != data_.cols()) {
    fail(ErrorCode::DimensionMismatch, "lower-triangular matrix must be square");
  }
  for (Index c = 1; c < data_.cols(); ++c) {
    for (Index r = 0; r < c; ++r) {
      if (data_(r, c) != 0.0) {
        fail(ErrorCode::DimensionMismatch, "nonzero entry above the diagonal");
      }
    }
  }
}

LowerTriangular LowerTriangular::identity(Index dim) {
  return LowerTriangular(Matrix::Identity(dim, dim));
}

CholeskyFactor cholesky(const Matrix& m, const JitterPolicy& policy) {
  require_square(m, "cholesky");
  const Index n = m.rows();
  if (n == 0) return {LowerTriangular(Matrix(0, 0)), 0.0, 0};
  const double mean_diag = m.diagonal().mean();
  // A zero matrix still needs a positive jitter scale.
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  for (std::size_t level = 0; level < policy.ladder.size(); ++level) {
    const double delta = policy.ladder[level] * scale;
    if (level > 0 && delta <= 0.0) continue;
    Matrix shifted = m;
    shifted.diagonal().array() += delta;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Matrix lower = llt.matrixL();
    if (!lower.allFinite() || (lower.diagonal().array() <= 0.0).any()) continue;
    return {LowerTriangular(std::move(lower)), delta, static_cast<int>(level)};
  }
  fail(ErrorCode::FactorizationFailed,
       "matrix of size " + std::to_string(n) + " not positive definite at any jitter level");
}

SymEig sym_eig(const Matrix& m) {
  require_square(m, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m));
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::ConvergenceFailed, "symmetric eigensolver did not converge");
  }
  // Eigen returns ascending order.
  SymEig out{solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
  fix_signs(out.vectors);
  return out;
}

Matrix frac_power(const Matrix& m, double p) {
  require_square(m, "frac_power");
  if (p < 0.0 || p > 1.0) {
    fail(ErrorCode::DimensionMismatch, "fractional power must lie in [0, 1]");
  }
  if (is_symmetric(m, 1e-12)) {
    SymEig eig = sym_eig(m);
    Vector powered(eig.values.size());
    for (Index k = 0; k < powered.size(); ++k) {
      double w = eig.values(k);
      if (w < kNegativeEigenvalueClip) {
        fail(ErrorCode::NegativeEigenvalue, "eigenvalue " + std::to_string(w));
      }
      w = std::max(w, 0.0);
      powered(k) = (p == 0.0) ? 1.0 : std::pow(w, p);
    }
    return symmetrize(eig.vectors * powered.asDiagonal() * eig.vectors.transpose());
  }

  Eigen::EigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::ConvergenceFailed, "general eigensolver did not converge");
  }
  const Eigen::VectorXcd values = solver.eigenvalues();
  const Eigen::MatrixXcd vectors = solver.eigenvectors();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  Eigen::VectorXcd powered(values.size());
  for (Index k = 0; k < values.size(); ++k) {
    const std::complex<double> w = values(k);
    if (std::abs(w.imag()) > 1e-8 * scale) {
      fail(ErrorCode::NegativeEigenvalue, "complex eigenvalue in frac_power");
    }
    double re = w.real();
    if (re < kNegativeEigenvalueClip * scale) {
      fail(ErrorCode::NegativeEigenvalue, "eigenvalue " + std::to_string(re));
    }
    re = std::max(re, 0.0);
    powered(k) = (p == 0.0) ? 1.0 : std::pow(re, p);
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(vectors);
  const Eigen::MatrixXcd result = vectors * powered.asDiagonal() * lu.inverse();
  return result.real();
}

Matrix tri_solve(const LowerTriangular& h, const Matrix& b, Side side, bool transpose) {
  const Matrix& l = h.matrix();
  const Index n = l.rows();
  if ((side == Side::Left && b.rows() != n) || (side == Side::Right && b.cols() != n)) {
    fail(ErrorCode::DimensionMismatch, "tri_solve operand does not conform");
  }
  for (Index k = 0; k < n; ++k) {
    if (l(k, k) == 0.0) fail(ErrorCode::SingularTriangular, "zero on the diagonal");
  }
  const auto view = l.triangularView<Eigen::Lower>();
  if (side == Side::Left) {
    return transpose ? Matrix(view.transpose().solve(b)) : Matrix(view.solve(b));
  }
  // b h^{-1} = (h^{-T} b^T)^T and b h^{-T} = (h^{-1} b^T)^T
  Matrix bt = b.transpose();
  return transpose ? Matrix(view.solve(bt).transpose()) : Matrix(view.transpose().solve(bt).transpose());
}

double logdet_from_chol(const LowerTriangular& h) {
  double acc = 0.0;
  for (Index k = 0; k < h.dim(); ++k) {
    const double d = h(k, k);
    if (!(d > 0.0)) fail(ErrorCode::NonPositiveDiagonal, "diagonal entry " + std::to_string(d));
    acc += std::log(d);
  }
  return 2.0 * acc;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double relative_frobenius(const Matrix& a, const Matrix& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + ": matrix is not square");
  }
}

void require_symmetric(const Matrix& m, const char* what, double rel_tol) {
  require_square(m, what);
  if (!is_symmetric(m, rel_tol)) fail(ErrorCode::NotSymmetric, std::string(what) + ": matrix is not symmetric");
}

Matrix to_dense(const SparseMatrix& s) { return Matrix(s); }

}  // namespace gdkm::numerics
