// SPDX-License-Identifier: Apache-2.0
//
// Dense symmetric-matrix primitives: jittered Cholesky, symmetric
// eigendecomposition, fractional matrix powers, triangular solves and
// log-determinants. Everything is 64-bit.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <vector>

namespace gdkm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

}  // namespace gdkm

namespace gdkm::numerics {

/// Square matrix with an exactly-zero strict upper triangle.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  /// Throws DimensionMismatch for non-square input. Entries above the
  /// diagonal must already be zero.
  explicit LowerTriangular(Matrix data);

  static LowerTriangular identity(Index dim);

  const Matrix& matrix() const noexcept { return data_; }
  Index dim() const noexcept { return data_.rows(); }
  double operator()(Index r, Index c) const { return data_(r, c); }

 private:
  Matrix data_;
};

/// Jitter ladder: level k adds ladder[k] * mean(diag(m)) to the diagonal.
struct JitterPolicy {
  std::vector<double> ladder{0.0, 1e-10, 1e-8, 1e-6, 1e-4};
};

struct CholeskyFactor {
  LowerTriangular factor;
  double jitter = 0.0;  // absolute delta added to the diagonal
  int level = 0;        // index into the ladder that succeeded
};

/// H with H H^T = m + delta I for the smallest ladder delta that factorizes.
CholeskyFactor cholesky(const Matrix& m, const JitterPolicy& policy = {});

struct SymEig {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns, first nonzero component positive
};

SymEig sym_eig(const Matrix& m);

/// V D^p V^{-1}. Symmetric input goes through sym_eig and stays symmetric;
/// general input must have a real, non-negative spectrum.
Matrix frac_power(const Matrix& m, double p);

enum class Side { Left, Right };

/// Left: h^{-1} b (h^{-T} b when transpose). Right: b h^{-1} (b h^{-T}).
Matrix tri_solve(const LowerTriangular& h, const Matrix& b, Side side, bool transpose);

/// 2 * sum_j log h_jj.
double logdet_from_chol(const LowerTriangular& h);

// Small helpers shared by the other modules.
Matrix symmetrize(const Matrix& m);
double relative_frobenius(const Matrix& a, const Matrix& b);
bool is_symmetric(const Matrix& m, double rel_tol = 1e-10);
void require_square(const Matrix& m, const char* what);
void require_symmetric(const Matrix& m, const char* what, double rel_tol = 1e-10);
Matrix to_dense(const SparseMatrix& s);

}  // namespace gdkm::numerics
