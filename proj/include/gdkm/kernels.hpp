// SPDX-License-Identifier: Apache-2.0
//
// Kernel maps over Gram matrices: arccosine (ReLU) and linear, dense and
// blockwise graph convolution, the centering layer and CKA.
#pragma once

#include "gdkm/graph.hpp"
#include "gdkm/numerics.hpp"

#include <optional>

namespace gdkm::kernels {

enum class BaseKernel { Arccos, Linear };

/// Inducing/test partition of a Gram matrix. The test-test block is either
/// stored in full or only through its diagonal.
struct BlockGram {
  Matrix ii;                  // P_i x P_i
  Matrix ti;                  // P_t x P_i
  Vector tt_diag;             // P_t
  std::optional<Matrix> tt;   // P_t x P_t when available

  Index num_inducing() const { return ii.rows(); }
  Index num_test() const { return ti.rows(); }
  bool has_full_tt() const { return tt.has_value(); }

  /// [[ii, ti^T], [ti, tt]]. Requires the full test block.
  Matrix assemble() const;

  static BlockGram from_full(const Matrix& g, Index num_inducing);
};

inline constexpr double kDiagFloor = 1e-12;

/// Arccosine entries for a cross block: rows carry diagonal d_row, columns d_col.
Matrix arccos_cross(const Matrix& g, const Vector& d_row, const Vector& d_col);

Matrix arccos_kernel(const Matrix& g);
BlockGram arccos_kernel_cross(const BlockGram& g);

inline Matrix linear_kernel(const Matrix& g) { return g; }

Matrix apply_kernel(BaseKernel kind, const Matrix& g);
BlockGram apply_kernel(BaseKernel kind, const BlockGram& g);

/// a k a^T.
Matrix graph_conv(const Matrix& k, const graph::NormalizedAdjacency& a);
Matrix graph_conv(const Matrix& k, const SparseMatrix& a);

/// Blocks of the joint adjacency [[ii, ti^T], [ti, tt]].
struct BlockAdjacency {
  SparseMatrix ii;  // P_i x P_i
  SparseMatrix ti;  // P_t x P_i
  SparseMatrix tt;  // P_t x P_t

  bool cross_is_zero() const { return ti.nonZeros() == 0; }
};

/// Blockwise [[A]] k [[A]]^T. The full test block of k is needed whenever
/// A_ti is nonzero or the full test block of the result is requested.
BlockGram graph_conv_block(const BlockGram& k, const BlockAdjacency& a);

struct CenteringParams {
  bool enabled = false;
  bool learn_affine = false;
  double gamma = 1.0;
  double beta = 0.0;
};

/// I - ones/P applied on the left.
Matrix center_rows(const Matrix& f);

/// gamma^2 C k C + beta^2 ones (identity when disabled).
Matrix center_kernel(const Matrix& k, const CenteringParams& p);

/// [gamma C f, beta ones]; its Gram matrix is center_kernel(f f^T).
Matrix center_features(const Matrix& f, const CenteringParams& p);

/// Centered kernel alignment with double centering. Throws DegenerateKernel
/// when either centered kernel vanishes.
double cka(const Matrix& k1, const Matrix& k2);

/// D^{-1/2} k D^{-1/2} with D = diag(k); entries land in [-1, 1] for PSD k.
Matrix normalize_kernel(const Matrix& k);

}  // namespace gdkm::kernels
