// SPDX-License-Identifier: Apache-2.0
//
// Fixed-kernel recursions G^l = A K(G^{l-1}) A^T, dense and blockwise.
#pragma once

#include "gdkm/graph.hpp"
#include "gdkm/kernels.hpp"

#include <vector>

namespace gdkm::nngp {

struct NngpConfig {
  int depth = 2;
  kernels::BaseKernel base_kernel = kernels::BaseKernel::Arccos;
  graph::NormalizedAdjacency adjacency;
  double input_scale = 1.0;  // G^0 = input_scale * X X^T
};

/// input_scale * x x^T.
Matrix input_gram(const Matrix& x, double input_scale);

/// G^1..G^L from G^0 (already scaled).
std::vector<Matrix> nngp_forward(const Matrix& x_gram, const NngpConfig& cfg);

/// Blockwise recursion over inducing inputs x_i and test inputs x_t. The
/// adjacency stored in cfg is not used; the blocks in `a` define the graph.
/// Every returned block carries its full test-test matrix.
std::vector<kernels::BlockGram> nngp_forward_sparse(const Matrix& x_i, const Matrix& x_t,
                                                    const NngpConfig& cfg,
                                                    const kernels::BlockAdjacency& a);

}  // namespace gdkm::nngp
