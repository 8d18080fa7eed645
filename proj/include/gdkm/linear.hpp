// SPDX-License-Identifier: Apache-2.0
//
// Linear-kernel graph DKM with nu = 1 at every layer: the closed-form
// optimum and a gradient-descent solver that should land on it.
#pragma once

#include "gdkm/graph.hpp"
#include "gdkm/numerics.hpp"

#include <cstdint>
#include <vector>

namespace gdkm::linear {

/// G^l = A^{l-1} ((A^{-L} G^{L+1} A^{-L}) (A G^0 A)^{-1})^{l/(L+1)} (A G^0 A) A^{l-1}
/// for 0 <= l <= L+1. Throws SingularAdjacency, NegativeEigenvalue, or
/// NotSymmetric if the product loses symmetry beyond 1e-8.
Matrix linear_closed_form(const Matrix& g0, const Matrix& g_out, const Matrix& a, int depth, int layer);

/// All hidden layers 1..L.
std::vector<Matrix> linear_closed_form_all(const Matrix& g0, const Matrix& g_out, const Matrix& a, int depth);

/// -sum_{l=1}^{L+1} KL(G^l || A G^{l-1} A) with G^{L+1} = g_out.
double linear_objective(const std::vector<Matrix>& grams, const Matrix& g0, const Matrix& g_out,
                        const Matrix& a);

/// Gradient of linear_objective with respect to each hidden Gram matrix.
std::vector<Matrix> linear_objective_grad(const std::vector<Matrix>& grams, const Matrix& g0,
                                          const Matrix& g_out, const Matrix& a);

/// Standard Wishart sample W W^T / dof with W of shape n x dof.
Matrix wishart(Index n, Index dof, std::uint64_t seed, std::uint64_t index = 0);

/// y y^T / C + noise I for one-hot y (n x C).
Matrix label_gram(const Matrix& y, double noise);

struct GdOptions {
  int epochs = 10000;
  double lr = 0.1;      // initial rate of the polynomial schedule
  double power = 0.7;
  std::uint64_t seed = 0;
  Index wishart_dof = 0;  // 0 means n
  /// Triangular: G = V V^T with V = chol of the Wishart sample. Full: V is
  /// the n x dof Gaussian draw behind the Wishart sample, scaled by 1/sqrt(dof).
  enum class Factor { Triangular, Full } factor = Factor::Triangular;
};

struct GdResult {
  std::vector<Matrix> grams;
  std::vector<double> objective;  // one entry per epoch, plus the final value
};

/// Adam over lower-triangular factors of the hidden Gram matrices, starting
/// from Wishart samples.
GdResult fit_gradient_descent(const Matrix& g0, const Matrix& g_out, const Matrix& a, int depth,
                              const GdOptions& opts);

struct DemoOptions {
  int depth = 2;
  double label_noise = 0.1;  // G^{L+1} = Y Y^T / C + label_noise I
  bool run_gd = false;
  GdOptions gd;
};

struct DemoResult {
  double lambda = 0.0;
  std::vector<Matrix> dkm;   // closed-form G^1..G^L
  std::vector<Matrix> nngp;  // A G^{l-1} A
  double dkm_cka = 0.0;      // CKA(G^L, Y Y^T)
  double nngp_cka = 0.0;
  double analytic_objective = 0.0;
  // Filled when run_gd is set.
  std::vector<Matrix> gd;
  std::vector<double> gd_trace;  // objective per epoch
  double gd_objective = 0.0;
  double gd_max_abs = 0.0;   // max |normalize(G_gd) - normalize(G_closed)| over layers
};

/// Closed form, NNGP and optionally gradient descent for one lambda on a
/// labelled graph. G^0 = X X^T / nu_0.
DemoResult linear_demo(const Matrix& x, const graph::EdgeList& edges, const std::vector<int>& labels, double lambda,
                       const DemoOptions& opts);

}  // namespace gdkm::linear
