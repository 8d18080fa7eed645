// SPDX-License-Identifier: Apache-2.0
//
// Graph convolutional deep kernel machines: the full-rank objective over
// Gram matrices, the sparse inducing-point model with its Cholesky/Nystrom
// forward pass, and the variational softmax head.
#pragma once

#include "gdkm/autodiff.hpp"
#include "gdkm/graph.hpp"
#include "gdkm/kernels.hpp"
#include "gdkm/numerics.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace gdkm::dkm {

/// nu = infinity freezes a layer at the NNGP point.
inline constexpr double kInfiniteNu = std::numeric_limits<double>::infinity();
inline bool is_infinite(double nu) { return nu == kInfiniteNu; }

// ---------------------------------------------------------------------------
// Closed-form pieces

/// KL(N(0, g) || N(0, k)) = (tr(k^{-1} g) - log det(k^{-1} g) - P) / 2.
/// Throws SingularK if k does not factorize.
double kl_gaussian(const Matrix& g, const Matrix& k);

/// H L L^T H^T with H = chol(k_ii).
Matrix gram_from_params(const numerics::LowerTriangular& l, const Matrix& k_ii);

/// KL(H L L^T H^T || H H^T) = (||L||_F^2 - 2 sum log L_jj - P) / 2.
double parameterized_kl(const numerics::LowerTriangular& l);

/// chol(H^{-1} g_ii H^{-T}), the inverse of gram_from_params.
numerics::LowerTriangular params_from_gram(const Matrix& g_ii, const Matrix& k_ii);

// ---------------------------------------------------------------------------
// Full-rank objective

enum class LikelihoodKind {
  /// log N(Y; 0, A K(G^L) A^T + noise I), summed over output columns.
  Gaussian,
  /// -nu_out KL(label_gram || A K(G^L) A^T): the output layer treated as one
  /// more Gram layer with a fixed target.
  LabelKernel,
};

struct FullRankLikelihood {
  LikelihoodKind kind = LikelihoodKind::Gaussian;
  Matrix y;           // P x C targets (Gaussian)
  Matrix label_gram;  // P x P (LabelKernel)
  double noise = 1e-3;
  double nu_out = 1.0;
};

/// log P(Y | G^L) - sum_l nu_l KL(G^l || A K(G^{l-1}) A^T). Layers with
/// infinite nu are replaced by their prior (the given Gram is ignored).
/// Throws SingularPrior if a prior covariance does not factorize.
double full_rank_objective(std::span<const Matrix> grams, const Matrix& g0, const SparseMatrix& a,
                           std::span<const double> nu, kernels::BaseKernel kind,
                           const FullRankLikelihood& lik);

/// Tape version; `grams` may be leaves.
ad::Var full_rank_objective(ad::Tape& tape, std::span<const ad::Var> grams, ad::Var g0,
                            const SparseMatrix& a, std::span<const double> nu,
                            kernels::BaseKernel kind, const FullRankLikelihood& lik);

/// KL(N(0, g) || N(0, k)) on a tape.
ad::Var kl_gaussian(ad::Var g, ad::Var k);

// ---------------------------------------------------------------------------
// Inducing points

enum class SchemeKind { Inter, Intra };

struct InducingScheme {
  SchemeKind kind = SchemeKind::Inter;
  /// Nodes whose features become the inducing inputs (and, for Intra, whose
  /// adjacency the inducing points inherit).
  std::vector<Index> nodes;
  kernels::BlockAdjacency adjacency;
  /// Intra only: test nodes adjacent to some inducing node, and the
  /// corresponding rows of A_ti.
  std::vector<Index> neighbors;
  SparseMatrix a_ti_neighbors;

  Index num_inducing() const { return static_cast<Index>(nodes.size()); }
  Index num_test() const { return adjacency.tt.rows(); }
};

/// `count` distinct nodes out of [0, num_nodes), sorted.
std::vector<Index> sample_inducing_nodes(Index num_nodes, Index count, std::uint64_t seed);

/// A_ii = I, A_ti = 0, A_tt = a.
InducingScheme make_inter_scheme(const graph::NormalizedAdjacency& a, std::vector<Index> nodes);
/// A_ii = a[S, S], A_ti = a[:, S], A_tt = a.
InducingScheme make_intra_scheme(const graph::NormalizedAdjacency& a, std::vector<Index> nodes);
InducingScheme make_scheme(SchemeKind kind, const graph::NormalizedAdjacency& a, std::vector<Index> nodes);

// ---------------------------------------------------------------------------
// Model

enum class GttMode { Nystrom, Exact };
enum class Task { Node, Graph };

struct VariationalHead {
  Matrix mu;          // P_i x C, column c is mu_c
  Matrix sigma_chol;  // lower triangular S, Sigma = S S^T shared by all columns
  int mc_samples = 1;

  Matrix sigma() const { return sigma_chol * sigma_chol.transpose(); }
};

struct DkmModel {
  int depth = 2;
  std::vector<double> nu;  // one per Gram layer
  kernels::BaseKernel base_kernel = kernels::BaseKernel::Arccos;
  GttMode gtt_mode = GttMode::Nystrom;
  double input_scale = 1.0;
  Matrix inducing_inputs;                            // P_i x nu_0
  std::vector<Matrix> layer_params;                  // L^l, P_i x P_i lower triangular
  std::vector<kernels::CenteringParams> centering;   // one per Gram layer
  VariationalHead head;

  Index num_inducing() const { return inducing_inputs.rows(); }
  Index num_classes() const { return head.mu.cols(); }
  bool frozen(int layer) const { return is_infinite(nu[static_cast<std::size_t>(layer)]); }

  /// Throws SchemaError on inconsistent shapes.
  void validate() const;
};

struct ModelShape {
  int depth = 2;
  std::vector<double> nu;
  kernels::BaseKernel base_kernel = kernels::BaseKernel::Arccos;
  GttMode gtt_mode = GttMode::Nystrom;
  double input_scale = 1.0;
  int num_classes = 2;
  kernels::CenteringParams centering;
};

/// NNGP-point initialization: every L^l = I, mu = 0, Sigma = I.
DkmModel init_model(const ModelShape& shape, Matrix inducing_inputs);

// ---------------------------------------------------------------------------
// Forward pass

/// Layer-0 Gram blocks, fixed during training.
struct InputBlocks {
  Matrix ii;
  Matrix ti;
  Vector tt_diag;
  Matrix tt_cols;            // Intra: G^0_tt[:, neighbors]
  std::optional<Matrix> tt;  // Exact mode only
};

InputBlocks make_input_blocks(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme);

struct TapeParams {
  std::vector<ad::Var> layer;  // invalid Var for frozen layers
  ad::Var mu;
  ad::Var sigma_chol;
  std::vector<ad::Var> gamma;  // invalid when the layer is not centered
  std::vector<ad::Var> beta;
};

/// Leaves for every trainable parameter, constants for the rest.
TapeParams bind_params(ad::Tape& tape, const DkmModel& model, bool trainable = true);

struct TapeLayer {
  ad::Var k_ii, k_ti, k_tt;  // k_tt only in Exact mode
  ad::Var g_ii, g_ti, g_tt_diag, g_tt;
  ad::Var kl;
};

struct TapeForward {
  std::vector<TapeLayer> layers;
  ad::Var top_ii, top_ti;
  ad::Var top_h;  // chol(top_ii)
  ad::Var top_q;  // top_ti top_h^{-T}
};

TapeForward forward(ad::Tape& tape, const DkmModel& model, const TapeParams& params,
                    const InputBlocks& inputs, const InducingScheme& scheme);

struct LayerKernels {
  kernels::BlockGram k;  // after the kernel map and graph convolution
  kernels::BlockGram g;  // propagated Gram
  double kl = 0.0;
};

struct KernelStack {
  std::vector<LayerKernels> layers;
  kernels::BlockGram top;  // kernel map of the last Gram layer
};

KernelStack sparse_forward(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme);

// ---------------------------------------------------------------------------
// Likelihood and objective

/// Rows that enter the likelihood and their labels. For graph tasks the
/// logits are first averaged per graph with `pool` and `rows` index graphs.
struct Targets {
  Task task = Task::Node;
  std::vector<Index> rows;
  std::vector<int> labels;
  SparseMatrix pool;
};

struct HeadTerms {
  ad::Var expected_loglik;
  ad::Var weight_kl;
};

/// Monte-Carlo mean over W = mu + S E of sum log softmax(q W) at the target
/// rows, and sum_c KL(N(mu_c, Sigma) || N(0, I)).
HeadTerms head_terms(ad::Var q, ad::Var mu, ad::Var sigma_chol, const Targets& targets, int mc_samples,
                     std::uint64_t seed, std::uint64_t stream_offset);

struct HeadLikelihood {
  double expected_loglik = 0.0;
  double weight_kl = 0.0;
};

HeadLikelihood head_log_likelihood(const kernels::BlockGram& kernel_top, const VariationalHead& head,
                                   const Targets& targets, std::uint64_t seed);

struct ObjectiveTerms {
  ad::Var total;
  ad::Var expected_loglik;
  ad::Var weight_kl;
  std::vector<ad::Var> layer_kl;
  TapeForward forward;
};

ObjectiveTerms sparse_objective(ad::Tape& tape, const DkmModel& model, const TapeParams& params,
                                const InputBlocks& inputs, const InducingScheme& scheme,
                                const Targets& targets, std::uint64_t seed, std::uint64_t stream_offset = 0);

struct ObjectiveValue {
  double total = 0.0;
  double expected_loglik = 0.0;
  double weight_kl = 0.0;
  std::vector<double> layer_kl;
};

ObjectiveValue sparse_objective(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme,
                                const Targets& targets, std::uint64_t seed);

/// Q = K_ti H^{-T} of the top layer: one row of head features per test node,
/// so Q Q^T is the Nystrom reconstruction of the top kernel.
Matrix top_features(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme);

/// Class probabilities averaged over `mc_samples` draws of W, one row per
/// test node (or per graph when `pool` is non-empty).
Matrix predict_proba(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme, int mc_samples,
                     std::uint64_t seed, const SparseMatrix& pool = {});

}  // namespace gdkm::dkm
