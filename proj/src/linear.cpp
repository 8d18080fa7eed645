// SPDX-License-Identifier: Apache-2.0
#include "gdkm/linear.hpp"

#include "gdkm/dkm.hpp"
#include "gdkm/error.hpp"
#include "gdkm/kernels.hpp"
#include "gdkm/rng.hpp"
#include "gdkm/train.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <string>
#include <utility>

namespace gdkm::linear {

namespace {

/// Q diag(w) Q^T of a symmetric matrix, applied through integer powers.
struct SymEig {
  Matrix q;
  Vector w;

  Matrix power(int k) const {
    const Vector wk = w.array().pow(static_cast<double>(k));
    return q * wk.asDiagonal() * q.transpose();
  }
};

SymEig adjacency_eig(const Matrix& a) {
  numerics::require_square(a, "adjacency");
  const Matrix sym = numerics::symmetrize(a);
  if ((a - sym).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
    fail(ErrorCode::NotSymmetric, "adjacency must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailed, "adjacency eigensolver did not converge");
  const Vector w = es.eigenvalues();
  const double top = w.size() > 0 ? w.cwiseAbs().maxCoeff() : 0.0;
  if (w.size() == 0 || w.cwiseAbs().minCoeff() <= 1e-12 * std::max(1.0, top)) {
    fail(ErrorCode::SingularAdjacency, "adjacency is not invertible; interpolate with the identity");
  }
  return {es.eigenvectors(), w};
}

/// Symmetric square root C with C C^T = g, and its inverse.
std::pair<Matrix, Matrix> spd_root(const Matrix& g, const char* what) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(numerics::symmetrize(g));
  if (es.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailed, "eigensolver did not converge");
  const Vector w = es.eigenvalues();
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  if (w.minCoeff() <= 1e-14 * scale) {
    fail(ErrorCode::NegativeEigenvalue, std::string(what) + " is not positive definite (eigenvalue " +
                                            std::to_string(w.minCoeff()) + ")");
  }
  const Matrix& q = es.eigenvectors();
  const Vector r = w.cwiseSqrt();
  return {q * r.asDiagonal(), r.cwiseInverse().asDiagonal() * q.transpose()};
}

}  // namespace

// With G^0 = C_0 C_0^T, G^{L+1} = C_o C_o^T and B = C_0^{-1} A^{-(L+1)} C_o = U S V^T,
//   G^l = A^{l-1} ((A^{-L} G^{L+1} A^{-L}) (A G^0 A)^{-1})^p (A G^0 A) A^{l-1}
//       = A^l C_0 U S^{2p} U^T C_0^T A^l,   p = l / (L + 1),
// which never forms A^{-L} G^{L+1} A^{-L} explicitly.
Matrix linear_closed_form(const Matrix& g0, const Matrix& g_out, const Matrix& a, int depth, int layer) {
  if (depth < 1) fail(ErrorCode::ConfigError, "depth must be at least 1");
  if (layer < 0 || layer > depth + 1) fail(ErrorCode::ConfigError, "layer must lie in [0, depth + 1]");
  numerics::require_square(g0, "g0");
  if (g_out.rows() != g0.rows() || a.rows() != g0.rows()) fail(ErrorCode::DimensionMismatch, "closed-form sizes");
  const SymEig ae = adjacency_eig(a);
  const auto [c0, c0_inv] = spd_root(g0, "g0");
  const Matrix c_out = spd_root(g_out, "output Gram").first;
  const Matrix b = c0_inv * ae.power(-(depth + 1)) * c_out;
  const Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullU);
  const double p = static_cast<double>(layer) / static_cast<double>(depth + 1);
  const Vector sp = svd.singularValues().array().pow(p);
  const Matrix w = ae.power(layer) * c0 * svd.matrixU() * sp.asDiagonal();
  const Matrix g = w * w.transpose();
  const double asym = (g - g.transpose()).norm() / std::max(g.norm(), 1e-300);
  if (asym >= 1e-8) {
    fail(ErrorCode::NotSymmetric, "closed-form layer " + std::to_string(layer) +
                                      " has relative asymmetry " + std::to_string(asym));
  }
  return numerics::symmetrize(g);
}

std::vector<Matrix> linear_closed_form_all(const Matrix& g0, const Matrix& g_out, const Matrix& a, int depth) {
  std::vector<Matrix> out;
  for (int l = 1; l <= depth; ++l) out.push_back(linear_closed_form(g0, g_out, a, depth, l));
  return out;
}

namespace {

dkm::FullRankLikelihood label_likelihood(const Matrix& g_out) {
  dkm::FullRankLikelihood lik;
  lik.kind = dkm::LikelihoodKind::LabelKernel;
  lik.label_gram = g_out;
  lik.nu_out = 1.0;
  return lik;
}

}  // namespace

double linear_objective(const std::vector<Matrix>& grams, const Matrix& g0, const Matrix& g_out,
                        const Matrix& a) {
  const std::vector<double> nu(grams.size(), 1.0);
  return dkm::full_rank_objective(grams, g0, a.sparseView(), nu, kernels::BaseKernel::Linear,
                                  label_likelihood(g_out));
}

std::vector<Matrix> linear_objective_grad(const std::vector<Matrix>& grams, const Matrix& g0,
                                          const Matrix& g_out, const Matrix& a) {
  const std::vector<double> nu(grams.size(), 1.0);
  const SparseMatrix as = a.sparseView();
  const auto lik = label_likelihood(g_out);
  const auto r = train::grad(
      [&](ad::Tape& t, std::span<const ad::Var> vars) {
        return dkm::full_rank_objective(t, vars, t.constant(g0), as, nu, kernels::BaseKernel::Linear, lik);
      },
      grams);
  return r.grads;
}

Matrix wishart(Index n, Index dof, std::uint64_t seed, std::uint64_t index) {
  Rng rng(seed, Stream::Init, index);
  const Matrix w = rng.normal_matrix(n, dof);
  return numerics::symmetrize(w * w.transpose() / static_cast<double>(dof));
}

Matrix label_gram(const Matrix& y, double noise) {
  const double c = static_cast<double>(std::max<Index>(y.cols(), 1));
  return numerics::symmetrize(y * y.transpose() / c + noise * Matrix::Identity(y.rows(), y.rows()));
}

GdResult fit_gradient_descent(const Matrix& g0, const Matrix& g_out, const Matrix& a, int depth,
                              const GdOptions& opts) {
  const Index n = g0.rows();
  const Index dof = opts.wishart_dof > 0 ? opts.wishart_dof : n;
  const bool full = opts.factor == GdOptions::Factor::Full;
  std::vector<Matrix> factors;
  for (int l = 0; l < depth; ++l) {
    if (full) {
      Rng rng(opts.seed, Stream::Init, static_cast<std::uint64_t>(l));
      factors.push_back(rng.normal_matrix(n, dof) / std::sqrt(static_cast<double>(dof)));
    } else {
      factors.push_back(numerics::cholesky(wishart(n, dof, opts.seed, static_cast<std::uint64_t>(l))).factor.matrix());
    }
  }
  const std::vector<double> nu(static_cast<std::size_t>(depth), 1.0);
  const SparseMatrix as = a.sparseView();
  const auto lik = label_likelihood(g_out);
  const auto objective = [&](ad::Tape& t, std::span<const ad::Var> vars) {
    std::vector<ad::Var> grams;
    for (const auto& v : vars) grams.push_back(ad::matmul(v, ad::transpose(v)));
    return dkm::full_rank_objective(t, grams, t.constant(g0), as, nu, kernels::BaseKernel::Linear, lik);
  };
  train::PolynomialSchedule schedule{opts.lr, opts.power, opts.epochs};
  train::Adam adam;
  GdResult result;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    auto r = train::grad(objective, factors);
    result.objective.push_back(r.value);
    std::vector<Matrix*> ptrs;
    for (std::size_t k = 0; k < factors.size(); ++k) {
      if (!full) r.grads[k] = r.grads[k].triangularView<Eigen::Lower>();
      ptrs.push_back(&factors[k]);
    }
    adam.step(ptrs, r.grads, schedule.at(epoch), true);
  }
  for (const auto& f : factors) result.grams.push_back(numerics::symmetrize(f * f.transpose()));
  result.objective.push_back(linear_objective(result.grams, g0, g_out, a));
  return result;
}

DemoResult linear_demo(const Matrix& x, const graph::EdgeList& edges, const std::vector<int>& labels, double lambda,
                       const DemoOptions& opts) {
  const Index n = x.rows();
  if (static_cast<Index>(labels.size()) != n) fail(ErrorCode::DimensionMismatch, "one label per node expected");
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  Matrix y = Matrix::Zero(n, classes);
  for (Index i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  const Matrix yyt = y * y.transpose();

  const Matrix a = graph::interpolate_lambda(graph::normalize_kipf(edges), lambda).dense();
  const Matrix g0 = x * x.transpose() / static_cast<double>(x.cols());
  const Matrix g_out = label_gram(y, opts.label_noise);

  DemoResult r;
  r.lambda = lambda;
  r.dkm = linear_closed_form_all(g0, g_out, a, opts.depth);
  Matrix g = g0;
  for (int l = 0; l < opts.depth; ++l) {
    g = numerics::symmetrize(a * g * a);
    r.nngp.push_back(g);
  }
  r.dkm_cka = kernels::cka(r.dkm.back(), yyt);
  r.nngp_cka = kernels::cka(r.nngp.back(), yyt);
  r.analytic_objective = linear_objective(r.dkm, g0, g_out, a);
  if (opts.run_gd) {
    GdResult gd = fit_gradient_descent(g0, g_out, a, opts.depth, opts.gd);
    r.gd = std::move(gd.grams);
    r.gd_objective = gd.objective.back();
    r.gd_trace = std::move(gd.objective);
    for (int l = 0; l < opts.depth; ++l) {
      const auto k = static_cast<std::size_t>(l);
      const double diff =
          (kernels::normalize_kernel(r.gd[k]) - kernels::normalize_kernel(r.dkm[k])).cwiseAbs().maxCoeff();
      r.gd_max_abs = std::max(r.gd_max_abs, diff);
    }
  }
  return r;
}

}  // namespace gdkm::linear
