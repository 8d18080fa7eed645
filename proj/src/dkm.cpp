// SPDX-License-Identifier: Apache-2.0
#include "gdkm/dkm.hpp"

#include "gdkm/error.hpp"
#include "gdkm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

namespace gdkm::dkm {

namespace {

const numerics::JitterPolicy kStrict{{0.0}};

Eigen::LLT<Matrix> factor_or(const Matrix& m, ErrorCode code, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) fail(code, what);
  return llt;
}

}  // namespace

double kl_gaussian(const Matrix& g, const Matrix& k) {
  numerics::require_square(g, "kl_gaussian");
  if (g.rows() != k.rows() || g.cols() != k.cols()) fail(ErrorCode::DimensionMismatch, "kl_gaussian dims");
  const auto lk = factor_or(k, ErrorCode::SingularK, "prior covariance is not positive definite");
  const auto lg = factor_or(g, ErrorCode::FactorizationFailed, "Gram matrix is not positive definite");
  const Matrix hk = lk.matrixL();
  const Matrix hg = lg.matrixL();
  const Matrix z = hk.triangularView<Eigen::Lower>().solve(hg);
  const double logdet_k = 2.0 * hk.diagonal().array().log().sum();
  const double logdet_g = 2.0 * hg.diagonal().array().log().sum();
  return 0.5 * (z.squaredNorm() - logdet_g + logdet_k - static_cast<double>(g.rows()));
}

Matrix gram_from_params(const numerics::LowerTriangular& l, const Matrix& k_ii) {
  if (l.dim() != k_ii.rows()) fail(ErrorCode::DimensionMismatch, "gram_from_params dims");
  const auto h = numerics::cholesky(k_ii);
  const Matrix f = h.factor.matrix() * l.matrix();
  return numerics::symmetrize(f * f.transpose());
}

double parameterized_kl(const numerics::LowerTriangular& l) {
  const double logdet = numerics::logdet_from_chol(l);
  return 0.5 * (l.matrix().squaredNorm() - logdet - static_cast<double>(l.dim()));
}

numerics::LowerTriangular params_from_gram(const Matrix& g_ii, const Matrix& k_ii) {
  const auto h = numerics::cholesky(k_ii);
  Matrix m = numerics::tri_solve(h.factor, g_ii, numerics::Side::Left, false);
  m = numerics::tri_solve(h.factor, m, numerics::Side::Right, true);
  return numerics::cholesky(numerics::symmetrize(m)).factor;
}

ad::Var kl_gaussian(ad::Var g, ad::Var k) {
  ad::Var hk;
  try {
    hk = ad::cholesky(k, kStrict);
  } catch (const Error& e) {
    fail(ErrorCode::SingularK, e.what());
  }
  const ad::Var hg = ad::cholesky(g, kStrict);
  const ad::Var z = ad::tri_solve(hk, hg, numerics::Side::Left, false);
  // tr(k^{-1} g) - log det g + log det k - P
  ad::Var value = ad::sub(ad::frobenius_sq(z), ad::scale(ad::sum_log_diag(hg), 2.0));
  value = ad::add(value, ad::scale(ad::sum_log_diag(hk), 2.0));
  value = ad::add(value, g.tape()->scalar_constant(-static_cast<double>(g.rows())));
  return ad::scale(value, 0.5);
}

namespace {

ad::Var kernel_map(ad::Var g, kernels::BaseKernel kind) {
  if (kind == kernels::BaseKernel::Linear) return g;
  const ad::Var d = ad::diag(g);
  return ad::arccos(g, d, d);
}

ad::Var conv(ad::Var k, const SparseMatrix& a, const SparseMatrix& at) {
  return ad::sparse_right(ad::sparse_left(a, k), at);
}

}  // namespace

ad::Var full_rank_objective(ad::Tape& tape, std::span<const ad::Var> grams, ad::Var g0,
                            const SparseMatrix& a, std::span<const double> nu,
                            kernels::BaseKernel kind, const FullRankLikelihood& lik) {
  if (grams.size() != nu.size()) fail(ErrorCode::DimensionMismatch, "one nu per Gram layer expected");
  if (a.rows() != g0.rows() || a.cols() != g0.rows()) fail(ErrorCode::DimensionMismatch, "adjacency size");
  const SparseMatrix at = a.transpose();
  ad::Var total = tape.scalar_constant(0.0);
  ad::Var prev = g0;
  for (std::size_t l = 0; l < grams.size(); ++l) {
    const ad::Var prior = conv(kernel_map(prev, kind), a, at);
    ad::Var cur = prior;
    if (!is_infinite(nu[l])) {
      cur = grams[l];
      if (nu[l] != 0.0) {
        ad::Var kl;
        try {
          kl = kl_gaussian(cur, prior);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::SingularK) throw;
          fail(ErrorCode::SingularPrior, "layer " + std::to_string(l + 1) + " prior is singular");
        }
        total = ad::sub(total, ad::scale(kl, nu[l]));
      }
    }
    prev = cur;
  }
  const ad::Var top = conv(kernel_map(prev, kind), a, at);
  const Index p = top.rows();
  if (lik.kind == LikelihoodKind::Gaussian) {
    if (lik.y.rows() != p) fail(ErrorCode::DimensionMismatch, "targets must have one row per node");
    const ad::Var cov = ad::add(top, tape.constant(lik.noise * Matrix::Identity(p, p)));
    ad::Var h;
    try {
      h = ad::cholesky(cov, kStrict);
    } catch (const Error&) {
      fail(ErrorCode::SingularPrior, "output covariance is singular");
    }
    const ad::Var z = ad::tri_solve(h, tape.constant(lik.y), numerics::Side::Left, false);
    const double c = static_cast<double>(lik.y.cols());
    ad::Var ll = ad::scale(ad::frobenius_sq(z), -0.5);
    ll = ad::sub(ll, ad::scale(ad::sum_log_diag(h), c));
    ll = ad::add(ll, tape.scalar_constant(-0.5 * c * static_cast<double>(p) * std::log(2.0 * std::numbers::pi)));
    total = ad::add(total, ll);
  } else {
    if (lik.label_gram.rows() != p) fail(ErrorCode::DimensionMismatch, "label Gram size");
    ad::Var kl;
    try {
      kl = kl_gaussian(tape.constant(lik.label_gram), top);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularK) throw;
      fail(ErrorCode::SingularPrior, "output prior is singular");
    }
    total = ad::sub(total, ad::scale(kl, lik.nu_out));
  }
  return total;
}

double full_rank_objective(std::span<const Matrix> grams, const Matrix& g0, const SparseMatrix& a,
                           std::span<const double> nu, kernels::BaseKernel kind,
                           const FullRankLikelihood& lik) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(grams.size());
  for (const auto& g : grams) vars.push_back(tape.constant(g));
  return full_rank_objective(tape, vars, tape.constant(g0), a, nu, kind, lik).scalar();
}

std::vector<Index> sample_inducing_nodes(Index num_nodes, Index count, std::uint64_t seed) {
  if (count < 1 || count > num_nodes) {
    fail(ErrorCode::ConfigError, "inducing count must lie in [1, " + std::to_string(num_nodes) + "]");
  }
  std::vector<Index> all(static_cast<std::size_t>(num_nodes));
  std::iota(all.begin(), all.end(), Index{0});
  Rng rng(seed, Stream::Inducing);
  for (Index k = 0; k < count; ++k) {
    const Index j = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(num_nodes - k)));
    std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(count));
  std::sort(all.begin(), all.end());
  return all;
}

InducingScheme make_inter_scheme(const graph::NormalizedAdjacency& a, std::vector<Index> nodes) {
  InducingScheme s;
  s.kind = SchemeKind::Inter;
  s.nodes = std::move(nodes);
  const Index pi = s.num_inducing();
  s.adjacency.ii.resize(pi, pi);
  s.adjacency.ii.setIdentity();
  s.adjacency.ti.resize(a.size(), pi);
  s.adjacency.tt = a.matrix;
  return s;
}

InducingScheme make_intra_scheme(const graph::NormalizedAdjacency& a, std::vector<Index> nodes) {
  InducingScheme s;
  s.kind = SchemeKind::Intra;
  s.nodes = std::move(nodes);
  const Index pi = s.num_inducing();
  const Index pt = a.size();
  std::unordered_map<Index, Index> position;
  for (Index k = 0; k < pi; ++k) {
    const Index node = s.nodes[static_cast<std::size_t>(k)];
    if (node < 0 || node >= pt) fail(ErrorCode::SchemaError, "inducing node out of range");
    position.emplace(node, k);
  }
  std::vector<Eigen::Triplet<double>> ti;
  std::vector<Eigen::Triplet<double>> ii;
  std::vector<char> touched(static_cast<std::size_t>(pt), 0);
  for (Index k = 0; k < pi; ++k) {
    for (SparseMatrix::InnerIterator it(a.matrix, s.nodes[static_cast<std::size_t>(k)]); it; ++it) {
      ti.emplace_back(it.row(), k, it.value());
      touched[static_cast<std::size_t>(it.row())] = 1;
      const auto found = position.find(it.row());
      if (found != position.end()) ii.emplace_back(found->second, k, it.value());
    }
  }
  s.adjacency.ii.resize(pi, pi);
  s.adjacency.ii.setFromTriplets(ii.begin(), ii.end());
  s.adjacency.ti.resize(pt, pi);
  s.adjacency.ti.setFromTriplets(ti.begin(), ti.end());
  s.adjacency.tt = a.matrix;
  std::vector<Index> row_of(static_cast<std::size_t>(pt), -1);
  for (Index r = 0; r < pt; ++r) {
    if (touched[static_cast<std::size_t>(r)]) {
      row_of[static_cast<std::size_t>(r)] = static_cast<Index>(s.neighbors.size());
      s.neighbors.push_back(r);
    }
  }
  std::vector<Eigen::Triplet<double>> rows;
  for (const auto& t : ti) rows.emplace_back(row_of[static_cast<std::size_t>(t.row())], t.col(), t.value());
  s.a_ti_neighbors.resize(static_cast<Index>(s.neighbors.size()), pi);
  s.a_ti_neighbors.setFromTriplets(rows.begin(), rows.end());
  return s;
}

InducingScheme make_scheme(SchemeKind kind, const graph::NormalizedAdjacency& a, std::vector<Index> nodes) {
  return kind == SchemeKind::Inter ? make_inter_scheme(a, std::move(nodes))
                                   : make_intra_scheme(a, std::move(nodes));
}

void DkmModel::validate() const {
  const auto bad = [](const std::string& what) { fail(ErrorCode::SchemaError, what); };
  if (depth < 1) bad("depth must be at least 1");
  const auto d = static_cast<std::size_t>(depth);
  if (nu.size() != d) bad("expected one nu per layer");
  for (double v : nu) {
    if (!(v >= 0.0)) bad("nu must be non-negative");
  }
  if (layer_params.size() != d) bad("expected one parameter matrix per layer");
  if (centering.size() != d) bad("expected one centering entry per layer");
  const Index pi = num_inducing();
  if (pi < 1) bad("no inducing inputs");
  for (const auto& l : layer_params) {
    if (l.rows() != pi || l.cols() != pi) bad("layer parameter has the wrong shape");
  }
  if (head.mu.rows() != pi || head.mu.cols() < 1) bad("head mean has the wrong shape");
  if (head.sigma_chol.rows() != pi || head.sigma_chol.cols() != pi) bad("head covariance has the wrong shape");
  if (head.mc_samples < 1) bad("mc_samples must be positive");
  if (!(input_scale > 0.0)) bad("input_scale must be positive");
}

DkmModel init_model(const ModelShape& shape, Matrix inducing_inputs) {
  DkmModel m;
  m.depth = shape.depth;
  m.nu = shape.nu;
  if (m.nu.size() == 1 && shape.depth > 1) m.nu.assign(static_cast<std::size_t>(shape.depth), shape.nu.front());
  m.base_kernel = shape.base_kernel;
  m.gtt_mode = shape.gtt_mode;
  m.input_scale = shape.input_scale;
  m.inducing_inputs = std::move(inducing_inputs);
  const Index pi = m.inducing_inputs.rows();
  m.layer_params.assign(static_cast<std::size_t>(shape.depth), Matrix::Identity(pi, pi));
  m.centering.assign(static_cast<std::size_t>(shape.depth), shape.centering);
  m.head.mu = Matrix::Zero(pi, shape.num_classes);
  m.head.sigma_chol = Matrix::Identity(pi, pi);
  m.head.mc_samples = 1;
  m.validate();
  return m;
}

}  // namespace gdkm::dkm
