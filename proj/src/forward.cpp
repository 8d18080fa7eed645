// SPDX-License-Identifier: Apache-2.0
//
// Tape forward pass of the sparse model. Gram layers are carried as factors
// F_i, F_t with G_ii = F_i F_i^T and G_ti = F_t F_i^T; the test-test block is
// either F_t F_t^T (Nystrom) or the full corrected matrix (Exact).
#include "gdkm/dkm.hpp"

#include "gdkm/error.hpp"
#include "gdkm/rng.hpp"

#include <cmath>

namespace gdkm::dkm {

using numerics::Side;

namespace {

struct State {
  ad::Var ii, ti, tt_diag, tt_cols, tt;
};

struct Conv {
  ad::Var ii, ti, tt;
};

Matrix column(const Vector& v) { return Matrix(v); }

State input_state(ad::Tape& t, const InputBlocks& in) {
  State s;
  s.ii = t.constant(in.ii);
  s.ti = t.constant(in.ti);
  s.tt_diag = t.constant(column(in.tt_diag));
  if (in.tt_cols.size() > 0) s.tt_cols = t.constant(in.tt_cols);
  if (in.tt) s.tt = t.constant(*in.tt);
  return s;
}

State kernel_state(const State& s, kernels::BaseKernel kind, const InducingScheme& scheme, bool exact) {
  if (kind == kernels::BaseKernel::Linear) return s;
  const bool intra = scheme.kind == SchemeKind::Intra;
  State out;
  const ad::Var d_i = ad::diag(s.ii);
  out.ii = ad::arccos(s.ii, d_i, d_i);
  out.ti = ad::arccos(s.ti, s.tt_diag, d_i);
  out.tt_diag = s.tt_diag;
  if (exact) {
    out.tt = ad::arccos(s.tt, s.tt_diag, s.tt_diag);
    if (intra) out.tt_cols = ad::gather_cols(out.tt, scheme.neighbors);
  } else if (intra) {
    out.tt_cols = ad::arccos(s.tt_cols, s.tt_diag, ad::gather_rows(s.tt_diag, scheme.neighbors));
  }
  return out;
}

Conv graph_conv(const State& phi, const InducingScheme& scheme, bool exact) {
  const auto& a = scheme.adjacency;
  const SparseMatrix a_tt_t = a.tt.transpose();
  Conv out;
  if (scheme.kind == SchemeKind::Inter) {
    out.ii = phi.ii;
    out.ti = ad::sparse_left(a.tt, phi.ti);
    if (exact) out.tt = ad::sparse_right(ad::sparse_left(a.tt, phi.tt), a_tt_t);
    return out;
  }
  const SparseMatrix a_ii_t = a.ii.transpose();
  const SparseMatrix a_ti_t = a.ti.transpose();
  // [M_i; M_t] = Phi [A_ii, A_it]^T; only the neighbor columns of Phi_tt meet A_ti.
  const ad::Var m_i = ad::add(ad::sparse_right(phi.ii, a_ii_t), ad::transpose(ad::sparse_left(a_ti_t, phi.ti)));
  const ad::Var m_t = ad::add(ad::sparse_right(phi.ti, a_ii_t), ad::sparse_right(phi.tt_cols, scheme.a_ti_neighbors));
  out.ii = ad::add(ad::sparse_left(a.ii, m_i), ad::sparse_left(a_ti_t, m_t));
  out.ti = ad::add(ad::sparse_left(a.ti, m_i), ad::sparse_left(a.tt, m_t));
  if (exact) {
    const ad::Var n_i = ad::add(ad::sparse_right(phi.ii, a_ti_t), ad::transpose(ad::sparse_left(a.tt, phi.ti)));
    const ad::Var n_t = ad::add(ad::sparse_right(phi.ti, a_ti_t), ad::sparse_right(phi.tt, a_tt_t));
    out.tt = ad::add(ad::sparse_left(a.ti, n_i), ad::sparse_left(a.tt, n_t));
  }
  return out;
}

ad::Var affine_center(ad::Var f, ad::Var gamma, ad::Var beta) {
  return ad::hcat(ad::scale_by(ad::center(f), gamma), ad::fill(beta, f.rows(), 1));
}

}  // namespace

InputBlocks make_input_blocks(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme) {
  const Matrix& x_i = model.inducing_inputs;
  if (x_i.cols() != x_t.cols()) fail(ErrorCode::SchemaError, "inducing inputs and features differ in width");
  if (scheme.num_inducing() != x_i.rows()) fail(ErrorCode::SchemaError, "scheme and model inducing counts differ");
  if (scheme.num_test() != x_t.rows()) fail(ErrorCode::SchemaError, "scheme and feature row counts differ");
  const double s = model.input_scale;
  InputBlocks in;
  in.ii = numerics::symmetrize(s * (x_i * x_i.transpose()));
  in.ti = s * (x_t * x_i.transpose());
  in.tt_diag = s * x_t.rowwise().squaredNorm();
  if (model.gtt_mode == GttMode::Exact) {
    in.tt = numerics::symmetrize(s * (x_t * x_t.transpose()));
    in.tt_diag = in.tt->diagonal();
  }
  if (scheme.kind == SchemeKind::Intra) {
    Matrix rows(static_cast<Index>(scheme.neighbors.size()), x_t.cols());
    for (std::size_t k = 0; k < scheme.neighbors.size(); ++k) {
      rows.row(static_cast<Index>(k)) = x_t.row(scheme.neighbors[k]);
    }
    in.tt_cols = s * (x_t * rows.transpose());
    if (in.tt) {
      for (std::size_t k = 0; k < scheme.neighbors.size(); ++k) {
        in.tt_cols.col(static_cast<Index>(k)) = in.tt->col(scheme.neighbors[k]);
      }
    }
  }
  return in;
}

TapeParams bind_params(ad::Tape& tape, const DkmModel& model, bool trainable) {
  TapeParams p;
  const auto bind = [&](const Matrix& m, bool train) { return train ? tape.leaf(m) : tape.constant(m); };
  for (int l = 0; l < model.depth; ++l) {
    const auto k = static_cast<std::size_t>(l);
    p.layer.push_back(model.frozen(l) ? ad::Var() : bind(model.layer_params[k], trainable));
    const auto& c = model.centering[k];
    if (c.enabled) {
      p.gamma.push_back(bind(Matrix::Constant(1, 1, c.gamma), trainable && c.learn_affine));
      p.beta.push_back(bind(Matrix::Constant(1, 1, c.beta), trainable && c.learn_affine));
    } else {
      p.gamma.emplace_back();
      p.beta.emplace_back();
    }
  }
  p.mu = bind(model.head.mu, trainable);
  p.sigma_chol = bind(model.head.sigma_chol, trainable);
  return p;
}

TapeForward forward(ad::Tape& tape, const DkmModel& model, const TapeParams& params,
                    const InputBlocks& inputs, const InducingScheme& scheme) {
  model.validate();
  const bool exact = model.gtt_mode == GttMode::Exact;
  const bool intra = scheme.kind == SchemeKind::Intra;
  if (exact && !inputs.tt) fail(ErrorCode::SchemaError, "exact mode needs the full input block");
  const Index pi = model.num_inducing();
  TapeForward out;
  State state = input_state(tape, inputs);
  for (int l = 0; l < model.depth; ++l) {
    const auto k = static_cast<std::size_t>(l);
    const State phi = kernel_state(state, model.base_kernel, scheme, exact);
    const Conv kc = graph_conv(phi, scheme, exact);

    const ad::Var h = ad::cholesky(kc.ii);
    const ad::Var q = ad::tri_solve(h, kc.ti, Side::Right, true);
    ad::Var f_i = h;
    ad::Var f_t = q;
    ad::Var kl = tape.scalar_constant(0.0);
    if (!model.frozen(l)) {
      const ad::Var lp = params.layer[k];
      f_i = ad::matmul(h, lp);
      f_t = ad::matmul(q, lp);
      kl = ad::sub(ad::frobenius_sq(lp), ad::scale(ad::sum_log_diag(lp), 2.0));
      kl = ad::scale(ad::add(kl, tape.scalar_constant(-static_cast<double>(pi))), 0.5);
    }
    ad::Var g_tt;
    if (exact) {
      g_tt = ad::add(ad::sub(kc.tt, ad::matmul(q, ad::transpose(q))), ad::matmul(f_t, ad::transpose(f_t)));
    }
    if (model.centering[k].enabled) {
      const ad::Var gamma = params.gamma[k];
      const ad::Var beta = params.beta[k];
      f_i = affine_center(f_i, gamma, beta);
      f_t = affine_center(f_t, gamma, beta);
      if (exact) {
        const ad::Var cgc = ad::center(ad::transpose(ad::center(g_tt)));
        g_tt = ad::add_scalar(ad::scale_by(cgc, ad::scale_by(gamma, gamma)), ad::scale_by(beta, beta));
      }
    }

    State next;
    const ad::Var f_i_t = ad::transpose(f_i);
    next.ii = ad::matmul(f_i, f_i_t);
    next.ti = ad::matmul(f_t, f_i_t);
    if (exact) {
      next.tt = g_tt;
      next.tt_diag = ad::diag(g_tt);
      if (intra) next.tt_cols = ad::gather_cols(g_tt, scheme.neighbors);
    } else {
      next.tt_diag = ad::row_sq_norms(f_t);
      if (intra) next.tt_cols = ad::matmul(f_t, ad::transpose(ad::gather_rows(f_t, scheme.neighbors)));
    }

    TapeLayer layer;
    layer.k_ii = kc.ii;
    layer.k_ti = kc.ti;
    layer.k_tt = kc.tt;
    layer.g_ii = next.ii;
    layer.g_ti = next.ti;
    layer.g_tt_diag = next.tt_diag;
    layer.g_tt = next.tt;
    layer.kl = kl;
    out.layers.push_back(layer);
    state = next;
  }

  if (model.base_kernel == kernels::BaseKernel::Arccos) {
    const ad::Var d_i = ad::diag(state.ii);
    out.top_ii = ad::arccos(state.ii, d_i, d_i);
    out.top_ti = ad::arccos(state.ti, state.tt_diag, d_i);
  } else {
    out.top_ii = state.ii;
    out.top_ti = state.ti;
  }
  out.top_h = ad::cholesky(out.top_ii);
  out.top_q = ad::tri_solve(out.top_h, out.top_ti, Side::Right, true);
  return out;
}

KernelStack sparse_forward(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme) {
  ad::Tape tape;
  const TapeParams params = bind_params(tape, model, false);
  const InputBlocks inputs = make_input_blocks(model, x_t, scheme);
  const TapeForward fwd = forward(tape, model, params, inputs, scheme);
  KernelStack stack;
  for (const auto& layer : fwd.layers) {
    LayerKernels lk;
    lk.k.ii = layer.k_ii.value();
    lk.k.ti = layer.k_ti.value();
    if (layer.k_tt.valid()) {
      lk.k.tt = layer.k_tt.value();
      lk.k.tt_diag = lk.k.tt->diagonal();
    }
    lk.g.ii = layer.g_ii.value();
    lk.g.ti = layer.g_ti.value();
    lk.g.tt_diag = layer.g_tt_diag.value().col(0);
    if (layer.g_tt.valid()) lk.g.tt = layer.g_tt.value();
    lk.kl = layer.kl.scalar();
    stack.layers.push_back(std::move(lk));
  }
  const kernels::BlockGram& last = stack.layers.back().g;
  stack.top = kernels::apply_kernel(model.base_kernel, last);
  return stack;
}

HeadTerms head_terms(ad::Var q, ad::Var mu, ad::Var sigma_chol, const Targets& targets, int mc_samples,
                     std::uint64_t seed, std::uint64_t stream_offset) {
  ad::Tape& tape = *q.tape();
  if (mc_samples < 1) fail(ErrorCode::ConfigError, "mc_samples must be positive");
  if (targets.rows.size() != targets.labels.size()) fail(ErrorCode::SchemaError, "rows and labels differ in length");
  const Matrix& s = sigma_chol.value();
  if ((s.diagonal().array() <= 0.0).any() || !s.allFinite()) {
    fail(ErrorCode::DegenerateSigma, "head covariance factor has a non-positive diagonal");
  }
  const Index pi = mu.rows();
  const Index c = mu.cols();
  const bool graph_task = targets.task == Task::Graph;
  // Node tasks only need the target rows of q.
  const ad::Var q_used = graph_task ? q : ad::gather_rows(q, targets.rows);
  const ad::Var qmu = ad::matmul(q_used, mu);
  const ad::Var qs = ad::matmul(q_used, sigma_chol);
  ad::Var acc = tape.scalar_constant(0.0);
  for (int m = 0; m < mc_samples; ++m) {
    Rng rng(seed, Stream::MonteCarlo, stream_offset + static_cast<std::uint64_t>(m));
    const ad::Var e = tape.constant(rng.normal_matrix(pi, c));
    ad::Var logits = ad::add(qmu, ad::matmul(qs, e));
    if (graph_task) logits = ad::gather_rows(ad::sparse_left(targets.pool, logits), targets.rows);
    acc = ad::add(acc, ad::softmax_loglik(logits, targets.labels));
  }
  HeadTerms out;
  out.expected_loglik = ad::scale(acc, 1.0 / static_cast<double>(mc_samples));
  // sum_c KL(N(mu_c, S S^T) || N(0, I))
  ad::Var per_column = ad::sub(ad::frobenius_sq(sigma_chol), ad::scale(ad::sum_log_diag(sigma_chol), 2.0));
  per_column = ad::add(per_column, tape.scalar_constant(-static_cast<double>(pi)));
  out.weight_kl = ad::scale(ad::add(ad::scale(per_column, static_cast<double>(c)), ad::frobenius_sq(mu)), 0.5);
  return out;
}

HeadLikelihood head_log_likelihood(const kernels::BlockGram& kernel_top, const VariationalHead& head,
                                   const Targets& targets, std::uint64_t seed) {
  ad::Tape tape;
  const ad::Var h = ad::cholesky(tape.constant(kernel_top.ii));
  const ad::Var q = ad::tri_solve(h, tape.constant(kernel_top.ti), Side::Right, true);
  const HeadTerms terms = head_terms(q, tape.constant(head.mu), tape.constant(head.sigma_chol), targets,
                                     head.mc_samples, seed, 0);
  return HeadLikelihood{terms.expected_loglik.scalar(), terms.weight_kl.scalar()};
}

ObjectiveTerms sparse_objective(ad::Tape& tape, const DkmModel& model, const TapeParams& params,
                                const InputBlocks& inputs, const InducingScheme& scheme,
                                const Targets& targets, std::uint64_t seed, std::uint64_t stream_offset) {
  ObjectiveTerms out;
  out.forward = forward(tape, model, params, inputs, scheme);
  const HeadTerms head = head_terms(out.forward.top_q, params.mu, params.sigma_chol, targets,
                                    model.head.mc_samples, seed, stream_offset);
  out.expected_loglik = head.expected_loglik;
  out.weight_kl = head.weight_kl;
  ad::Var total = ad::sub(head.expected_loglik, head.weight_kl);
  for (int l = 0; l < model.depth; ++l) {
    const auto k = static_cast<std::size_t>(l);
    out.layer_kl.push_back(out.forward.layers[k].kl);
    const double nu = model.nu[k];
    if (model.frozen(l) || nu == 0.0) continue;
    total = ad::sub(total, ad::scale(out.forward.layers[k].kl, nu));
  }
  out.total = total;
  return out;
}

ObjectiveValue sparse_objective(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme,
                                const Targets& targets, std::uint64_t seed) {
  ad::Tape tape;
  const TapeParams params = bind_params(tape, model, false);
  const InputBlocks inputs = make_input_blocks(model, x_t, scheme);
  const ObjectiveTerms terms = sparse_objective(tape, model, params, inputs, scheme, targets, seed);
  ObjectiveValue v;
  v.total = terms.total.scalar();
  v.expected_loglik = terms.expected_loglik.scalar();
  v.weight_kl = terms.weight_kl.scalar();
  for (const auto& kl : terms.layer_kl) v.layer_kl.push_back(kl.scalar());
  return v;
}

Matrix top_features(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme) {
  ad::Tape tape;
  const TapeParams params = bind_params(tape, model, false);
  const InputBlocks inputs = make_input_blocks(model, x_t, scheme);
  return forward(tape, model, params, inputs, scheme).top_q.value();
}

Matrix predict_proba(const DkmModel& model, const Matrix& x_t, const InducingScheme& scheme, int mc_samples,
                     std::uint64_t seed, const SparseMatrix& pool) {
  if (mc_samples < 1) fail(ErrorCode::ConfigError, "mc_samples must be positive");
  const Matrix q = top_features(model, x_t, scheme);
  const Index pi = model.num_inducing();
  const Index c = model.num_classes();
  const Matrix qmu = q * model.head.mu;
  const Matrix qs = q * model.head.sigma_chol;
  const bool pooled = pool.rows() > 0;
  Matrix probs = Matrix::Zero(pooled ? pool.rows() : q.rows(), c);
  // Evaluation draws use a disjoint block of the Monte-Carlo stream.
  constexpr std::uint64_t kEvalOffset = std::uint64_t{1} << 40;
  for (int m = 0; m < mc_samples; ++m) {
    Rng rng(seed, Stream::MonteCarlo, kEvalOffset + static_cast<std::uint64_t>(m));
    Matrix logits = qmu + qs * rng.normal_matrix(pi, c);
    if (pooled) logits = pool * logits;
    for (Index r = 0; r < logits.rows(); ++r) {
      const double mx = logits.row(r).maxCoeff();
      Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
      probs.row(r) += e / e.sum();
    }
  }
  return probs / static_cast<double>(mc_samples);
}

}  // namespace gdkm::dkm
