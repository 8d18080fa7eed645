// SPDX-License-Identifier: Apache-2.0
#include "checks.hpp"

#include "gdkm/kernels.hpp"

namespace gdkm::testing {

namespace {

using ad::Tape;
using ad::Var;
using Vars = std::span<const Var>;

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed, Stream::Features, 7);
  return rng.normal_matrix(r, c);
}

SparseMatrix random_sparse(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed, Stream::Graph, 3);
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) {
      if (rng.bernoulli(0.4)) t.emplace_back(i, j, rng.normal());
    }
  }
  SparseMatrix s(r, c);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

}  // namespace

std::vector<GradCheck> adjoint_checks(int directions) {
  std::vector<GradCheck> out;
  const auto run = [&](const std::string& name, const std::function<Var(Tape&, Vars)>& op, std::vector<Matrix> x,
                       std::vector<Shape> shapes) {
    out.push_back(check_gradient(name, probe(op), x, shapes, directions));
  };
  const auto any = [](std::size_t n) { return std::vector<Shape>(n, Shape::Any); };
  const Matrix a = random_matrix(4, 3, 1), b = random_matrix(4, 3, 2), c = random_matrix(3, 5, 3);
  const Matrix s = Matrix::Constant(1, 1, 0.7);

  run("add", [](Tape&, Vars v) { return ad::add(v[0], v[1]); }, {a, b}, any(2));
  run("sub", [](Tape&, Vars v) { return ad::sub(v[0], v[1]); }, {a, b}, any(2));
  run("scale", [](Tape&, Vars v) { return ad::scale(v[0], -1.5); }, {a}, any(1));
  run("scale_by", [](Tape&, Vars v) { return ad::scale_by(v[0], v[1]); }, {a, s}, any(2));
  run("add_scalar", [](Tape&, Vars v) { return ad::add_scalar(v[0], v[1]); }, {a, s}, any(2));
  run("fill", [](Tape&, Vars v) { return ad::fill(v[0], 3, 2); }, {s}, any(1));
  run("hcat", [](Tape&, Vars v) { return ad::hcat(v[0], v[1]); }, {a, random_matrix(4, 2, 4)}, any(2));
  run("vcat", [](Tape&, Vars v) { return ad::vcat(v[0], v[1]); }, {a, random_matrix(2, 3, 5)}, any(2));
  run("transpose", [](Tape&, Vars v) { return ad::transpose(v[0]); }, {a}, any(1));
  run("gather_rows", [](Tape&, Vars v) {
    const std::vector<Index> rows{2, 0, 2};
    return ad::gather_rows(v[0], rows);
  }, {a}, any(1));
  run("gather_cols", [](Tape&, Vars v) {
    const std::vector<Index> cols{1, 1, 0};
    return ad::gather_cols(v[0], cols);
  }, {a}, any(1));
  run("matmul", [](Tape&, Vars v) { return ad::matmul(v[0], v[1]); }, {a, c}, any(2));
  const SparseMatrix sl = random_sparse(5, 4, 6), sr = random_sparse(3, 6, 7);
  run("sparse_left", [sl](Tape&, Vars v) { return ad::sparse_left(sl, v[0]); }, {a}, any(1));
  run("sparse_right", [sr](Tape&, Vars v) { return ad::sparse_right(v[0], sr); }, {a}, any(1));

  const Matrix spd = random_spd(5, 8);
  run("cholesky", [](Tape&, Vars v) { return ad::cholesky(v[0]); }, {spd}, {Shape::Symmetric});
  const Matrix h = random_lower(4, 9);
  const Matrix rhs_left = random_matrix(4, 3, 10), rhs_right = random_matrix(3, 4, 11);
  for (const bool t : {false, true}) {
    const std::string tag = t ? "_transposed" : "";
    run("tri_solve_left" + tag, [t](Tape&, Vars v) { return ad::tri_solve(v[0], v[1], numerics::Side::Left, t); },
        {h, rhs_left}, {Shape::Lower, Shape::Any});
    run("tri_solve_right" + tag, [t](Tape&, Vars v) { return ad::tri_solve(v[0], v[1], numerics::Side::Right, t); },
        {h, rhs_right}, {Shape::Lower, Shape::Any});
  }

  const Matrix full = random_spd(6, 12, 0.2);
  const Matrix cross = full.bottomLeftCorner(4, 2);
  const Vector d_row = full.diagonal().tail(4), d_col = full.diagonal().head(2);
  run("arccos", [](Tape&, Vars v) { return ad::arccos(v[0], v[1], v[2]); }, {cross, d_row, d_col}, any(3));
  run("arccos_square", [](Tape&, Vars v) {
    const Var d = ad::diag(v[0]);
    return ad::arccos(v[0], d, d);
  }, {full}, {Shape::Symmetric});
  run("diag", [](Tape&, Vars v) { return ad::diag(v[0]); }, {spd}, any(1));
  run("row_sq_norms", [](Tape&, Vars v) { return ad::row_sq_norms(v[0]); }, {a}, any(1));
  run("center", [](Tape&, Vars v) { return ad::center(v[0]); }, {a}, any(1));
  run("trace", [](Tape&, Vars v) { return ad::trace(v[0]); }, {spd}, any(1));
  run("sum", [](Tape&, Vars v) { return ad::sum(v[0]); }, {a}, any(1));
  run("sum_log_diag", [](Tape&, Vars v) { return ad::sum_log_diag(v[0]); }, {h}, any(1));
  run("frobenius_sq", [](Tape&, Vars v) { return ad::frobenius_sq(v[0]); }, {a}, any(1));
  run("inner", [](Tape&, Vars v) { return ad::inner(v[0], v[1]); }, {a, b}, any(2));
  run("softmax_loglik", [](Tape&, Vars v) {
    const std::vector<int> labels{2, 0, 1, 2};
    return ad::softmax_loglik(v[0], labels);
  }, {a}, any(1));
  run("kl_gaussian", [](Tape&, Vars v) { return dkm::kl_gaussian(v[0], v[1]); }, {random_spd(4, 13), random_spd(4, 14)},
      {Shape::Symmetric, Shape::Symmetric});
  return out;
}

SparseInstance sparse_instance(Index nodes, Index inducing, int depth, dkm::SchemeKind scheme_kind,
                               kernels::BaseKernel kernel, dkm::GttMode gtt, bool centered, std::uint64_t seed,
                               Index features) {
  SparseInstance inst;
  Rng rng(seed, Stream::Features);
  inst.x = rng.normal_matrix(nodes, features);
  const auto edges = graph::erdos_renyi(nodes, 0.4, seed);
  const auto a = graph::normalize_kipf(edges);
  inst.scheme = dkm::make_scheme(scheme_kind, a, dkm::sample_inducing_nodes(nodes, inducing, seed));

  dkm::ModelShape shape;
  shape.depth = depth;
  shape.nu = std::vector<double>(static_cast<std::size_t>(depth), 1.0);
  shape.base_kernel = kernel;
  shape.gtt_mode = gtt;
  shape.input_scale = 1.0 / static_cast<double>(features);
  shape.num_classes = 3;
  shape.centering = {centered, centered, 1.0, 0.0};
  Matrix xi(inducing, features);
  for (Index k = 0; k < inducing; ++k) xi.row(k) = inst.x.row(inst.scheme.nodes[static_cast<std::size_t>(k)]);
  inst.model = dkm::init_model(shape, xi);

  Rng prng(seed, Stream::Init, 1);
  for (auto& l : inst.model.layer_params) {
    l = Matrix::Identity(inducing, inducing) + 0.3 * Matrix(prng.normal_matrix(inducing, inducing).triangularView<Eigen::Lower>());
    for (Index j = 0; j < inducing; ++j) l(j, j) = 0.5 + std::abs(l(j, j));
  }
  for (auto& c : inst.model.centering) {
    if (c.enabled) {
      c.gamma = 1.3;
      c.beta = 0.4;
    }
  }
  inst.model.head.mu = prng.normal_matrix(inducing, 3);
  inst.model.head.sigma_chol = random_lower(inducing, seed + 1) * 0.5;
  inst.model.head.mc_samples = 2;

  inst.targets.task = dkm::Task::Node;
  for (Index r = 0; r < nodes; ++r) {
    inst.targets.rows.push_back(r);
    inst.targets.labels.push_back(static_cast<int>(r % 3));
  }
  return inst;
}

GradCheck check_sparse_objective(const SparseInstance& inst, const std::string& name, int directions) {
  const auto& model = inst.model;
  const dkm::InputBlocks inputs = dkm::make_input_blocks(model, inst.x, inst.scheme);

  // Order: unfrozen layer params, mu, sigma_chol, then learnable gamma/beta.
  std::vector<Matrix> x;
  std::vector<Shape> shapes;
  for (int l = 0; l < model.depth; ++l) {
    if (!model.frozen(l)) {
      x.push_back(model.layer_params[static_cast<std::size_t>(l)]);
      shapes.push_back(Shape::Lower);
    }
  }
  x.push_back(model.head.mu);
  shapes.push_back(Shape::Any);
  x.push_back(model.head.sigma_chol);
  shapes.push_back(Shape::Lower);
  for (const auto& c : model.centering) {
    if (c.enabled && c.learn_affine) {
      x.push_back(Matrix::Constant(1, 1, c.gamma));
      x.push_back(Matrix::Constant(1, 1, c.beta));
      shapes.push_back(Shape::Any);
      shapes.push_back(Shape::Any);
    }
  }

  const train::TapeObjective f = [&](ad::Tape& tape, std::span<const ad::Var> v) {
    dkm::TapeParams p = dkm::bind_params(tape, model, false);
    std::size_t k = 0;
    for (int l = 0; l < model.depth; ++l) {
      if (!model.frozen(l)) p.layer[static_cast<std::size_t>(l)] = v[k++];
    }
    p.mu = v[k++];
    p.sigma_chol = v[k++];
    for (std::size_t l = 0; l < model.centering.size(); ++l) {
      if (model.centering[l].enabled && model.centering[l].learn_affine) {
        p.gamma[l] = v[k++];
        p.beta[l] = v[k++];
      }
    }
    return dkm::sparse_objective(tape, model, p, inputs, inst.scheme, inst.targets, 5).total;
  };
  return check_gradient(name, f, x, shapes, directions);
}

}  // namespace gdkm::testing
