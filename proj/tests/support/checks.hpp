// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit tests and the acceptance binary: random
// instances and central-difference gradient checks.
#pragma once

#include "gdkm/autodiff.hpp"
#include "gdkm/dkm.hpp"
#include "gdkm/graph.hpp"
#include "gdkm/rng.hpp"
#include "gdkm/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace gdkm::testing {

inline Matrix random_spd(Index n, std::uint64_t seed, double ridge = 0.5) {
  Rng rng(seed, Stream::Features, 99);
  const Matrix w = rng.normal_matrix(n, n + 2);
  return w * w.transpose() / static_cast<double>(n + 2) + ridge * Matrix::Identity(n, n);
}

inline Matrix random_lower(Index n, std::uint64_t seed) {
  Rng rng(seed, Stream::Init, 99);
  Matrix l = rng.normal_matrix(n, n).triangularView<Eigen::Lower>();
  for (Index j = 0; j < n; ++j) l(j, j) = 0.5 + std::abs(l(j, j));
  return l;
}

/// Shape constraint on a perturbation direction.
enum class Shape { Any, Symmetric, Lower };

inline Matrix shaped(Matrix d, Shape s) {
  if (s == Shape::Symmetric) return 0.5 * (d + d.transpose());
  if (s == Shape::Lower) return d.triangularView<Eigen::Lower>();
  return d;
}

struct GradCheck {
  std::string name;
  double worst_rel = 0.0;
  int directions = 0;
  bool ok() const { return worst_rel < 1e-4; }
};

/// Relative error between a central difference and the tape's directional
/// derivative of `f`, worst case over `directions` random directions.
inline GradCheck check_gradient(const std::string& name, const train::TapeObjective& f,
                                const std::vector<Matrix>& x, const std::vector<Shape>& shapes,
                                int directions = 20, std::uint64_t seed = 7, double h = 1e-5) {
  GradCheck out{name, 0.0, directions};
  const train::GradResult g = train::grad(f, x);
  const auto value = [&](const std::vector<Matrix>& p) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& m : p) vars.push_back(tape.leaf(m));
    return f(tape, vars).scalar();
  };
  for (int k = 0; k < directions; ++k) {
    Rng rng(seed, Stream::MonteCarlo, static_cast<std::uint64_t>(k));
    std::vector<Matrix> d;
    double analytic = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      d.push_back(shaped(rng.normal_matrix(x[i].rows(), x[i].cols()), shapes[i]));
      analytic += (g.grads[i].array() * d.back().array()).sum();
    }
    std::vector<Matrix> plus = x, minus = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      plus[i] += h * d[i];
      minus[i] -= h * d[i];
    }
    const double numeric = (value(plus) - value(minus)) / (2.0 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    out.worst_rel = std::max(out.worst_rel, std::abs(numeric - analytic) / scale);
  }
  return out;
}

/// f(x) = <R, op(x)> for a fixed random R, so every output entry is probed.
inline train::TapeObjective probe(const std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>& op,
                                  std::uint64_t seed = 11) {
  return [op, seed](ad::Tape& tape, std::span<const ad::Var> v) {
    const ad::Var y = op(tape, v);
    Rng rng(seed, Stream::Labels, 5);
    const Matrix r = rng.normal_matrix(y.rows(), y.cols());
    return ad::inner(tape.constant(r), y);
  };
}

/// Gradient checks for every tape primitive and the KL term.
std::vector<GradCheck> adjoint_checks(int directions = 20);

/// Instance for checking the whole sparse objective.
struct SparseInstance {
  dkm::DkmModel model;
  Matrix x;
  dkm::InducingScheme scheme;
  dkm::Targets targets;
};

/// Random graph with `nodes` nodes, `inducing` inducing points and `depth`
/// Gram layers, with all parameters moved away from the NNGP point.
SparseInstance sparse_instance(Index nodes, Index inducing, int depth, dkm::SchemeKind scheme,
                               kernels::BaseKernel kernel, dkm::GttMode gtt, bool centered, std::uint64_t seed,
                               Index features = 4);

/// Central differences on sparse_objective against the tape gradient of
/// every trainable parameter.
GradCheck check_sparse_objective(const SparseInstance& inst, const std::string& name, int directions = 20);

}  // namespace gdkm::testing
