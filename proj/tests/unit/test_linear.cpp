// SPDX-License-Identifier: Apache-2.0
#include "gdkm/error.hpp"
#include "gdkm/kernels.hpp"
#include "gdkm/linear.hpp"
#include "gdkm/synth.hpp"

#include "../support/checks.hpp"

#include <doctest.h>

#include <cmath>

using namespace gdkm;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

struct Toy {
  Matrix a, g0, g_out;
};

// Three-node path, lambda = 0.5; reference values from tools/oracles.py.
Toy toy() {
  Toy t;
  const auto p = graph::normalize_kipf(graph::EdgeList{3, {{0, 1}, {1, 2}}});
  t.a = graph::interpolate_lambda(p, 0.5).dense();
  t.g0.resize(3, 3);
  t.g0 << 1.0, 0.3, 0.1, 0.3, 1.2, -0.2, 0.1, -0.2, 0.9;
  Matrix y(3, 2);
  y << 1, 0, 0, 1, 1, 0;
  t.g_out = linear::label_gram(y, 0.1);
  return t;
}

Toy random_toy(Index n, double lambda, std::uint64_t seed) {
  Toy t;
  const auto d = synth::er_two_class(n, 0.2, 2 * n, seed);
  const Matrix x = d.features;
  t.g0 = x * x.transpose() / static_cast<double>(x.cols());
  t.a = graph::interpolate_lambda(graph::normalize_kipf(d.edges), lambda).dense();
  Matrix y = Matrix::Zero(n, 2);
  for (Index i = 0; i < n; ++i) y(i, d.labels[static_cast<std::size_t>(i)]) = 1.0;
  t.g_out = linear::label_gram(y, 0.1);
  return t;
}

}  // namespace

TEST_CASE("label gram") {
  Matrix y(2, 2);
  y << 1, 0, 0, 1;
  const Matrix g = linear::label_gram(y, 0.1);
  CHECK(g(0, 0) == doctest::Approx(0.6));
  CHECK(g(0, 1) == 0.0);
}

TEST_CASE("closed form boundary layers") {
  const auto t = toy();
  CHECK(max_abs(linear::linear_closed_form(t.g0, t.g_out, t.a, 2, 0) - t.g0) < 1e-10);
  CHECK(max_abs(linear::linear_closed_form(t.g0, t.g_out, t.a, 2, 3) - t.g_out) < 1e-10);
}

TEST_CASE("closed form geodesic midpoint") {
  const Matrix id = Matrix::Identity(3, 3);
  CHECK(max_abs(linear::linear_closed_form(id, 4.0 * id, id, 1, 1) - 2.0 * id) < 1e-12);
}

TEST_CASE("closed form matches reference values") {
  const auto t = toy();
  Matrix g1(3, 3), g2(3, 3);
  g1 << 0.7632574864270271, 0.11787614711134056, 0.3014714383913195, 0.11787614711134056, 0.9638046463748465,
      -0.0564671133845686, 0.3014714383913195, -0.0564671133845686, 0.6656986524996694;
  g2 << 0.62334623923641, 0.032983554538904655, 0.4014112023982095, 0.032983554538904655, 0.7930489200736677,
      -0.01755793887640618, 0.4014112023982095, -0.01755793887640618, 0.5841588759374969;
  const auto all = linear::linear_closed_form_all(t.g0, t.g_out, t.a, 2);
  REQUIRE(all.size() == 2);
  CHECK(max_abs(all[0] - g1) < 1e-12);
  CHECK(max_abs(all[1] - g2) < 1e-12);
  CHECK(linear::linear_objective(all, t.g0, t.g_out, t.a) == doctest::Approx(-4.077212781010743).epsilon(1e-12));
}

TEST_CASE("closed form is a stationary point of the objective") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (double lambda : {0.3, 0.5, 1.0}) {
      const auto t = random_toy(30, lambda, seed);
      const auto g = linear::linear_closed_form_all(t.g0, t.g_out, t.a, 2);
      double worst = 0.0;
      for (const auto& d : linear::linear_objective_grad(g, t.g0, t.g_out, t.a)) worst = std::max(worst, max_abs(d));
      CHECK(worst < 1e-6);
    }
  }
}

TEST_CASE("closed form beats perturbed Gram matrices") {
  const auto t = random_toy(12, 0.5, 4);
  const auto g = linear::linear_closed_form_all(t.g0, t.g_out, t.a, 2);
  const double best = linear::linear_objective(g, t.g0, t.g_out, t.a);
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto moved = g;
    moved[s % 2] += 0.01 * testing::random_spd(12, s, 0.0);
    CHECK(linear::linear_objective(moved, t.g0, t.g_out, t.a) < best);
  }
}

TEST_CASE("closed form rejects a singular adjacency") {
  const auto t = toy();
  CHECK_THROWS_AS(linear::linear_closed_form(t.g0, t.g_out, Matrix::Zero(3, 3), 2, 1), Error);
}

TEST_CASE("wishart samples") {
  const Matrix w = linear::wishart(5, 5, 1);
  CHECK(max_abs(w - w.transpose()) == 0.0);
  CHECK(max_abs(w - linear::wishart(5, 5, 1)) == 0.0);
  Matrix mean = Matrix::Zero(4, 4);
  for (std::uint64_t i = 0; i < 400; ++i) mean += linear::wishart(4, 50, 2, i);
  CHECK(max_abs(mean / 400.0 - Matrix::Identity(4, 4)) < 0.05);
}

TEST_CASE("gradient descent climbs towards the closed form") {
  const auto t = random_toy(10, 0.5, 1);
  linear::GdOptions o;
  o.epochs = 3000;
  o.lr = 0.03;
  o.wishart_dof = 40;  // a dof = n start is nearly singular and needs far more epochs
  const auto r = linear::fit_gradient_descent(t.g0, t.g_out, t.a, 2, o);
  const double analytic = linear::linear_objective(linear::linear_closed_form_all(t.g0, t.g_out, t.a, 2), t.g0,
                                                   t.g_out, t.a);
  REQUIRE(r.objective.size() == 3001);
  CHECK(r.objective.back() > r.objective.front());
  CHECK(r.objective.back() <= analytic + 1e-9);
  CHECK(analytic - r.objective.back() < 1e-3);
  // Past the first tenth of training the ascent is monotone.
  for (std::size_t e = 300; e + 1 < r.objective.size(); ++e) {
    CHECK(r.objective[e + 1] >= r.objective[e] - 1e-9 * std::abs(r.objective[e]));
  }
}

TEST_CASE("linear demo at lambda one") {
  const auto d = synth::er_two_class(20, 0.2, 0, 2);
  const auto r = linear::linear_demo(d.features, d.edges, d.labels, 1.0, {});
  const Matrix g0 = d.features * d.features.transpose() / static_cast<double>(d.features.cols());
  REQUIRE(r.nngp.size() == 2);
  for (const auto& g : r.nngp) CHECK(max_abs(g - g0) < 1e-12);
  CHECK(max_abs(r.dkm[1] - r.nngp[1]) > 1e-3);
  CHECK(r.dkm_cka > r.nngp_cka);
}
