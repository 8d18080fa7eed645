// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per criterion. `--only AC3` runs a
// single criterion; the exit status is non-zero if any selected one fails.
#include "gdkm/dataio.hpp"
#include "gdkm/dkm.hpp"
#include "gdkm/error.hpp"
#include "gdkm/experiment.hpp"
#include "gdkm/kernels.hpp"
#include "gdkm/linear.hpp"
#include "gdkm/nngp.hpp"
#include "gdkm/rng.hpp"
#include "gdkm/synth.hpp"

#include "../support/checks.hpp"

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace gdkm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double min_eig(const Matrix& m) { return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff(); }

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Closed form vs Adam on the lower-triangular factors, 100-node ER graph.
Outcome ac1() {
  const auto d = synth::er_two_class(100, 0.1, 200, 0);
  linear::DemoOptions o;
  o.run_gd = true;
  o.gd.lr = 0.03;
  o.gd.epochs = 25000;
  const auto r = linear::linear_demo(d.features, d.edges, d.labels, 0.5, o);
  const double gap = std::abs(r.analytic_objective - r.gd_objective);
  return {r.gd_max_abs < 1e-3 && gap < 1e-3,
          fmt("max|normalized G_gd - G_closed| = %.3g (< 1e-3), objective gap = %.3g (< 1e-3), epochs %d lr %g",
              r.gd_max_abs, gap, o.gd.epochs, o.gd.lr)};
}

double stationarity(Index n, double lambda, std::uint64_t seed) {
  const auto d = synth::er_two_class(n, 0.1, 2 * n, seed);
  const Matrix g0 = d.features * d.features.transpose() / static_cast<double>(d.features.cols());
  const Matrix a = graph::interpolate_lambda(graph::normalize_kipf(d.edges), lambda).dense();
  Matrix y = Matrix::Zero(n, 2);
  for (Index i = 0; i < n; ++i) y(i, d.labels[static_cast<std::size_t>(i)]) = 1.0;
  const Matrix g_out = linear::label_gram(y, 0.1);
  const auto g = linear::linear_closed_form_all(g0, g_out, a, 2);
  double worst = 0.0;
  for (const auto& grad : linear::linear_objective_grad(g, g0, g_out, a)) worst = std::max(worst, max_abs(grad));
  return worst;
}

// Gradient of the full-rank linear objective at the closed form, on the
// seeded ER family of the first criterion (p = 0.1, 2P feature columns).
// Below lambda = 1/2 the interpolated adjacency can be nearly singular; that
// range is reported but not judged.
Outcome ac2() {
  double worst = 0.0, low = 0.0;
  int instances = 0;
  for (const Index n : {20, 50, 100}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      for (const double lambda : {0.5, 0.75, 1.0}) {
        worst = std::max(worst, stationarity(n, lambda, seed));
        ++instances;
      }
      for (const double lambda : {0.1, 0.3}) low = std::max(low, stationarity(n, lambda, seed));
    }
  }
  return {worst < 1e-6, fmt("max |grad| = %.3g (< 1e-6) over %d instances with P <= 100, lambda in {0.5, 0.75, 1}; "
                            "lambda in {0.1, 0.3}: %.3g (not judged)",
                            worst, instances, low)};
}

// Sparse forward at L = I against the blockwise NNGP recursion.
Outcome ac3() {
  using dkm::SchemeKind;
  using kernels::BaseKernel;
  double worst = 0.0;
  int runs = 0;
  for (const auto scheme : {SchemeKind::Inter, SchemeKind::Intra}) {
    for (const auto kernel : {BaseKernel::Arccos, BaseKernel::Linear}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        // 12 feature columns keep K_ii full rank for the linear kernel.
        auto inst = testing::sparse_instance(30, 10, 3, scheme, kernel, dkm::GttMode::Exact, false, seed, 12);
        for (auto& l : inst.model.layer_params) l = Matrix::Identity(10, 10);
        const auto stack = dkm::sparse_forward(inst.model, inst.x, inst.scheme);
        const nngp::NngpConfig cfg{3, kernel, {}, inst.model.input_scale};
        const auto ref = nngp::nngp_forward_sparse(inst.model.inducing_inputs, inst.x, cfg, inst.scheme.adjacency);
        for (std::size_t l = 0; l < ref.size(); ++l) {
          const auto& g = stack.layers[l].g;
          worst = std::max({worst, max_abs(g.ii - ref[l].ii), max_abs(g.ti - ref[l].ti),
                            max_abs(*g.tt - *ref[l].tt)});
        }
        ++runs;
      }
    }
  }
  return {worst < 1e-10, fmt("max blockwise difference = %.3g (< 1e-10) over %d random 30-node instances", worst, runs)};
}

// Finite-difference checks of every adjoint and of the sparse objective.
Outcome ac4() {
  using dkm::GttMode;
  using dkm::SchemeKind;
  using kernels::BaseKernel;
  std::vector<testing::GradCheck> checks = testing::adjoint_checks(20);
  struct Case {
    const char* name;
    SchemeKind scheme;
    BaseKernel kernel;
    GttMode gtt;
    bool centered;
  };
  const Case cases[] = {
      {"objective/inter/arccos/nystrom", SchemeKind::Inter, BaseKernel::Arccos, GttMode::Nystrom, false},
      {"objective/intra/arccos/nystrom", SchemeKind::Intra, BaseKernel::Arccos, GttMode::Nystrom, false},
      {"objective/inter/linear/exact", SchemeKind::Inter, BaseKernel::Linear, GttMode::Exact, false},
      {"objective/intra/arccos/exact", SchemeKind::Intra, BaseKernel::Arccos, GttMode::Exact, false},
      {"objective/inter/arccos/nystrom/centered", SchemeKind::Inter, BaseKernel::Arccos, GttMode::Nystrom, true},
      {"objective/intra/linear/exact/centered", SchemeKind::Intra, BaseKernel::Linear, GttMode::Exact, true},
  };
  for (const auto& c : cases) {
    const auto inst = testing::sparse_instance(6, 3, 2, c.scheme, c.kernel, c.gtt, c.centered, 11);
    checks.push_back(testing::check_sparse_objective(inst, c.name, 20));
  }
  double worst = 0.0;
  std::string worst_name;
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.ok();
    if (c.worst_rel >= worst) {
      worst = c.worst_rel;
      worst_name = c.name;
    }
  }
  return {ok, fmt("%zu checks x 20 directions, worst relative error %.3g (< 1e-4) in %s", checks.size(), worst,
                  worst_name.c_str())};
}

// 2 sum log L_jj against the eigenvalues of the pencil (G_ii, K_ii).
Outcome ac5() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Index n = 2 + static_cast<Index>(s % 19);
    const Matrix k = testing::random_spd(n, s, 0.1);
    const numerics::LowerTriangular l(testing::random_lower(n, s + 1000));
    const Matrix g = dkm::gram_from_params(l, k);
    double shortcut = 0.0;
    for (Index j = 0; j < n; ++j) shortcut += 2.0 * std::log(l.matrix()(j, j));
    const Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(g, k);
    const double reference = es.eigenvalues().array().log().sum();
    worst = std::max(worst, std::abs(shortcut - reference));
  }
  return {worst < 1e-8, fmt("max |2 sum log L_jj - log det(K^-1 G)| = %.3g (< 1e-8) over 100 instances", worst)};
}

// CKA of the learned top Gram matrix vs the NNGP kernel.
Outcome ac6() {
  const auto d = synth::er_two_class(50, 0.1, 0, 0);
  bool ok = true;
  std::ostringstream detail;
  for (const double lambda : {0.1, 0.3, 0.5, 1.0}) {
    const auto r = linear::linear_demo(d.features, d.edges, d.labels, lambda, {});
    ok = ok && r.dkm_cka > r.nngp_cka;
    detail << fmt("lambda %.1f: dkm %.4f vs nngp %.4f; ", lambda, r.dkm_cka, r.nngp_cka);
  }
  return {ok, detail.str() + "CKA(G^L, YY^T) must be strictly greater for the DKM"};
}

double mean_val_acc(const std::function<dataio::GraphDataset(std::uint64_t)>& make, double nu) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    experiment::RunConfig c;
    c.seed = seed;
    c.nu = {nu};
    c.epochs = 300;
    c.num_inducing = 100;
    c.scheme = "inter";
    c.centering = true;
    c.mc_eval = 20;
    total += experiment::run(make(seed), c).eval.val_acc;
  }
  return total / 3.0;
}

// nu = 1e-2 against nu = 1e3 on heterophilous and homophilous synthetic data.
Outcome ac7() {
  const synth::SplitSizes sizes{40, 200, 0};
  const auto het = [&](std::uint64_t s) { return synth::heterophilous(400, 2, 4, 6.0, s, sizes); };
  const auto hom = [&](std::uint64_t s) { return synth::homophilous(400, 2, 4, 0.1, 0.005, 1.0, s, sizes); };
  const double het_gap = 100.0 * (mean_val_acc(het, 1e-2) - mean_val_acc(het, 1e3));
  const double hom_gap = 100.0 * (mean_val_acc(hom, 1e-2) - mean_val_acc(hom, 1e3));
  return {het_gap >= 5.0 && hom_gap <= 2.0,
          fmt("heterophilous gap %.2f points (>= 5), homophilous gap %.2f points (<= 2), 3 seeds", het_gap, hom_gap)};
}

fs::path cora_dir() {
  if (const char* env = std::getenv("GDKM_CORA_DIR")) return env;
  return fs::path(GDKM_SOURCE_DIR) / "data" / "cora";
}

// Standard Cora split, 2 layers, 300 epochs, best of the two schemes.
Outcome ac8() {
  const fs::path dir = cora_dir();
  if (!fs::exists(dir / "features.csv")) {
    return {false, "Cora not found at " + dir.string() +
                       " (set GDKM_CORA_DIR or convert with tools/planetoid_to_gdkm.py); nothing was run"};
  }
  const auto d = dataio::load_dataset(dir);
  const double h = graph::edge_homophily(d.edges, d.labels);
  double best = 0.0;
  std::ostringstream detail;
  for (const char* scheme : {"inter", "intra"}) {
    experiment::RunConfig c;
    c.dataset = dir.string();
    c.depth = 2;
    c.epochs = 300;
    c.scheme = scheme;
    const auto r = experiment::run(d, c);
    best = std::max(best, r.eval.test_acc);
    detail << fmt("%s test %.4f; ", scheme, r.eval.test_acc);
  }
  return {best >= 0.76 && std::abs(h - 0.81) <= 0.01,
          detail.str() + fmt("best %.4f (>= 0.76), edge homophily %.4f (0.81 +- 0.01)", best, h)};
}

// Invariant suites.
Outcome ac9() {
  std::vector<std::string> failed;
  const auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Index n = 3 + static_cast<Index>(s % 8);
    const Matrix g = testing::random_spd(n, s, 0.05), k = testing::random_spd(n, s + 500, 0.05);
    expect(dkm::kl_gaussian(g, k) >= 0.0, "KL non-negative");
    expect(std::abs(dkm::kl_gaussian(g, g)) < 1e-9, "KL(g, g) = 0");

    const auto a = graph::normalize_kipf(graph::erdos_renyi(n, 0.4, s));
    const double scale = std::max(1.0, max_abs(g));
    expect(min_eig(kernels::arccos_kernel(g)) > -1e-10 * scale, "arccos keeps PSD");
    expect(min_eig(kernels::graph_conv(g, a)) > -1e-10 * scale, "graph_conv keeps PSD");

    const double c = kernels::cka(g, k);
    expect(c >= 0.0 && c <= 1.0 + 1e-12, "CKA in [0, 1]");
    expect(std::abs(kernels::cka(g, g) - 1.0) < 1e-12, "CKA(k, k) = 1");
  }

  // With G_ii = K_ii (L = I) the propagated blocks equal the kernel blocks,
  // and the Nystrom diagonal is exact when the test block has the inducing rank.
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto inst = testing::sparse_instance(12, 4, 2, dkm::SchemeKind::Inter, kernels::BaseKernel::Linear,
                                         dkm::GttMode::Nystrom, false, s);
    for (auto& l : inst.model.layer_params) l = Matrix::Identity(4, 4);
    // Four feature columns and four invertible inducing inputs: rank(X_t) <= P_i.
    Rng rng(s, Stream::Features, 3);
    inst.x = rng.normal_matrix(12, 4);
    inst.model.inducing_inputs = rng.normal_matrix(4, 4);
    const auto nys = dkm::sparse_forward(inst.model, inst.x, inst.scheme);
    auto exact_model = inst.model;
    exact_model.gtt_mode = dkm::GttMode::Exact;
    const auto ex = dkm::sparse_forward(exact_model, inst.x, inst.scheme);
    expect(max_abs(nys.layers[0].g.ti - nys.layers[0].k.ti) < 1e-10, "G_ti = K_ti at L = I");
    expect(max_abs(nys.layers[0].g.ii - nys.layers[0].k.ii) < 1e-10, "G_ii = K_ii at L = I");
    expect(max_abs(nys.layers[0].g.tt_diag - ex.layers[0].g.tt_diag) < 1e-9, "Nystrom diagonal exact at full rank");
  }

  // File formats round-trip bit for bit.
  const fs::path dir = fs::temp_directory_path() / ("gdkm_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const Matrix m = testing::random_spd(7, 3);
  dataio::save_kernel(m, dir / "k.gdkm");
  expect(dataio::load_kernel(dir / "k.gdkm") == m, "kernel file round-trip");
  const auto bg = kernels::BlockGram::from_full(m, 3);
  dataio::save_block_gram(bg, dir / "b.gdkm");
  const auto bg2 = dataio::load_block_gram(dir / "b.gdkm");
  expect(bg2.ii == bg.ii && bg2.ti == bg.ti && bg2.tt_diag == bg.tt_diag && bg2.tt && *bg2.tt == *bg.tt,
         "block gram round-trip");
  const std::vector<Matrix> ms{m, Matrix::Constant(2, 3, -1.5), Matrix(0, 0)};
  dataio::save_matrices(ms, dir / "m.gdkm");
  const auto ms2 = dataio::load_matrices(dir / "m.gdkm");
  expect(ms2.size() == 3 && ms2[0] == ms[0] && ms2[1] == ms[1] && ms2[2].size() == 0, "bundle round-trip");
  const auto ds = synth::homophilous(30, 2, 3, 0.3, 0.05, 1.0, 1, {5, 5, 0});
  dataio::save_dataset(ds, dir / "data");
  const auto ds2 = dataio::load_dataset(dir / "data");
  expect(ds2.features == ds.features && ds2.labels == ds.labels && ds2.edges.edges == ds.edges.edges &&
             ds2.splits[0].train == ds.splits[0].train,
         "dataset round-trip");
  fs::remove_all(dir);

  std::string detail = "KL >= 0, PSD through arccos/graph_conv, CKA range, Nystrom exactness, file round-trips";
  if (!failed.empty()) {
    detail = "violated:";
    for (const auto& f : failed) detail += " [" + f + "]";
  }
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria");
  std::vector<std::string> only;
  app.add_option("--only", only, "criteria to run, e.g. AC1 AC3 (default: all)");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9},
  };
  for (const auto& o : only) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == o; })) {
      std::fprintf(stderr, "unknown criterion %s\n", o.c_str());
      return 2;
    }
  }
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = run();
    } catch (const Error& e) {
      r = {false, std::string("threw ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s %s (%.1f s)\n", name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str(), secs);
    std::fflush(stdout);
    failures += r.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
