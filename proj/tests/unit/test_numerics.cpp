// SPDX-License-Identifier: Apache-2.0
#include "gdkm/error.hpp"
#include "gdkm/numerics.hpp"

#include "../support/checks.hpp"

#include <doctest.h>

#include <cmath>

using namespace gdkm;
using numerics::LowerTriangular;
using numerics::Side;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

double eig_logdet(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  return es.eigenvalues().array().log().sum();
}

}  // namespace

TEST_CASE("cholesky of the identity needs no jitter") {
  const auto f = numerics::cholesky(Matrix::Identity(3, 3));
  CHECK(max_abs(f.factor.matrix() - Matrix::Identity(3, 3)) == 0.0);
  CHECK(f.jitter == 0.0);
  CHECK(f.level == 0);
}

TEST_CASE("cholesky of a 2x2 matrix") {
  Matrix m(2, 2);
  m << 4, 2, 2, 5;
  Matrix expected(2, 2);
  expected << 2, 0, 1, 2;
  const auto f = numerics::cholesky(m);
  CHECK(max_abs(f.factor.matrix() - expected) < 1e-15);
  CHECK(max_abs(f.factor.matrix() * f.factor.matrix().transpose() - m) < 1e-14);
}

TEST_CASE("cholesky of the zero matrix climbs to the first positive jitter") {
  const auto f = numerics::cholesky(Matrix::Zero(2, 2));
  CHECK(f.level == 1);
  CHECK(f.jitter == doctest::Approx(1e-10));
  CHECK(f.factor(0, 0) == doctest::Approx(std::sqrt(1e-10)));
  CHECK(f.factor(1, 1) == doctest::Approx(std::sqrt(1e-10)));
  CHECK(f.factor(1, 0) == 0.0);
}

TEST_CASE("cholesky rejects matrices no jitter can fix") {
  Matrix m = -Matrix::Identity(3, 3);
  CHECK_THROWS_AS(numerics::cholesky(m), Error);
  try {
    numerics::cholesky(m);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FactorizationFailed);
  }
  CHECK_THROWS_AS(numerics::cholesky(Matrix(2, 3)), Error);
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix m = testing::random_spd(8, s);
    const auto f = numerics::cholesky(m);
    const Matrix back = f.factor.matrix() * f.factor.matrix().transpose();
    const Matrix target = m + f.jitter * Matrix::Identity(8, 8);
    CHECK(numerics::relative_frobenius(back, target) < 1e-9);
  }
}

TEST_CASE("sym_eig examples") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  auto e = numerics::sym_eig(d);
  CHECK(e.values(0) == doctest::Approx(3));
  CHECK(e.values(1) == doctest::Approx(1));
  CHECK(max_abs(e.vectors.cwiseAbs() - Matrix::Identity(2, 2)) < 1e-14);

  e = numerics::sym_eig(Matrix::Identity(2, 2));
  CHECK(e.values(0) == doctest::Approx(1));
  CHECK(e.values(1) == doctest::Approx(1));

  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  e = numerics::sym_eig(m);
  CHECK(e.values(0) == doctest::Approx(3));
  CHECK(e.values(1) == doctest::Approx(1));
}

TEST_CASE("sym_eig returns descending values and sign-fixed orthonormal vectors") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix m = testing::random_spd(7, s);
    const auto e = numerics::sym_eig(m);
    for (Index k = 1; k < e.values.size(); ++k) CHECK(e.values(k - 1) >= e.values(k));
    CHECK(max_abs(e.vectors.transpose() * e.vectors - Matrix::Identity(7, 7)) < 1e-12);
    CHECK(max_abs(e.vectors * e.values.asDiagonal() * e.vectors.transpose() - m) < 1e-12);
    for (Index c = 0; c < 7; ++c) {
      for (Index r = 0; r < 7; ++r) {
        if (std::abs(e.vectors(r, c)) > 1e-14) {
          CHECK(e.vectors(r, c) > 0.0);
          break;
        }
      }
    }
  }
}

TEST_CASE("frac_power examples") {
  CHECK(max_abs(numerics::frac_power(4.0 * Matrix::Identity(2, 2), 0.5) - 2.0 * Matrix::Identity(2, 2)) < 1e-14);
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  CHECK(max_abs(numerics::frac_power(m, 1.0) - m) < 1e-13);
  const Matrix r = numerics::frac_power(m, 0.5);
  CHECK(max_abs(r * r - m) < 1e-10);
  CHECK(max_abs(numerics::frac_power(m, 0.0) - Matrix::Identity(2, 2)) < 1e-14);
}

TEST_CASE("frac_power on a non-symmetric product with a real spectrum") {
  const Matrix a = testing::random_spd(5, 1), b = testing::random_spd(5, 2);
  const Matrix m = a * b.inverse();
  const Matrix r = numerics::frac_power(m, 0.5);
  CHECK(max_abs(r * r - m) < 1e-9);
}

TEST_CASE("frac_power rejects negative spectra and bad exponents") {
  Matrix m = Matrix::Identity(2, 2);
  m(1, 1) = -1.0;
  CHECK_THROWS_AS(numerics::frac_power(m, 0.5), Error);
  CHECK_THROWS_AS(numerics::frac_power(Matrix::Identity(2, 2), 1.5), Error);
}

TEST_CASE("frac_power exponents add") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix m = testing::random_spd(6, s);
    for (const auto& [a, b] : {std::pair{0.2, 0.3}, std::pair{0.5, 0.5}, std::pair{0.1, 0.7}}) {
      const Matrix lhs = numerics::frac_power(m, a) * numerics::frac_power(m, b);
      CHECK(max_abs(lhs - numerics::frac_power(m, a + b)) < 1e-8);
    }
  }
}

TEST_CASE("tri_solve examples") {
  const Matrix b = testing::random_spd(3, 4);
  const auto id = LowerTriangular::identity(3);
  for (const auto side : {Side::Left, Side::Right}) {
    for (const bool t : {false, true}) CHECK(max_abs(numerics::tri_solve(id, b, side, t) - b) == 0.0);
  }
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 4;
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 0.5;
  expected(1, 1) = 0.25;
  CHECK(max_abs(numerics::tri_solve(LowerTriangular(d), Matrix::Identity(2, 2), Side::Left, false) - expected) < 1e-15);
}

TEST_CASE("tri_solve round-trips on every side and transpose") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const LowerTriangular h(testing::random_lower(5, s));
    const Matrix& hm = h.matrix();
    const Matrix b = testing::random_spd(5, s + 100) - Matrix::Identity(5, 5);
    CHECK(max_abs(hm * numerics::tri_solve(h, b, Side::Left, false) - b) < 1e-10);
    CHECK(max_abs(hm.transpose() * numerics::tri_solve(h, b, Side::Left, true) - b) < 1e-10);
    CHECK(max_abs(numerics::tri_solve(h, b, Side::Right, false) * hm - b) < 1e-10);
    CHECK(max_abs(numerics::tri_solve(h, b, Side::Right, true) * hm.transpose() - b) < 1e-10);
  }
}

TEST_CASE("tri_solve with a zero diagonal throws") {
  Matrix h = Matrix::Identity(2, 2);
  h(1, 1) = 0.0;
  CHECK_THROWS_AS(numerics::tri_solve(LowerTriangular(h), Matrix::Identity(2, 2), Side::Left, false), Error);
}

TEST_CASE("lower-triangular wrapper rejects entries above the diagonal") {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(LowerTriangular{m}, Error);
}

TEST_CASE("logdet_from_chol examples") {
  CHECK(numerics::logdet_from_chol(LowerTriangular::identity(4)) == 0.0);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 3;
  CHECK(numerics::logdet_from_chol(LowerTriangular(d)) == doctest::Approx(3.58351893845611).epsilon(1e-12));
}

TEST_CASE("logdet_from_chol agrees with eigenvalues") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix m = testing::random_spd(9, s);
    const double chol = numerics::logdet_from_chol(numerics::cholesky(m).factor);
    CHECK(std::abs(chol - eig_logdet(m)) < 1e-8);
  }
}

TEST_CASE("symmetry helpers") {
  Matrix m(2, 2);
  m << 1, 2, 2.5, 1;
  CHECK_FALSE(numerics::is_symmetric(m));
  CHECK(numerics::is_symmetric(numerics::symmetrize(m)));
  CHECK_THROWS_AS(numerics::require_symmetric(m, "m"), Error);
  CHECK(numerics::relative_frobenius(m, m) == 0.0);
}
