#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "compositeflow/csv.hpp"
#include "compositeflow/errors.hpp"
#include "compositeflow/linear_map.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using compositeflow::LinearMap;
using compositeflow::Matrix;
using compositeflow::Vector;
using test_helpers::random_matrix;
using test_helpers::random_vector;

TEST_CASE("apply: identity and diagonal cases") {
  const LinearMap id = LinearMap::identity(2);
  Vector x(2);
  x << 3, -1;
  CHECK(id.apply(x) == x);

  Matrix d(2, 2);
  d << 3, 0, 0, 1;
  const LinearMap diag(d);
  Vector ones = Vector::Ones(2);
  const Vector out = diag.apply(ones);
  CHECK(out[0] == 3.0);
  CHECK(out[1] == 1.0);
}

TEST_CASE("apply matches the double-loop matvec oracle") {
  const Matrix a = random_matrix(3, 2, 11);
  const LinearMap map(a);
  for (unsigned s = 0; s < 20; ++s) {
    const Vector x = random_vector(2, 100 + s);
    CHECK((map.apply(x) - oracles::naive_matvec(a, x)).norm() <= 1e-14);
  }
}

TEST_CASE("apply rejects mismatched dimensions") {
  const LinearMap id = LinearMap::identity(2);
  CHECK_THROWS_AS(id.apply(Vector::Zero(3)), compositeflow::UsageError);
  CHECK_THROWS_AS(id.apply_adjoint(Vector::Zero(5)), compositeflow::UsageError);
}

TEST_CASE("adjoint identity <Ax, y> = <x, A^T y> on random pairs") {
  const Matrix a = random_matrix(4, 6, 3);
  const LinearMap map(a);
  for (unsigned s = 0; s < 50; ++s) {
    const Vector x = random_vector(6, 200 + s);
    const Vector y = random_vector(4, 300 + s);
    const double lhs = map.apply(x).dot(y);
    const double rhs = x.dot(map.apply_adjoint(y));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(lhs)));
  }
}

TEST_CASE("gram_norm: identity and diagonal") {
  CHECK(LinearMap::identity(2).gram_norm() == doctest::Approx(1.0).epsilon(1e-12));
  Matrix d(2, 2);
  d << 3, 0, 0, 1;
  CHECK(LinearMap(d).gram_norm() == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("gram_norm matches the Jacobi eigenvalue oracle") {
  const Matrix a = random_matrix(5, 4, 17);
  const LinearMap map(a);
  const auto eigs = oracles::jacobi_eigenvalues(a.transpose() * a);
  CHECK(map.gram_norm() == doctest::Approx(eigs.back()).epsilon(1e-6));
}

TEST_CASE("gram_norm dominates Rayleigh quotients") {
  const Matrix a = random_matrix(6, 5, 23);
  const LinearMap map(a);
  const double gram = map.gram_norm();
  for (unsigned s = 0; s < 100; ++s) {
    const Vector x = random_vector(5, 400 + s);
    const double rayleigh = map.apply(x).squaredNorm() / x.squaredNorm();
    CHECK(gram * (1 + 1e-9) >= rayleigh);
  }
}

TEST_CASE("gram_norm rejects nonpositive tolerance") {
  CHECK_THROWS_AS(LinearMap::identity(2).gram_norm(0.0, 10), compositeflow::UsageError);
}

TEST_CASE("gram_norm non-convergence carries the last estimate") {
  Matrix d(2, 2);
  d << 2, 0, 0, 1.99;  // nearly degenerate leading pair: slow power iteration
  const LinearMap map(d);
  try {
    map.gram_norm(1e-15, 3);
    FAIL("expected NumericalError");
  } catch (const compositeflow::NumericalError& e) {
    CHECK(e.last_estimate > 3.9);  // close to ||A^T A|| = 4 already
    CHECK(e.last_estimate <= 4.0 * (1 + 1e-12));
  }
}

TEST_CASE("min_eig_gram_adjoint: closed-form cases") {
  CHECK(LinearMap::identity(2).min_eig_gram_adjoint() == doctest::Approx(1.0));
  Matrix d(2, 2);
  d << 3, 0, 0, 1;
  CHECK(LinearMap(d).min_eig_gram_adjoint() == doctest::Approx(1.0));
  Matrix row(1, 2);
  row << 3, 4;
  CHECK(LinearMap(row).min_eig_gram_adjoint() == doctest::Approx(25.0));
}

TEST_CASE("min_eig_gram_adjoint lower-bounds Rayleigh quotients of A A^T") {
  const Matrix a = random_matrix(4, 7, 29);
  const LinearMap map(a);
  const double min_eig = map.min_eig_gram_adjoint();
  for (unsigned s = 0; s < 100; ++s) {
    const Vector y = random_vector(4, 500 + s);
    const double rayleigh = map.apply_adjoint(y).squaredNorm() / y.squaredNorm();
    CHECK(min_eig <= rayleigh * (1 + 1e-9));
  }
}

TEST_CASE("surjectivity flag") {
  CHECK(LinearMap(random_matrix(3, 5, 31)).surjective());
  // m > n: A A^T is rank deficient.
  CHECK_FALSE(LinearMap(random_matrix(5, 3, 37)).surjective());
  Matrix with_zero_row = random_matrix(3, 5, 41);
  with_zero_row.row(1).setZero();
  CHECK_FALSE(LinearMap(with_zero_row).surjective());
}

TEST_CASE("pinv_apply: orthonormal rows and diagonal") {
  Matrix q(2, 3);
  q << 1, 0, 0, 0, 1, 0;
  const LinearMap map(q);
  const Vector r = random_vector(2, 43);
  CHECK((map.pinv_apply(r) - map.apply_adjoint(r)).norm() <= 1e-12);

  Matrix d(2, 2);
  d << 3, 0, 0, 1;
  Vector rhs(2);
  rhs << 3, 1;
  const Vector v = LinearMap(d).pinv_apply(rhs);
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pinv_apply is a right inverse") {
  const LinearMap map(random_matrix(3, 5, 47));
  for (unsigned s = 0; s < 20; ++s) {
    const Vector r = random_vector(3, 600 + s);
    const Vector v = map.pinv_apply(r);
    CHECK((map.apply(v) - r).norm() <= 1e-8 * (1 + r.norm()));
  }
}

TEST_CASE("pinv_apply rejects non-surjective operators") {
  const LinearMap tall(random_matrix(5, 3, 53));
  CHECK_THROWS_AS(tall.pinv_apply(Vector::Zero(5)), compositeflow::SurjectivityError);
  CHECK_THROWS_AS(tall.condition_number(), compositeflow::SurjectivityError);
}

TEST_CASE("condition_number: closed-form and oracle cases") {
  CHECK(LinearMap::identity(3).condition_number() == doctest::Approx(1.0));
  Matrix d(2, 2);
  d << 3, 0, 0, 1;
  CHECK(LinearMap(d).condition_number() == doctest::Approx(3.0));

  const Matrix a = random_matrix(4, 6, 59);
  const LinearMap map(a);
  const auto gram_eigs = oracles::jacobi_eigenvalues(a.transpose() * a);
  const auto adjoint_eigs = oracles::jacobi_eigenvalues(a * a.transpose());
  const double expected = std::sqrt(gram_eigs.back() / adjoint_eigs.front());
  CHECK(map.condition_number() == doctest::Approx(expected).epsilon(1e-6));
  CHECK(map.condition_number() >= 1.0);
}

TEST_CASE("matrix CSV round trip and errors") {
  const Matrix a = random_matrix(3, 4, 61);
  const std::string path = "operators_test_matrix.csv";
  compositeflow::write_matrix_csv(path, a);
  const LinearMap loaded = LinearMap::from_csv(path);
  CHECK((loaded.matrix() - a).norm() == 0.0);
  std::remove(path.c_str());

  {
    std::ofstream bad("operators_test_bad.csv");
    bad << "1,2\n3\n";
  }
  CHECK_THROWS_AS(compositeflow::read_matrix_csv("operators_test_bad.csv"),
                  compositeflow::UsageError);
  std::remove("operators_test_bad.csv");
  CHECK_THROWS_AS(compositeflow::read_matrix_csv("operators_missing.csv"),
                  compositeflow::UsageError);
}
