#include "compositeflow/linear_map.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>

#include "compositeflow/csv.hpp"
#include "compositeflow/errors.hpp"
#include "compositeflow/rng.hpp"

namespace compositeflow {

namespace {
constexpr double kSurjectivityCutoff = 1e-10;  // relative to ||A^T A||
}

LinearMap::LinearMap(Matrix a, std::uint64_t seed) : mat_(std::move(a)), seed_(seed) {
  if (mat_.rows() == 0 || mat_.cols() == 0) {
    throw UsageError("LinearMap: matrix must be nonempty");
  }
  gram_norm_ = gram_norm(1e-13, 20000);
  op_norm_ = std::sqrt(gram_norm_);

  const Matrix gram_adjoint = mat_ * mat_.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram_adjoint, Eigen::EigenvaluesOnly);
  min_eig_gram_adjoint_ = eig.eigenvalues().minCoeff();
  surjective_ = min_eig_gram_adjoint_ > kSurjectivityCutoff * gram_norm_;
  if (surjective_) {
    gram_adjoint_llt_.compute(gram_adjoint);
    if (gram_adjoint_llt_.info() != Eigen::Success) {
      surjective_ = false;
    }
  }
}

Vector LinearMap::apply(const Vector& x) const {
  if (x.size() != mat_.cols()) {
    throw UsageError("apply: vector length " + std::to_string(x.size()) +
                     " does not match operator columns " + std::to_string(mat_.cols()));
  }
  return mat_ * x;
}

Vector LinearMap::apply_adjoint(const Vector& y) const {
  if (y.size() != mat_.rows()) {
    throw UsageError("apply_adjoint: vector length " + std::to_string(y.size()) +
                     " does not match operator rows " + std::to_string(mat_.rows()));
  }
  return mat_.transpose() * y;
}

double LinearMap::gram_norm(double tol, int max_iter) const {
  if (tol <= 0) throw UsageError("gram_norm: tol must be positive");
  RandomStream stream(seed_, StreamPurpose::kPowerIteration, 0);
  Vector v = stream.normal_vector(mat_.cols());
  const double v_norm = v.norm();
  if (v_norm == 0) throw NumericalError("gram_norm: degenerate start vector");
  v /= v_norm;

  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = mat_.transpose() * (mat_ * v);
    const double next = v.dot(w);
    const double w_norm = w.norm();
    if (w_norm == 0) return 0.0;  // A annihilates the start vector: zero map
    v = w / w_norm;
    if (it > 0 && std::abs(next - estimate) <= tol * std::abs(next)) {
      return next;
    }
    estimate = next;
  }
  throw NumericalError("gram_norm: power iteration did not converge within " +
                           std::to_string(max_iter) + " iterations",
                       estimate);
}

Vector LinearMap::pinv_apply(const Vector& r) const {
  if (r.size() != mat_.rows()) {
    throw UsageError("pinv_apply: vector length does not match operator rows");
  }
  if (!surjective_) {
    throw SurjectivityError("pinv_apply: A A^T is numerically singular (lambda_min = " +
                            std::to_string(min_eig_gram_adjoint_) + ")");
  }
  return mat_.transpose() * gram_adjoint_llt_.solve(r);
}

double LinearMap::condition_number() const {
  if (!surjective_) {
    throw SurjectivityError("condition_number: operator is not surjective");
  }
  return std::sqrt(gram_norm_ / min_eig_gram_adjoint_);
}

LinearMap LinearMap::identity(Eigen::Index n) {
  return LinearMap(Matrix::Identity(n, n));
}

LinearMap LinearMap::from_csv(const std::string& path, std::uint64_t seed) {
  return LinearMap(read_matrix_csv(path), seed);
}

}  // namespace compositeflow
