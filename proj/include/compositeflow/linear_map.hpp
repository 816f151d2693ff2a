#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace compositeflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense linear operator with the spectral quantities the algorithms and
/// bounds consume: ||A^T A||, lambda_min(A A^T), the pseudoinverse factor and
/// the condition number. Immutable after construction; all spectral caches
/// are computed eagerly, so concurrent reads are safe.
class LinearMap {
 public:
  /// Wraps the m x n matrix. `seed` deterministically seeds the power
  /// iteration start vector (ties in the dominant eigenspace are broken by
  /// the random start, reproducibly per seed).
  explicit LinearMap(Matrix a, std::uint64_t seed = 0);

  Eigen::Index rows() const { return mat_.rows(); }
  Eigen::Index cols() const { return mat_.cols(); }
  const Matrix& matrix() const { return mat_; }

  /// A x. Throws UsageError on dimension mismatch.
  Vector apply(const Vector& x) const;

  /// A^T y. Throws UsageError on dimension mismatch.
  Vector apply_adjoint(const Vector& y) const;

  /// ||A^T A|| (largest eigenvalue of A^T A) by power iteration, to relative
  /// tolerance tol. Throws NumericalError carrying the last estimate if the
  /// iteration does not settle within max_iter sweeps.
  double gram_norm(double tol, int max_iter) const;

  /// Cached ||A^T A|| from construction time (tol 1e-13).
  double gram_norm() const { return gram_norm_; }

  /// ||A|| = sqrt(||A^T A||).
  double operator_norm() const { return op_norm_; }

  /// lambda_min(A A^T) by dense symmetric eigendecomposition (cached).
  double min_eig_gram_adjoint() const { return min_eig_gram_adjoint_; }

  /// True iff lambda_min(A A^T) exceeds the scale-invariant cutoff
  /// 1e-10 * ||A^T A||.
  bool surjective() const { return surjective_; }

  /// A^T (A A^T)^{-1} r, the minimum-norm solution of A v = r.
  /// Throws SurjectivityError when A A^T is numerically singular.
  Vector pinv_apply(const Vector& r) const;

  /// ||A^T (A A^T)^{-1}|| * ||A|| = sqrt(gram_norm / min_eig_gram_adjoint).
  /// Throws SurjectivityError for non-surjective A.
  double condition_number() const;

  /// Identity operator of size n.
  static LinearMap identity(Eigen::Index n);

  /// Loads a matrix from CSV (one row per line, comma-separated decimal
  /// scalars, no header).
  static LinearMap from_csv(const std::string& path, std::uint64_t seed = 0);

 private:
  Matrix mat_;
  std::uint64_t seed_;
  double gram_norm_ = 0;
  double op_norm_ = 0;
  double min_eig_gram_adjoint_ = 0;
  bool surjective_ = false;
  Eigen::LLT<Matrix> gram_adjoint_llt_;
};

}  // namespace compositeflow
