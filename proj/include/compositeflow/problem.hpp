#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "compositeflow/linear_map.hpp"
#include "compositeflow/regularizer.hpp"

namespace compositeflow {

/// Finite-sum least-squares term f(x) = (1/N) sum_i f_i(x) with
/// f_i(x) = (a_i^T x - b_i)^2 / 2. Rows of `data` are the a_i.
class SmoothSum {
 public:
  SmoothSum(Matrix data, Vector targets);

  Eigen::Index dim() const { return data_.cols(); }
  Eigen::Index count() const { return data_.rows(); }
  const Matrix& data() const { return data_; }
  const Vector& targets() const { return targets_; }

  /// Gradient Lipschitz constant ||D^T D|| / N.
  double lipschitz() const { return lipschitz_; }

  double value(const Vector& x) const;
  Vector grad(const Vector& x) const;

  /// Gradient of the single component f_i.
  Vector grad_component(Eigen::Index i, const Vector& x) const;

 private:
  Matrix data_;
  Vector targets_;
  double lipschitz_;
};

enum class NoiseMode { kExact, kGaussian, kMinibatch };

NoiseMode noise_mode_from_string(const std::string& name);
std::string to_string(NoiseMode mode);

/// Gradient-noise model. Gaussian mode perturbs the full gradient by
/// sigma * zeta with zeta i.i.d. standard normal per coordinate (default
/// sigma 1); minibatch mode subsamples B components without replacement.
/// Streams are keyed by (master_seed, purpose, step_index), so the same
/// (seed, step) always reproduces the same draw.
struct NoiseSpec {
  NoiseMode mode = NoiseMode::kExact;
  double sigma = 1.0;
  Eigen::Index batch = 0;
  std::uint64_t master_seed = 0;

  static NoiseSpec exact();
  static NoiseSpec gaussian(double sigma, std::uint64_t master_seed);
  static NoiseSpec minibatch(Eigen::Index batch, std::uint64_t master_seed);

  NoiseSpec with_seed(std::uint64_t seed) const;
};

/// Result of the box-constrained subgradient distance computation:
/// `achieved` is ||grad f(x) + A^T g*|| (an upper bound on
/// dist(0, partial H(x))); `stationarity` is the projected-gradient norm of
/// the inner solve, certifying optimality of g*.
struct SubgradResidual {
  double achieved;
  double stationarity;
  Vector minimizer;
  bool converged;
};

/// Composite problem H(x) = f(x) + h(Ax) together with the smoothing level
/// mu defining H_mu(x) = f(x) + h_mu(Ax). Immutable after construction;
/// gradient oracles are pure given (x, seed, step_index).
class CompositeProblem {
 public:
  CompositeProblem(SmoothSum f, Regularizer h, LinearMap a, double mu);

  Eigen::Index dim() const { return f_.dim(); }
  Eigen::Index range_dim() const { return a_.rows(); }
  const SmoothSum& smooth() const { return f_; }
  const Regularizer& regularizer() const { return h_; }
  const EnvelopeView& envelope() const { return env_; }
  const LinearMap& op() const { return a_; }
  double mu() const { return env_.mu(); }

  /// L = L_f + max(1/mu, rho/(1 - rho mu)) ||A||^2, the Lipschitz constant
  /// of grad H_mu.
  double smoothness() const { return smoothness_; }

  Vector grad_full(const Vector& x) const;
  Vector grad_stochastic(const Vector& x, const NoiseSpec& noise,
                         std::uint64_t step_index) const;

  double objective_H(const Vector& x) const;
  double objective_H_mu(const Vector& x) const;
  Vector grad_H_mu(const Vector& x) const;

  /// dist(0, grad f(x) + A^T partial h(Ax)) upper bound via projected
  /// gradient over the coordinate subdifferential box; step 1/||A A^T||,
  /// capped at 10000 iterations, projected-gradient stop at `tol`.
  SubgradResidual subgrad_residual(const Vector& x, double tol = 1e-10) const;

  /// Lifted point x - A^T (A A^T)^{-1} (Ax - prox_{mu h}(Ax)); satisfies
  /// A xbar = prox_{mu h}(Ax). Requires a surjective operator.
  Vector lift_point(const Vector& x) const;

  /// L_f L_h mu / sqrt(lambda_min(A A^T)): the criticality bound at the
  /// lifted point. Requires a surjective operator.
  double eps_criticality_bound() const;

  /// Largest smoothing level for which the lifted point is an
  /// eps-approximate critical point: eps sqrt(lambda_min(A A^T)) / (L_f L_h).
  double max_mu_for_epsilon(double eps) const;

 private:
  SmoothSum f_;
  Regularizer h_;
  LinearMap a_;
  EnvelopeView env_;
  double smoothness_;
};

/// Built-in operator family.
LinearMap make_identity_operator(Eigen::Index n);

/// Random m x n operator with prescribed singular values linearly spaced in
/// [sigma_min, sigma_max]; lambda_min(A A^T) = sigma_min^2 exactly.
LinearMap make_gaussian_operator(Eigen::Index m, Eigen::Index n, std::uint64_t seed,
                                 double sigma_min = 0.5, double sigma_max = 2.0);

/// First-difference rows (e_i - e_{i+1}); m = n-1, or m = n with a final e_n
/// row padding the operator to a square surjective one.
LinearMap make_first_difference_operator(Eigen::Index n, bool pad_to_square = false);

/// Random least-squares data: N rows a_i with N(0,1)/sqrt(n) entries and
/// targets b_i = a_i^T x_star + noise for a planted N(0,1) point x_star.
SmoothSum make_least_squares_data(Eigen::Index num_components, Eigen::Index n,
                                  std::uint64_t data_seed, double target_noise = 0.25);

}  // namespace compositeflow
