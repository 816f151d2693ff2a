#include "compositeflow/problem.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/QR>

#include "compositeflow/errors.hpp"
#include "compositeflow/rng.hpp"

namespace compositeflow {

SmoothSum::SmoothSum(Matrix data, Vector targets)
    : data_(std::move(data)), targets_(std::move(targets)) {
  if (data_.rows() == 0 || data_.cols() == 0) {
    throw UsageError("SmoothSum: data matrix must be nonempty");
  }
  if (targets_.size() != data_.rows()) {
    throw UsageError("SmoothSum: target length does not match component count");
  }
  // ||D^T D|| / N via the operator machinery.
  lipschitz_ = LinearMap(data_).gram_norm() / static_cast<double>(data_.rows());
}

double SmoothSum::value(const Vector& x) const {
  if (x.size() != dim()) throw UsageError("SmoothSum value: dimension mismatch");
  const Vector r = data_ * x - targets_;
  return 0.5 * r.squaredNorm() / static_cast<double>(count());
}

Vector SmoothSum::grad(const Vector& x) const {
  if (x.size() != dim()) throw UsageError("SmoothSum grad: dimension mismatch");
  const Vector r = data_ * x - targets_;
  return data_.transpose() * r / static_cast<double>(count());
}

Vector SmoothSum::grad_component(Eigen::Index i, const Vector& x) const {
  if (i < 0 || i >= count()) throw UsageError("SmoothSum grad_component: index out of range");
  const double r = data_.row(i).dot(x) - targets_[i];
  return data_.row(i).transpose() * r;
}

NoiseMode noise_mode_from_string(const std::string& name) {
  if (name == "exact") return NoiseMode::kExact;
  if (name == "gaussian") return NoiseMode::kGaussian;
  if (name == "minibatch") return NoiseMode::kMinibatch;
  throw ConfigError("unknown noise mode: '" + name + "' (expected exact|gaussian|minibatch)");
}

std::string to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kExact: return "exact";
    case NoiseMode::kGaussian: return "gaussian";
    case NoiseMode::kMinibatch: return "minibatch";
  }
  return "?";
}

NoiseSpec NoiseSpec::exact() { return NoiseSpec{NoiseMode::kExact, 1.0, 0, 0}; }

NoiseSpec NoiseSpec::gaussian(double sigma, std::uint64_t master_seed) {
  return NoiseSpec{NoiseMode::kGaussian, sigma, 0, master_seed};
}

NoiseSpec NoiseSpec::minibatch(Eigen::Index batch, std::uint64_t master_seed) {
  return NoiseSpec{NoiseMode::kMinibatch, 1.0, batch, master_seed};
}

NoiseSpec NoiseSpec::with_seed(std::uint64_t seed) const {
  NoiseSpec copy = *this;
  copy.master_seed = seed;
  return copy;
}

CompositeProblem::CompositeProblem(SmoothSum f, Regularizer h, LinearMap a, double mu)
    : f_(std::move(f)),
      h_(std::move(h)),
      a_(std::move(a)),
      env_(h_, mu) {
  if (a_.cols() != f_.dim()) {
    throw UsageError("CompositeProblem: operator columns do not match smooth-term dimension");
  }
  if (a_.rows() != h_.dim()) {
    throw UsageError("CompositeProblem: operator rows do not match regularizer dimension");
  }
  smoothness_ = f_.lipschitz() + env_.smoothness() * a_.gram_norm();
}

Vector CompositeProblem::grad_full(const Vector& x) const { return f_.grad(x); }

Vector CompositeProblem::grad_stochastic(const Vector& x, const NoiseSpec& noise,
                                         std::uint64_t step_index) const {
  switch (noise.mode) {
    case NoiseMode::kExact:
      return f_.grad(x);
    case NoiseMode::kGaussian: {
      RandomStream stream(noise.master_seed, StreamPurpose::kGradientNoise, step_index);
      return f_.grad(x) + noise.sigma * stream.normal_vector(dim());
    }
    case NoiseMode::kMinibatch: {
      if (noise.batch <= 0 || noise.batch > f_.count()) {
        throw UsageError("minibatch size must lie in [1, N]");
      }
      RandomStream stream(noise.master_seed, StreamPurpose::kMinibatch, step_index);
      const auto indices = stream.sample_without_replacement(
          static_cast<std::size_t>(f_.count()), static_cast<std::size_t>(noise.batch));
      Vector g = Vector::Zero(dim());
      for (const std::size_t i : indices) {
        g += f_.grad_component(static_cast<Eigen::Index>(i), x);
      }
      return g / static_cast<double>(noise.batch);
    }
  }
  throw UsageError("invalid noise mode");
}

double CompositeProblem::objective_H(const Vector& x) const {
  return f_.value(x) + h_.value(a_.apply(x));
}

double CompositeProblem::objective_H_mu(const Vector& x) const {
  return f_.value(x) + env_.value(a_.apply(x));
}

Vector CompositeProblem::grad_H_mu(const Vector& x) const {
  return f_.grad(x) + a_.apply_adjoint(env_.grad(a_.apply(x)));
}

SubgradResidual CompositeProblem::subgrad_residual(const Vector& x, double tol) const {
  const Vector grad_f = f_.grad(x);
  const Vector ax = a_.apply(x);
  const Eigen::Index m = a_.rows();

  // Coordinates within floating error of the kink get the kink interval.
  const double kink_tol = 1e-10 * (1.0 + ax.cwiseAbs().maxCoeff());
  Vector lo(m), hi(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Interval iv = h_.subgradient1(ax[i], kink_tol);
    lo[i] = iv.lo;
    hi[i] = iv.hi;
  }

  const double gram = a_.gram_norm();
  if (gram == 0) {
    return {grad_f.norm(), 0.0, Vector::Zero(m), true};
  }
  const double step = 1.0 / gram;

  const auto clamp_box = [&](Vector g) {
    for (Eigen::Index i = 0; i < m; ++i) g[i] = std::clamp(g[i], lo[i], hi[i]);
    return g;
  };

  Vector g = clamp_box(Vector::Zero(m));
  double stationarity = 0.0;
  bool converged = false;
  constexpr int kMaxIter = 10000;
  for (int it = 0; it < kMaxIter; ++it) {
    const Vector residual = grad_f + a_.apply_adjoint(g);
    const Vector grad_inner = a_.apply(residual);
    const Vector g_next = clamp_box(g - step * grad_inner);
    stationarity = (g - g_next).norm() / step;
    g = g_next;
    if (stationarity <= tol) {
      converged = true;
      break;
    }
  }
  const double achieved = (grad_f + a_.apply_adjoint(g)).norm();
  return {achieved, stationarity, g, converged};
}

Vector CompositeProblem::lift_point(const Vector& x) const {
  const Vector ax = a_.apply(x);
  return x - a_.pinv_apply(ax - h_.prox(env_.mu(), ax));
}

double CompositeProblem::eps_criticality_bound() const {
  if (!a_.surjective()) {
    throw SurjectivityError("eps_criticality_bound: operator is not surjective");
  }
  return f_.lipschitz() * h_.lipschitz() * env_.mu() / std::sqrt(a_.min_eig_gram_adjoint());
}

double CompositeProblem::max_mu_for_epsilon(double eps) const {
  if (!a_.surjective()) {
    throw SurjectivityError("max_mu_for_epsilon: operator is not surjective");
  }
  return eps * std::sqrt(a_.min_eig_gram_adjoint()) / (f_.lipschitz() * h_.lipschitz());
}

LinearMap make_identity_operator(Eigen::Index n) { return LinearMap::identity(n); }

LinearMap make_gaussian_operator(Eigen::Index m, Eigen::Index n, std::uint64_t seed,
                                 double sigma_min, double sigma_max) {
  if (m > n) throw ConfigError("gaussian operator: surjectivity requires m <= n");
  if (sigma_min <= 0 || sigma_max < sigma_min) {
    throw ConfigError("gaussian operator: need 0 < sigma_min <= sigma_max");
  }
  RandomStream stream(seed, StreamPurpose::kDataGeneration, 0);
  Matrix gu(m, m), gv(n, m);
  std::uint64_t draw = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) gu(i, j) = stream.normal(draw++);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) gv(i, j) = stream.normal(draw++);

  const Matrix u = Eigen::HouseholderQR<Matrix>(gu).householderQ() * Matrix::Identity(m, m);
  const Matrix v = Eigen::HouseholderQR<Matrix>(gv).householderQ() * Matrix::Identity(n, m);

  Vector sigma(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    sigma[i] = m == 1 ? sigma_max
                      : sigma_min + (sigma_max - sigma_min) * static_cast<double>(i) /
                                        static_cast<double>(m - 1);
  }
  return LinearMap(u * sigma.asDiagonal() * v.transpose(), seed);
}

LinearMap make_first_difference_operator(Eigen::Index n, bool pad_to_square) {
  if (n < 2) throw ConfigError("first-difference operator: n must be at least 2");
  const Eigen::Index m = pad_to_square ? n : n - 1;
  Matrix d = Matrix::Zero(m, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    d(i, i) = 1.0;
    d(i, i + 1) = -1.0;
  }
  if (pad_to_square) d(n - 1, n - 1) = 1.0;
  return LinearMap(std::move(d));
}

SmoothSum make_least_squares_data(Eigen::Index num_components, Eigen::Index n,
                                  std::uint64_t data_seed, double target_noise) {
  RandomStream stream(data_seed, StreamPurpose::kDataGeneration, 1);
  std::uint64_t draw = 0;
  Matrix data(num_components, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < num_components; ++i)
    for (Eigen::Index j = 0; j < n; ++j) data(i, j) = scale * stream.normal(draw++);
  Vector x_star(n);
  for (Eigen::Index j = 0; j < n; ++j) x_star[j] = stream.normal(draw++);
  Vector targets = data * x_star;
  for (Eigen::Index i = 0; i < num_components; ++i) {
    targets[i] += target_noise * stream.normal(draw++);
  }
  return SmoothSum(std::move(data), std::move(targets));
}

}  // namespace compositeflow
