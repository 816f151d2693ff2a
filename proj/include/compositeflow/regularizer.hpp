#pragma once

#include <string>

#include <Eigen/Core>

namespace compositeflow {

enum class RegularizerKind { kL1, kMcp, kScad };

RegularizerKind regularizer_kind_from_string(const std::string& name);
std::string to_string(RegularizerKind kind);

/// Closed interval; coordinate subdifferentials of the separable penalties
/// are intervals (singletons away from kinks).
struct Interval {
  double lo;
  double hi;
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

/// Scalar prox output together with the local derivative of the winning
/// piecewise branch with respect to the input point.
struct ScalarProx {
  double z;
  double dz_dy;
};

/// Weakly convex separable regularizer h on R^m: weighted l1, MCP or SCAD,
/// with exact piecewise prox maps and the constants (weak-convexity modulus,
/// Lipschitz constant) the bounds consume.
///
/// Coordinate penalties, weight w > 0:
///   l1:   w|t|
///   MCP(shape g > 0):  w|t| - t^2/(2g) for |t| <= g w, else g w^2 / 2
///   SCAD(shape a > 2): w|t| for |t| <= w,
///                      (2 a w |t| - t^2 - w^2) / (2(a-1)) for w < |t| <= a w,
///                      w^2 (a+1)/2 beyond
class Regularizer {
 public:
  Regularizer(RegularizerKind kind, double weight, double shape, Eigen::Index dim);

  static Regularizer l1(double weight, Eigen::Index dim);
  static Regularizer mcp(double weight, double shape, Eigen::Index dim);
  static Regularizer scad(double weight, double shape, Eigen::Index dim);

  RegularizerKind kind() const { return kind_; }
  double weight() const { return weight_; }
  double shape() const { return shape_; }
  Eigen::Index dim() const { return dim_; }

  /// Weak-convexity modulus: 0 for l1, 1/g for MCP, 1/(a-1) for SCAD
  /// (0 whenever the weight is 0 and the penalty vanishes identically).
  double modulus() const { return modulus_; }

  /// Euclidean Lipschitz constant on R^m: w * sqrt(m), the coordinatewise
  /// slope bound scaled for the separable sum.
  double lipschitz() const { return lipschitz_; }

  double value(const Eigen::VectorXd& y) const;

  /// Coordinatewise minimizer of h(z) + ||z - y||^2 / (2 sigma). When the
  /// subproblem is set-valued (sigma >= 1/modulus) the minimizer with the
  /// smallest magnitude is returned, nonnegative on exact ties.
  Eigen::VectorXd prox(double sigma, const Eigen::VectorXd& y) const;

  double value1(double t) const;
  ScalarProx prox1(double sigma, double y) const;

  /// Clarke subdifferential of the coordinate penalty at t. Points within
  /// kink_tol of the origin receive the kink interval [-w, w], so boxes
  /// built from floating-point prox output resolve to the intended kink.
  Interval subgradient1(double t, double kink_tol = 0.0) const;

 private:
  RegularizerKind kind_;
  double weight_;
  double shape_;
  Eigen::Index dim_;
  double modulus_;
  double lipschitz_;
};

/// Moreau envelope h_mu of a weakly convex regularizer, valid for
/// 0 < mu < 1/modulus: convex, max(1/mu, modulus/(1 - modulus*mu))-smooth,
/// with gradient (y - prox(mu, y)) / mu.
class EnvelopeView {
 public:
  EnvelopeView(Regularizer base, double mu);

  const Regularizer& base() const { return base_; }
  double mu() const { return mu_; }

  /// Gradient Lipschitz constant max(1/mu, modulus/(1 - modulus*mu)).
  double smoothness() const;

  double value(const Eigen::VectorXd& y) const;
  Eigen::VectorXd grad(const Eigen::VectorXd& y) const;

  double value1(double y) const;
  double grad1(double y) const;

  /// The unique minimizer of h_mu(z) + ||z - w||^2 / (2 sigma), found per
  /// coordinate by safeguarded Newton on the stationarity equation with
  /// bisection fallback over the bracket [min(0, w_i), max(0, w_i)].
  /// Throws NumericalError with the residual attached on non-convergence.
  Eigen::VectorXd prox(double sigma, const Eigen::VectorXd& w) const;

  double prox1(double sigma, double w) const;

 private:
  Regularizer base_;
  double mu_;
};

}  // namespace compositeflow
