#include "compositeflow/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "compositeflow/errors.hpp"

namespace compositeflow {

RegularizerKind regularizer_kind_from_string(const std::string& name) {
  if (name == "l1") return RegularizerKind::kL1;
  if (name == "mcp") return RegularizerKind::kMcp;
  if (name == "scad") return RegularizerKind::kScad;
  throw ConfigError("unknown regularizer kind: '" + name + "' (expected l1|mcp|scad)");
}

std::string to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::kL1: return "l1";
    case RegularizerKind::kMcp: return "mcp";
    case RegularizerKind::kScad: return "scad";
  }
  return "?";
}

Regularizer::Regularizer(RegularizerKind kind, double weight, double shape, Eigen::Index dim)
    : kind_(kind), weight_(weight), shape_(shape), dim_(dim) {
  if (weight < 0) throw ConfigError("regularizer weight must be nonnegative");
  if (dim <= 0) throw ConfigError("regularizer dimension must be positive");
  switch (kind_) {
    case RegularizerKind::kL1:
      modulus_ = 0.0;
      break;
    case RegularizerKind::kMcp:
      if (shape <= 0) throw ConfigError("MCP shape must be positive");
      modulus_ = weight > 0 ? 1.0 / shape : 0.0;
      break;
    case RegularizerKind::kScad:
      if (shape <= 2) throw ConfigError("SCAD shape must exceed 2");
      modulus_ = weight > 0 ? 1.0 / (shape - 1.0) : 0.0;
      break;
  }
  lipschitz_ = weight_ * std::sqrt(static_cast<double>(dim_));
}

Regularizer Regularizer::l1(double weight, Eigen::Index dim) {
  return Regularizer(RegularizerKind::kL1, weight, 0.0, dim);
}
Regularizer Regularizer::mcp(double weight, double shape, Eigen::Index dim) {
  return Regularizer(RegularizerKind::kMcp, weight, shape, dim);
}
Regularizer Regularizer::scad(double weight, double shape, Eigen::Index dim) {
  return Regularizer(RegularizerKind::kScad, weight, shape, dim);
}

double Regularizer::value1(double t) const {
  const double at = std::abs(t);
  const double w = weight_;
  if (w == 0) return 0.0;
  switch (kind_) {
    case RegularizerKind::kL1:
      return w * at;
    case RegularizerKind::kMcp: {
      const double g = shape_;
      if (at <= g * w) return w * at - t * t / (2.0 * g);
      return g * w * w / 2.0;
    }
    case RegularizerKind::kScad: {
      const double a = shape_;
      if (at <= w) return w * at;
      if (at <= a * w) return (2.0 * a * w * at - t * t - w * w) / (2.0 * (a - 1.0));
      return w * w * (a + 1.0) / 2.0;
    }
  }
  return 0.0;
}

double Regularizer::value(const Eigen::VectorXd& y) const {
  if (y.size() != dim_) throw UsageError("regularizer value: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) sum += value1(y[i]);
  return sum;
}

namespace {

struct Candidate {
  double z;
  double slope;
};

/// Minimizer of value1(z) + (z - y)^2 / (2 sigma) over an explicit candidate
/// list; ties resolved toward the smallest magnitude, then the nonnegative one.
ScalarProx pick_best(const Regularizer& reg, double sigma, double y,
                     const std::vector<Candidate>& candidates) {
  const auto objective = [&](double z) {
    const double d = z - y;
    return reg.value1(z) + d * d / (2.0 * sigma);
  };
  ScalarProx best{candidates.front().z, candidates.front().slope};
  double best_obj = objective(best.z);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    const double obj = objective(c.z);
    const double tol = 1e-12 * (1.0 + std::abs(best_obj));
    if (obj < best_obj - tol) {
      best_obj = obj;
      best = {c.z, c.slope};
    } else if (obj <= best_obj + tol) {
      // Tie: smallest magnitude wins, then the nonnegative representative.
      const bool smaller = std::abs(c.z) < std::abs(best.z) - tol;
      const bool equal_mag = std::abs(std::abs(c.z) - std::abs(best.z)) <= tol;
      if (smaller || (equal_mag && c.z > best.z)) {
        best_obj = std::min(best_obj, obj);
        best = {c.z, c.slope};
      }
    }
  }
  return best;
}

}  // namespace

ScalarProx Regularizer::prox1(double sigma, double y) const {
  if (sigma <= 0) throw UsageError("prox: sigma must be positive");
  const double w = weight_;
  if (w == 0) return {y, 1.0};
  const double s = y < 0 ? -1.0 : 1.0;
  const double t = std::abs(y);

  std::vector<Candidate> candidates;
  candidates.push_back({0.0, 0.0});
  switch (kind_) {
    case RegularizerKind::kL1: {
      if (t > sigma * w) candidates.push_back({s * (t - sigma * w), 1.0});
      break;
    }
    case RegularizerKind::kMcp: {
      const double g = shape_;
      candidates.push_back({s * g * w, 0.0});
      if (sigma < g) {
        // Inner branch is strictly convex: stationary point
        // z = (|y| - sigma w) / (1 - sigma/g) when it lands inside.
        const double zi = (t - sigma * w) / (1.0 - sigma / g);
        if (zi > 0 && zi <= g * w) candidates.push_back({s * zi, 1.0 / (1.0 - sigma / g)});
      }
      if (t > g * w) candidates.push_back({y, 1.0});
      break;
    }
    case RegularizerKind::kScad: {
      const double a = shape_;
      candidates.push_back({s * w, 0.0});
      candidates.push_back({s * a * w, 0.0});
      const double z1 = t - sigma * w;
      if (z1 > 0 && z1 <= w) candidates.push_back({s * z1, 1.0});
      if (sigma < a - 1.0) {
        const double z2 = ((a - 1.0) * t - sigma * a * w) / (a - 1.0 - sigma);
        if (z2 > w && z2 <= a * w) {
          candidates.push_back({s * z2, (a - 1.0) / (a - 1.0 - sigma)});
        }
      }
      if (t > a * w) candidates.push_back({y, 1.0});
      break;
    }
  }
  return pick_best(*this, sigma, y, candidates);
}

Eigen::VectorXd Regularizer::prox(double sigma, const Eigen::VectorXd& y) const {
  if (y.size() != dim_) throw UsageError("prox: dimension mismatch");
  Eigen::VectorXd z(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) z[i] = prox1(sigma, y[i]).z;
  return z;
}

Interval Regularizer::subgradient1(double t, double kink_tol) const {
  const double w = weight_;
  if (w == 0) return {0.0, 0.0};
  if (std::abs(t) <= kink_tol || t == 0) return {-w, w};
  const double s = t < 0 ? -1.0 : 1.0;
  const double at = std::abs(t);
  double slope = 0.0;
  switch (kind_) {
    case RegularizerKind::kL1:
      slope = w;
      break;
    case RegularizerKind::kMcp:
      slope = at <= shape_ * w ? w - at / shape_ : 0.0;
      break;
    case RegularizerKind::kScad:
      if (at <= w) {
        slope = w;
      } else if (at <= shape_ * w) {
        slope = (shape_ * w - at) / (shape_ - 1.0);
      } else {
        slope = 0.0;
      }
      break;
  }
  const double v = s * slope;
  return {v, v};
}

EnvelopeView::EnvelopeView(Regularizer base, double mu) : base_(std::move(base)), mu_(mu) {
  if (mu <= 0) throw ConfigError("Moreau envelope: mu must be positive");
  if (base_.modulus() > 0 && mu >= 1.0 / base_.modulus()) {
    throw ConfigError("Moreau envelope: mu must satisfy mu < 1/modulus");
  }
}

double EnvelopeView::smoothness() const {
  const double rho = base_.modulus();
  const double from_mu = 1.0 / mu_;
  if (rho == 0) return from_mu;
  return std::max(from_mu, rho / (1.0 - rho * mu_));
}

double EnvelopeView::value1(double y) const {
  const double p = base_.prox1(mu_, y).z;
  const double d = p - y;
  return base_.value1(p) + d * d / (2.0 * mu_);
}

double EnvelopeView::value(const Eigen::VectorXd& y) const {
  if (y.size() != base_.dim()) throw UsageError("envelope value: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) sum += value1(y[i]);
  return sum;
}

double EnvelopeView::grad1(double y) const {
  return (y - base_.prox1(mu_, y).z) / mu_;
}

Eigen::VectorXd EnvelopeView::grad(const Eigen::VectorXd& y) const {
  if (y.size() != base_.dim()) throw UsageError("envelope grad: dimension mismatch");
  Eigen::VectorXd g(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) g[i] = grad1(y[i]);
  return g;
}

double EnvelopeView::prox1(double sigma, double w) const {
  if (sigma <= 0) throw UsageError("envelope prox: sigma must be positive");
  if (w == 0) return 0.0;

  // Stationarity: phi(z) = grad1(z) + (z - w)/sigma, strictly increasing and
  // piecewise linear; the root is bracketed by [min(0, w), max(0, w)].
  const auto phi = [&](double z) {
    const ScalarProx p = base_.prox1(mu_, z);
    const double value = (z - p.z) / mu_ + (z - w) / sigma;
    const double deriv = (1.0 - p.dz_dy) / mu_ + 1.0 / sigma;
    return std::pair<double, double>(value, deriv);
  };

  double lo = std::min(0.0, w);
  double hi = std::max(0.0, w);
  double z = w;
  const double tol = 1e-12 * (1.0 + std::abs(w)) * (1.0 / mu_ + 1.0 / sigma);
  for (int it = 0; it < 200; ++it) {
    const auto [f, df] = phi(z);
    if (std::abs(f) <= tol) return z;
    if (f > 0) {
      hi = z;
    } else {
      lo = z;
    }
    double z_next = z - f / df;
    if (!(z_next > lo && z_next < hi)) {
      z_next = 0.5 * (lo + hi);
    }
    if (std::abs(z_next - z) <= 1e-16 * (1.0 + std::abs(w))) {
      z = z_next;
      break;
    }
    z = z_next;
  }
  const auto [f, df] = phi(z);
  (void)df;
  if (std::abs(f) > tol) {
    throw NumericalError("envelope prox: Newton did not converge (residual attached)", f);
  }
  return z;
}

Eigen::VectorXd EnvelopeView::prox(double sigma, const Eigen::VectorXd& w) const {
  if (w.size() != base_.dim()) throw UsageError("envelope prox: dimension mismatch");
  Eigen::VectorXd z(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) z[i] = prox1(sigma, w[i]);
  return z;
}

}  // namespace compositeflow
