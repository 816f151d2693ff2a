#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "compositeflow/dynamics.hpp"
#include "compositeflow/problem.hpp"

namespace compositeflow {

enum class ObjectiveSeries { kH, kHMu };

struct DescentAudit {
  double max_violation;  // max over consecutive records of the descent defect
  long argmax_index;
};

/// Audits the descent identity along a deterministic path: for consecutive
/// records, H(t_{i+1}) + lambda^{-1} * trapezoid(resid^2) - H(t_i) should be
/// nonpositive up to discretization error. Returns the largest defect.
DescentAudit descent_audit(const SampledPath& path, ObjectiveSeries which);

struct EnergyGap {
  double gap;             // |LHS - RHS| / (1 + |RHS|)
  double lhs;
  double rhs;
  double standard_error;  // bootstrap SE of the gap
  std::string verdict;    // "pass" | "fail" | "inconclusive"
};

/// Checks the energy identity over an ensemble of first-order SDE paths:
/// E[H_mu(x(t2))] + lambda E[int ||xdot||^2 dt] = E[H_mu(x(t1))], with the
/// velocity estimated drift-only ((dx - stored noise)/dt). The verdict is
/// never "pass" when the bootstrap standard error exceeds the gap.
EnergyGap energy_identity_gap(const std::vector<SampledPath>& paths, double t1, double t2,
                              double tolerance = 0.1, std::uint64_t bootstrap_seed = 0);

/// c = (1/2) min(2 lambda / L, (sqrt(L^2 + 2 lambda gamma L) - L) / L); the
/// returned value always yields a = lambda gamma - cL - c^2 L/2 > 0 and
/// b = c lambda - c^2 L / 2 > 0.
double choose_c(double lambda, double gamma, double lipschitz);

struct LyapunovAudit {
  double c;
  double a;  // lambda gamma - cL - c^2 L / 2
  double b;  // c lambda - c^2 L / 2
  std::vector<double> times;
  std::vector<double> mean_series;    // ensemble mean of L_mu(p, q)
  std::vector<double> increments;     // mean_series[j+1] - mean_series[j]
  std::vector<double> increment_se;   // bootstrap SE of each increment
  bool pass;                          // every increment <= 2 SE above zero
  double max_excess;                  // max(increment - 2 SE)
};

/// Audits the Lyapunov descent along an ensemble of second-order SDE paths:
/// p = c v + x, q = (c + sqrt(1 + c gamma + c alpha / max(t, t_min))) v + x,
/// L_mu(p, q) = H_mu(p) + (lambda/2) ||p - q||^2. Passes when every
/// increment of the ensemble mean stays within 2 bootstrap standard errors
/// of nonpositive.
LyapunovAudit lyapunov_audit(const std::vector<SampledPath>& paths,
                             const CompositeProblem& problem, const FlowConfig& cfg,
                             double c, std::uint64_t bootstrap_seed = 0);

enum class RateModel { kExponential, kPower };

std::string to_string(RateModel model);

/// Fitted convergence-rate regime. Exponential decay marks the
/// theta <= 1/2 regime; power decay t^p with p < -1 maps to
/// theta = (1 - 1/p)/2 in (1/2, 1).
struct RateFit {
  RateModel model;
  double amplitude;
  double rate;          // decay rate b1 (exponential) or exponent p (power)
  double theta_hat;
  double r_squared;
  double window_start;
  double window_end;
  long points_used;
  bool regime_mismatch;  // power fit with p >= -1
};

/// Least-squares fits of log(gap) vs t (exponential) and log(gap) vs log(t)
/// (power) over the points with gap above 1e3 * eps * (1 + |reference|);
/// returns the model with the higher r^2. Throws InsufficientDataError with
/// fewer than 10 usable points.
RateFit rate_fit(const std::vector<double>& times, const std::vector<double>& gaps,
                 double reference = 0.0);

double theta_to_power(double theta);  // p = 1 / (1 - 2 theta)
double power_to_theta(double p);      // theta = (1 - 1/p) / 2

/// Objective gap series for rate fitting: reference value is the minimum of
/// the series and the last `tail_fraction` of records is excluded from the
/// fitting window.
struct GapSeries {
  std::vector<double> times;
  std::vector<double> gaps;
  double reference;
};

GapSeries objective_gaps(const std::vector<double>& times, const std::vector<double>& values,
                         double tail_fraction = 0.05);

struct CriticalityReport {
  double resid_smoothed;   // ||grad H_mu(x)||
  Vector x_bar;
  double resid_at_x_bar;   // subgradient distance upper bound at the lifted point
  double resid_certificate;
  double bound;            // L_f L_h mu / sqrt(lambda_min(A A^T))
  double tol_stat;         // slack accounting for resid_smoothed != 0
  bool pass;
};

/// Certifies the lifted point: pass iff
/// subgrad_residual(lift_point(x)) <= bound + tol_stat, with
/// tol_stat = resid_smoothed + tol_abs (the first-order perturbation of the
/// criticality bound when x is only approximately critical).
CriticalityReport criticality_report(const CompositeProblem& problem, const Vector& x_final,
                                     double tol_abs = 1e-9);

}  // namespace compositeflow
