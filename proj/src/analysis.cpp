#include "compositeflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "compositeflow/errors.hpp"
#include "compositeflow/rng.hpp"

namespace compositeflow {

DescentAudit descent_audit(const SampledPath& path, ObjectiveSeries which) {
  const std::vector<double>& objective =
      which == ObjectiveSeries::kH ? path.objective_h : path.objective_h_mu;
  DescentAudit audit{0.0, 0};
  if (path.size() < 2) return audit;
  audit.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double quad = 0.5 * path.dt *
                        (path.resid[i] * path.resid[i] + path.resid[i + 1] * path.resid[i + 1]);
    const double violation = objective[i + 1] + quad / path.lambda - objective[i];
    if (violation > audit.max_violation) {
      audit.max_violation = violation;
      audit.argmax_index = static_cast<long>(i);
    }
  }
  return audit;
}

namespace {

std::size_t grid_index(const SampledPath& path, double t) {
  const auto idx = static_cast<long>(std::lround(t / path.dt));
  if (idx < 0 || static_cast<std::size_t>(idx) >= path.size()) {
    throw UsageError("time " + std::to_string(t) + " is outside the sampled path");
  }
  return static_cast<std::size_t>(idx);
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (const double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

constexpr int kBootstrapResamples = 1000;

}  // namespace

EnergyGap energy_identity_gap(const std::vector<SampledPath>& paths, double t1, double t2,
                              double tolerance, std::uint64_t bootstrap_seed) {
  if (paths.empty()) throw UsageError("energy_identity_gap: empty ensemble");
  if (t2 < t1) throw UsageError("energy_identity_gap: t2 must be >= t1");
  const std::size_t m = paths.size();
  const std::size_t i1 = grid_index(paths.front(), t1);
  const std::size_t i2 = grid_index(paths.front(), t2);

  std::vector<double> lhs(m), rhs(m);
  for (std::size_t p = 0; p < m; ++p) {
    const SampledPath& path = paths[p];
    if (path.size() <= i2) throw UsageError("energy_identity_gap: ragged ensemble");
    double quad = 0.0;
    for (std::size_t i = i1; i < i2; ++i) {
      // Drift-only velocity: the stored noise increment is removed before
      // differencing, so ||v||^2 estimates the squared drift term.
      const Vector v = (path.states[i + 1] - path.states[i] - path.noise[i]) / path.dt;
      quad += path.dt * v.squaredNorm();
    }
    lhs[p] = path.objective_h_mu[i2] + path.lambda * quad;
    rhs[p] = path.objective_h_mu[i1];
  }

  const auto gap_of = [](double mean_lhs, double mean_rhs) {
    return std::abs(mean_lhs - mean_rhs) / (1.0 + std::abs(mean_rhs));
  };

  EnergyGap out;
  out.lhs = pairwise_mean(lhs);
  out.rhs = pairwise_mean(rhs);
  out.gap = gap_of(out.lhs, out.rhs);

  RandomStream stream(bootstrap_seed, StreamPurpose::kBootstrap, 0);
  std::vector<double> resampled(kBootstrapResamples);
  std::vector<double> lhs_star(m), rhs_star(m);
  for (int r = 0; r < kBootstrapResamples; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t pick = static_cast<std::size_t>(
          stream.bits(static_cast<std::uint64_t>(r) * m + j) % m);
      lhs_star[j] = lhs[pick];
      rhs_star[j] = rhs[pick];
    }
    resampled[static_cast<std::size_t>(r)] =
        gap_of(pairwise_mean(lhs_star), pairwise_mean(rhs_star));
  }
  const double resample_mean = pairwise_mean(resampled);
  out.standard_error = sample_std(resampled, resample_mean);

  if (out.standard_error > out.gap) {
    out.verdict = "inconclusive";
  } else if (out.gap <= tolerance) {
    out.verdict = "pass";
  } else {
    out.verdict = "fail";
  }
  return out;
}

double choose_c(double lambda, double gamma, double lipschitz) {
  if (lambda <= 0 || gamma <= 0 || lipschitz <= 0) {
    throw UsageError("choose_c: lambda, gamma, L must be positive");
  }
  const double left = 2.0 * lambda / lipschitz;
  const double right =
      (std::sqrt(lipschitz * lipschitz + 2.0 * lambda * gamma * lipschitz) - lipschitz) /
      lipschitz;
  const double c = 0.5 * std::min(left, right);
  const double a = lambda * gamma - c * lipschitz - c * c * lipschitz / 2.0;
  const double b = c * lambda - c * c * lipschitz / 2.0;
  if (!(a > 0) || !(b > 0)) {
    throw NumericalError("choose_c: derived constants are not positive");
  }
  return c;
}

LyapunovAudit lyapunov_audit(const std::vector<SampledPath>& paths,
                             const CompositeProblem& problem, const FlowConfig& cfg,
                             double c, std::uint64_t bootstrap_seed) {
  if (paths.empty()) throw UsageError("lyapunov_audit: empty ensemble");
  for (const SampledPath& p : paths) {
    if (p.velocities.size() != p.size()) {
      throw UsageError("lyapunov_audit: paths must carry velocities (second-order kind)");
    }
  }
  const std::size_t steps = paths.front().size();
  const std::size_t m = paths.size();
  const double lipschitz = problem.smoothness();

  LyapunovAudit audit;
  audit.c = c;
  audit.a = cfg.lambda * cfg.gamma - c * lipschitz - c * c * lipschitz / 2.0;
  audit.b = c * cfg.lambda - c * c * lipschitz / 2.0;
  const double t_min = cfg.t_min > 0 ? cfg.t_min : cfg.dt;

  // values[i][p] = L_mu(p(t_i), q(t_i)) along path p.
  std::vector<std::vector<double>> values(steps, std::vector<double>(m));
  for (std::size_t p = 0; p < m; ++p) {
    const SampledPath& path = paths[p];
    if (path.size() != steps) throw UsageError("lyapunov_audit: ragged ensemble");
    for (std::size_t i = 0; i < steps; ++i) {
      const double t = std::max(path.times[i], t_min);
      const Vector& x = path.states[i];
      const Vector& v = path.velocities[i];
      const Vector point_p = c * v + x;
      const Vector point_q =
          (c + std::sqrt(1.0 + c * cfg.gamma + c * cfg.alpha / t)) * v + x;
      values[i][p] = problem.objective_H_mu(point_p) +
                     0.5 * cfg.lambda * (point_p - point_q).squaredNorm();
    }
    audit.times = path.times;
  }

  audit.mean_series.resize(steps);
  for (std::size_t i = 0; i < steps; ++i) audit.mean_series[i] = pairwise_mean(values[i]);

  RandomStream stream(bootstrap_seed, StreamPurpose::kBootstrap, 1);
  audit.increments.resize(steps > 0 ? steps - 1 : 0);
  audit.increment_se.assign(audit.increments.size(), 0.0);
  for (std::size_t j = 0; j + 1 < steps; ++j) {
    audit.increments[j] = audit.mean_series[j + 1] - audit.mean_series[j];
  }
  if (m > 1) {
    std::vector<double> deltas(m);
    std::vector<double> star(m), resampled(kBootstrapResamples);
    for (std::size_t j = 0; j + 1 < steps; ++j) {
      for (std::size_t p = 0; p < m; ++p) deltas[p] = values[j + 1][p] - values[j][p];
      for (int r = 0; r < kBootstrapResamples; ++r) {
        for (std::size_t p = 0; p < m; ++p) {
          const std::size_t pick = static_cast<std::size_t>(
              stream.bits((static_cast<std::uint64_t>(j) * kBootstrapResamples +
                           static_cast<std::uint64_t>(r)) *
                              m +
                          p) %
              m);
          star[p] = deltas[pick];
        }
        resampled[static_cast<std::size_t>(r)] = pairwise_mean(star);
      }
      audit.increment_se[j] = sample_std(resampled, pairwise_mean(resampled));
    }
  }

  audit.max_excess = -std::numeric_limits<double>::infinity();
  audit.pass = true;
  for (std::size_t j = 0; j < audit.increments.size(); ++j) {
    const double slack = 1e-12 * (1.0 + std::abs(audit.mean_series[j]));
    const double excess = audit.increments[j] - 2.0 * audit.increment_se[j];
    audit.max_excess = std::max(audit.max_excess, excess);
    if (excess > slack) audit.pass = false;
  }
  if (audit.increments.empty()) audit.max_excess = 0.0;
  return audit;
}

std::string to_string(RateModel model) {
  return model == RateModel::kExponential ? "exponential" : "power";
}

double theta_to_power(double theta) { return 1.0 / (1.0 - 2.0 * theta); }

double power_to_theta(double p) { return (1.0 - 1.0 / p) / 2.0; }

GapSeries objective_gaps(const std::vector<double>& times, const std::vector<double>& values,
                         double tail_fraction) {
  if (times.size() != values.size() || times.empty()) {
    throw UsageError("objective_gaps: mismatched or empty series");
  }
  GapSeries out;
  out.reference = *std::min_element(values.begin(), values.end());
  // The tail hosts the plateau that defines the reference level; it is
  // excluded from the fitting window.
  const std::size_t keep = times.size() -
                           static_cast<std::size_t>(std::floor(
                               tail_fraction * static_cast<double>(times.size())));
  for (std::size_t i = 0; i < keep; ++i) {
    out.times.push_back(times[i]);
    out.gaps.push_back(values[i] - out.reference);
  }
  return out;
}

namespace {

struct LogFit {
  double slope;
  double intercept;
  double r_squared;
  bool valid;
};

LogFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n < 2) return {0, 0, 0, false};
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0) return {0, 0, 0, false};
  LogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  fit.valid = true;
  return fit;
}

}  // namespace

RateFit rate_fit(const std::vector<double>& times, const std::vector<double>& gaps,
                 double reference) {
  if (times.size() != gaps.size()) throw UsageError("rate_fit: mismatched series");
  const double threshold =
      1000.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(reference));

  std::vector<double> t_used, log_gap;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::isfinite(gaps[i]) && gaps[i] > threshold) {
      t_used.push_back(times[i]);
      log_gap.push_back(std::log(gaps[i]));
    }
  }
  if (t_used.size() < 10) {
    throw InsufficientDataError("rate_fit: fewer than 10 usable points (" +
                                std::to_string(t_used.size()) + ")");
  }

  const LogFit exp_fit = fit_line(t_used, log_gap);

  std::vector<double> log_t, log_gap_pos;
  for (std::size_t i = 0; i < t_used.size(); ++i) {
    if (t_used[i] > 0) {
      log_t.push_back(std::log(t_used[i]));
      log_gap_pos.push_back(log_gap[i]);
    }
  }
  const LogFit pow_fit =
      log_t.size() >= 10 ? fit_line(log_t, log_gap_pos) : LogFit{0, 0, 0, false};

  RateFit out;
  out.window_start = t_used.front();
  out.window_end = t_used.back();
  out.points_used = static_cast<long>(t_used.size());
  out.regime_mismatch = false;
  if (!pow_fit.valid || exp_fit.r_squared >= pow_fit.r_squared) {
    out.model = RateModel::kExponential;
    out.amplitude = std::exp(exp_fit.intercept);
    out.rate = -exp_fit.slope;  // gap ~ a exp(-b1 t)
    out.r_squared = exp_fit.r_squared;
    out.theta_hat = 0.5;  // exponential decay marks the theta <= 1/2 regime
  } else {
    out.model = RateModel::kPower;
    out.amplitude = std::exp(pow_fit.intercept);
    out.rate = pow_fit.slope;  // gap ~ c t^p
    out.r_squared = pow_fit.r_squared;
    if (out.rate < -1.0) {
      out.theta_hat = power_to_theta(out.rate);
    } else {
      out.regime_mismatch = true;
      out.theta_hat = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

CriticalityReport criticality_report(const CompositeProblem& problem, const Vector& x_final,
                                     double tol_abs) {
  CriticalityReport report;
  report.resid_smoothed = problem.grad_H_mu(x_final).norm();
  report.x_bar = problem.lift_point(x_final);
  const SubgradResidual sr = problem.subgrad_residual(report.x_bar);
  report.resid_at_x_bar = sr.achieved;
  report.resid_certificate = sr.stationarity;
  report.bound = problem.eps_criticality_bound();
  report.tol_stat = report.resid_smoothed + tol_abs * (1.0 + report.bound);
  report.pass = report.resid_at_x_bar <= report.bound + report.tol_stat;
  return report;
}

}  // namespace compositeflow
