#include <doctest.h>

#include <cmath>
#include <random>

#include "compositeflow/errors.hpp"
#include "compositeflow/regularizer.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using compositeflow::EnvelopeView;
using compositeflow::Regularizer;
using Eigen::VectorXd;
using test_helpers::random_vector;

namespace {

std::vector<Regularizer> all_kinds(Eigen::Index dim) {
  return {Regularizer::l1(1.0, dim), Regularizer::mcp(1.0, 2.0, dim),
          Regularizer::scad(1.0, 3.7, dim)};
}

double prox_objective(const Regularizer& reg, double sigma, double y, double z) {
  return reg.value1(z) + (z - y) * (z - y) / (2.0 * sigma);
}

}  // namespace

TEST_CASE("constructor rejects invalid shapes") {
  CHECK_THROWS_AS(Regularizer::mcp(1.0, 0.0, 2), compositeflow::ConfigError);
  CHECK_THROWS_AS(Regularizer::scad(1.0, 2.0, 2), compositeflow::ConfigError);
  CHECK_THROWS_AS(Regularizer::l1(-1.0, 2), compositeflow::ConfigError);
  CHECK_THROWS_AS(EnvelopeView(Regularizer::mcp(1.0, 2.0, 2), 2.0),
                  compositeflow::ConfigError);  // mu >= 1/modulus
}

TEST_CASE("moduli and Lipschitz constants") {
  CHECK(Regularizer::l1(2.0, 4).modulus() == 0.0);
  CHECK(Regularizer::mcp(1.0, 2.0, 4).modulus() == doctest::Approx(0.5));
  CHECK(Regularizer::scad(1.0, 3.7, 4).modulus() == doctest::Approx(1.0 / 2.7));
  CHECK(Regularizer::l1(2.0, 4).lipschitz() == doctest::Approx(4.0));  // w sqrt(m)
  CHECK(Regularizer::mcp(3.0, 2.0, 9).lipschitz() == doctest::Approx(9.0));
}

TEST_CASE("value: weighted absolute sum and zero case") {
  const Regularizer l1 = Regularizer::l1(2.0, 2);
  VectorXd y(2);
  y << 1, -3;
  CHECK(l1.value(y) == doctest::Approx(8.0));
  for (const Regularizer& reg : all_kinds(3)) {
    CHECK(reg.value(VectorXd::Zero(3)) == 0.0);
  }
}

TEST_CASE("MCP saturation value matches the quadrature of the defining slope") {
  const Regularizer mcp = Regularizer::mcp(1.0, 2.0, 1);
  VectorXd y(1);
  y << 10;
  CHECK(mcp.value(y) == doctest::Approx(1.0));  // gamma w^2 / 2
  // MCP(t) = integral of w max(0, 1 - s/(gamma w)) over [0, t].
  const int steps = 200000;
  double integral = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double s = 10.0 * (i + 0.5) / steps;
    integral += 10.0 / steps * std::max(0.0, 1.0 - s / 2.0);
  }
  CHECK(mcp.value(y) == doctest::Approx(integral).epsilon(1e-6));
}

TEST_CASE("penalties are nonnegative and L_h-Lipschitz") {
  std::mt19937 gen(5);
  std::normal_distribution<double> dist(0.0, 2.0);
  for (const Regularizer& reg : all_kinds(6)) {
    for (int trial = 0; trial < 50; ++trial) {
      VectorXd a(6), b(6);
      for (int i = 0; i < 6; ++i) {
        a[i] = dist(gen);
        b[i] = dist(gen);
      }
      CHECK(reg.value(a) >= 0.0);
      CHECK(std::abs(reg.value(a) - reg.value(b)) <=
            reg.lipschitz() * (a - b).norm() + 1e-12);
    }
  }
}

TEST_CASE("weak convexity: h + (modulus/2)||.||^2 is midpoint convex") {
  std::mt19937 gen(7);
  std::normal_distribution<double> dist(0.0, 2.0);
  for (const Regularizer& reg : all_kinds(4)) {
    const double rho = reg.modulus();
    for (int trial = 0; trial < 100; ++trial) {
      VectorXd a(4), b(4);
      for (int i = 0; i < 4; ++i) {
        a[i] = dist(gen);
        b[i] = dist(gen);
      }
      const VectorXd mid = 0.5 * (a + b);
      const auto shifted = [&](const VectorXd& v) {
        return reg.value(v) + 0.5 * rho * v.squaredNorm();
      };
      CHECK(shifted(mid) <= 0.5 * (shifted(a) + shifted(b)) + 1e-10);
    }
  }
}

TEST_CASE("prox: soft threshold against the golden-section oracle") {
  const Regularizer l1 = Regularizer::l1(1.0, 1);
  VectorXd y(1);
  y << 2;
  const VectorXd z = l1.prox(1.0, y);
  CHECK(z[0] == doctest::Approx(1.0));
  const double argmin = oracles::golden_section(
      [&](double t) { return prox_objective(l1, 1.0, 2.0, t); }, -3.0, 3.0);
  CHECK(z[0] == doctest::Approx(argmin).epsilon(1e-8));
}

TEST_CASE("prox: zero input maps to zero") {
  for (const Regularizer& reg : all_kinds(3)) {
    CHECK(reg.prox(0.7, VectorXd::Zero(3)).norm() == 0.0);
  }
}

TEST_CASE("prox: MCP is the identity beyond the knee") {
  const Regularizer mcp = Regularizer::mcp(1.0, 2.0, 1);
  VectorXd y(1);
  y << 3;
  CHECK(mcp.prox(0.5, y)[0] == doctest::Approx(3.0));
  const double grid = oracles::grid_argmin(
      [&](double t) { return prox_objective(mcp, 0.5, 3.0, t); }, -4.0, 4.0, 80001);
  CHECK(mcp.prox(0.5, y)[0] == doctest::Approx(grid).epsilon(1e-4));
}

TEST_CASE("prox beats the dense grid oracle for every kind") {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> ys(-5.0, 5.0);
  std::uniform_real_distribution<double> sigmas(0.05, 2.0);
  for (const Regularizer& reg : all_kinds(1)) {
    for (int trial = 0; trial < 100; ++trial) {
      const double y = ys(gen);
      const double sigma = sigmas(gen);
      const double z = reg.prox1(sigma, y).z;
      const double span = std::abs(y) + 1.0;
      const double best = oracles::grid_min_value(
          [&](double t) { return prox_objective(reg, sigma, y, t); }, -span, span, 10000);
      CHECK(prox_objective(reg, sigma, y, z) <= best + 1e-8);
    }
  }
}

TEST_CASE("prox tie-break prefers the smallest magnitude") {
  // MCP with sigma > gamma: the subproblem is set-valued. At the exact tie
  // between 0 and y the zero minimizer must be returned, deterministically.
  const Regularizer mcp = Regularizer::mcp(1.0, 2.0, 1);
  const double sigma = 4.0;
  const double tie = std::sqrt(2.0 * sigma);  // obj(0) = obj(y) = gamma w^2/2
  CHECK(mcp.prox1(sigma, tie).z == 0.0);
  CHECK(mcp.prox1(sigma, tie + 0.1).z == doctest::Approx(tie + 0.1));
}

TEST_CASE("prox is 1/(1 - mu modulus)-Lipschitz") {
  std::mt19937 gen(13);
  std::normal_distribution<double> dist(0.0, 3.0);
  for (const Regularizer& reg : all_kinds(1)) {
    const double mu = reg.modulus() > 0 ? 0.5 / reg.modulus() : 0.5;
    const double bound = 1.0 / (1.0 - mu * reg.modulus());
    for (int trial = 0; trial < 100; ++trial) {
      const double a = dist(gen), b = dist(gen);
      const double pa = reg.prox1(mu, a).z;
      const double pb = reg.prox1(mu, b).z;
      CHECK(std::abs(pa - pb) <= bound * std::abs(a - b) + 1e-10);
    }
  }
}

TEST_CASE("moreau value: zero and Huber cases") {
  const Regularizer l1 = Regularizer::l1(1.0, 1);
  const EnvelopeView env(l1, 1.0);
  CHECK(env.value(VectorXd::Zero(1)) == 0.0);
  VectorXd two(1);
  two << 2;
  CHECK(env.value(two) == doctest::Approx(1.5));  // prox 1, h 1, quadratic 0.5
}

TEST_CASE("envelope lower-bounds the penalty and is monotone in mu") {
  std::mt19937 gen(17);
  std::normal_distribution<double> dist(0.0, 2.0);
  for (const Regularizer& reg : all_kinds(4)) {
    const double cap = reg.modulus() > 0 ? 1.0 / reg.modulus() : 1.0;
    const EnvelopeView small(reg, 0.1 * cap);
    const EnvelopeView large(reg, 0.5 * cap);
    for (int trial = 0; trial < 50; ++trial) {
      VectorXd y(4);
      for (int i = 0; i < 4; ++i) y[i] = dist(gen);
      const double v = reg.value(y);
      CHECK(large.value(y) <= small.value(y) + 1e-12);
      CHECK(small.value(y) <= v + 1e-12);
    }
  }
}

TEST_CASE("moreau gradient: symmetry, Huber slope, finite differences") {
  const Regularizer l1 = Regularizer::l1(1.0, 1);
  const EnvelopeView env(l1, 1.0);
  CHECK(env.grad(VectorXd::Zero(1)).norm() == 0.0);
  VectorXd two(1);
  two << 2;
  CHECK(env.grad(two)[0] == doctest::Approx(1.0));

  std::mt19937 gen(19);
  std::normal_distribution<double> dist(0.0, 3.0);
  for (const Regularizer& reg : all_kinds(1)) {
    const double mu = reg.modulus() > 0 ? 0.4 / reg.modulus() : 0.7;
    const EnvelopeView view(reg, mu);
    for (int trial = 0; trial < 100; ++trial) {
      const double y = dist(gen);
      const double fd = (view.value1(y + 1e-5) - view.value1(y - 1e-5)) / 2e-5;
      CHECK(std::abs(view.grad1(y) - fd) <= 1e-5);
    }
  }
}

TEST_CASE("moreau gradient obeys the smoothness constant") {
  std::mt19937 gen(23);
  std::normal_distribution<double> dist(0.0, 3.0);
  for (const Regularizer& reg : all_kinds(1)) {
    const double mu = reg.modulus() > 0 ? 0.6 / reg.modulus() : 0.5;
    const EnvelopeView view(reg, mu);
    const double smooth = view.smoothness();
    for (int trial = 0; trial < 100; ++trial) {
      const double a = dist(gen), b = dist(gen);
      CHECK(std::abs(view.grad1(a) - view.grad1(b)) <= smooth * std::abs(a - b) + 1e-10);
    }
  }
}

TEST_CASE("envelope prox: symmetry, stationarity, grid oracle") {
  const Regularizer l1 = Regularizer::l1(1.0, 1);
  const EnvelopeView env(l1, 1.0);
  CHECK(env.prox(1.0, VectorXd::Zero(1)).norm() == 0.0);

  VectorXd w(1);
  w << 3;
  const VectorXd z = env.prox(1.0, w);
  const double resid = std::abs(env.grad1(z[0]) + (z[0] - 3.0) / 1.0);
  CHECK(resid <= 1e-8 * (1.0 + 3.0));
  const double grid = oracles::grid_argmin(
      [&](double t) { return env.value1(t) + (t - 3.0) * (t - 3.0) / 2.0; }, -4.0, 4.0,
      400001);
  CHECK(z[0] == doctest::Approx(grid).epsilon(1e-4));
}

TEST_CASE("envelope prox: vanishing step recovers the identity") {
  for (const Regularizer& reg : all_kinds(3)) {
    const double mu = reg.modulus() > 0 ? 0.5 / reg.modulus() : 0.5;
    const EnvelopeView view(reg, mu);
    const VectorXd w = random_vector(3, 71);
    CHECK((view.prox(1e-8, w) - w).norm() <= 1e-6 * (1 + w.norm()));
  }
}

TEST_CASE("envelope prox satisfies stationarity on random inputs") {
  std::mt19937 gen(29);
  std::normal_distribution<double> dist(0.0, 4.0);
  std::uniform_real_distribution<double> sigmas(0.05, 3.0);
  for (const Regularizer& reg : all_kinds(1)) {
    const double mu = reg.modulus() > 0 ? 0.5 / reg.modulus() : 0.8;
    const EnvelopeView view(reg, mu);
    for (int trial = 0; trial < 200; ++trial) {
      const double w = dist(gen);
      const double sigma = sigmas(gen);
      const double z = view.prox1(sigma, w);
      CHECK(std::abs(view.grad1(z) + (z - w) / sigma) <= 1e-8 * (1 + std::abs(w)));
    }
  }
}
