#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "transmix/optim.hpp"

namespace transmix {
namespace {

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  g.resize(2);
  const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
  g(0) = -2.0 * a - 400.0 * x(0) * b;
  g(1) = 200.0 * b;
  return a * a + 100.0 * b * b;
}

TEST(Bfgs, Rosenbrock) {
  const OptimResult r = minimize_bfgs(rosenbrock, Eigen::Vector2d(-1.2, 1.0));
  EXPECT_TRUE(r.converged()) << to_string(r.status);
  EXPECT_NEAR(r.x(0), 1.0, 1e-6);
  EXPECT_NEAR(r.x(1), 1.0, 1e-6);
  EXPECT_FALSE(r.used_simplex);
}

TEST(Bfgs, QuadraticGradientSmall) {
  const GradObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = 2.0 * (x.array() - 3.0).matrix();
    return (x.array() - 3.0).square().sum();
  };
  const OptimResult r = minimize_bfgs(f, Eigen::VectorXd::Zero(4));
  EXPECT_EQ(r.status, OptimStatus::gradient_small);
  EXPECT_LE(r.grad_norm, 1e-10);
}

TEST(Bfgs, NonFiniteStart) {
  const GradObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(x.size());
    return std::numeric_limits<double>::infinity();
  };
  EXPECT_EQ(minimize_bfgs(f, Eigen::VectorXd::Zero(2)).status, OptimStatus::non_finite_start);
}

TEST(Bfgs, BacksAwayFromForbiddenRegion) {
  // Minimum of the quadratic lies at x = 2, but x > 1 is forbidden.
  const GradObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(1);
    if (x(0) > 1.0) return std::numeric_limits<double>::infinity();
    g(0) = 2.0 * (x(0) - 2.0) - 1.0 / (1.0 - x(0) + 1e-300);
    return (x(0) - 2.0) * (x(0) - 2.0) + std::log(1.0 - x(0) + 1e-300);
  };
  const OptimResult r = minimize_robust(f, Eigen::VectorXd::Zero(1));
  EXPECT_LE(r.x(0), 1.0);
  EXPECT_TRUE(std::isfinite(r.value));
}

TEST(Simplex, FindsMinimumWithoutGradients) {
  const ValueObjective f = [](const Eigen::VectorXd& x) { return std::abs(x(0) - 1.0) + std::abs(x(1) + 2.0); };
  const OptimResult r = minimize_simplex(f, Eigen::Vector2d(0.0, 0.0), 0.5);
  EXPECT_TRUE(r.used_simplex);
  EXPECT_NEAR(r.x(0), 1.0, 1e-5);
  EXPECT_NEAR(r.x(1), -2.0, 1e-5);
}

TEST(Robust, ZeroDimensional) {
  const GradObjective f = [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
    g.resize(0);
    return 5.0;
  };
  const OptimResult r = minimize_robust(f, Eigen::VectorXd(0));
  EXPECT_TRUE(r.converged());
  EXPECT_EQ(r.value, 5.0);
}

}  // namespace
}  // namespace transmix
