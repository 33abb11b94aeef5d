#ifndef TRANSMIX_OPTIM_HPP
#define TRANSMIX_OPTIM_HPP

// Local minimizers used by the estimators: BFGS with a backtracking Armijo
// line search, and Nelder-Mead as a derivative-free fallback. Objectives may
// return +infinity to mark forbidden points; both methods back away from them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace transmix {

struct OptimOptions {
  double gtol = 1e-10;      ///< stop when ||grad||_inf <= gtol
  double ftol = 1e-13;      ///< stop when the relative decrease falls below ftol
  double xtol = 1e-12;      ///< stop when the step length falls below xtol (1 + ||x||)
  int max_iter = 500;
  int simplex_max_evals = 4000;
};

enum class OptimStatus { gradient_small, function_stalled, step_small, max_iterations, line_search_failed, non_finite_start };

inline const char* to_string(OptimStatus s) {
  switch (s) {
    case OptimStatus::gradient_small: return "gradient_small";
    case OptimStatus::function_stalled: return "function_stalled";
    case OptimStatus::step_small: return "step_small";
    case OptimStatus::max_iterations: return "max_iterations";
    case OptimStatus::line_search_failed: return "line_search_failed";
    case OptimStatus::non_finite_start: return "non_finite_start";
  }
  return "unknown";
}

struct OptimResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  OptimStatus status = OptimStatus::max_iterations;
  bool used_simplex = false;

  [[nodiscard]] bool converged() const {
    return status == OptimStatus::gradient_small || status == OptimStatus::function_stalled ||
           status == OptimStatus::step_small;
  }
};

/// f(x, grad) returns the value and fills grad (same length as x).
using GradObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using ValueObjective = std::function<double(const Eigen::VectorXd&)>;

inline OptimResult minimize_bfgs(const GradObjective& f, Eigen::VectorXd x0, const OptimOptions& opt = {}) {
  OptimResult res;
  const Eigen::Index dim = x0.size();
  res.x = std::move(x0);
  Eigen::VectorXd g(dim);
  double fx = f(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(fx) || !g.allFinite()) {
    res.value = fx;
    res.status = OptimStatus::non_finite_start;
    return res;
  }
  if (dim == 0) {
    res.value = fx;
    res.grad_norm = 0.0;
    res.status = OptimStatus::gradient_small;
    return res;
  }

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(dim, dim);
  bool fresh = true;
  Eigen::VectorXd x_new(dim), g_new(dim);
  int stall = 0;

  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= opt.gtol) {
      res.status = OptimStatus::gradient_small;
      break;
    }
    Eigen::VectorXd dir = -hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      fresh = true;
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    if (fresh) step = std::min(1.0, 1.0 / std::max(dir.norm(), 1e-300));

    bool accepted = false;
    double f_new = fx;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = res.x + step * dir;
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        hinv.setIdentity();
        fresh = true;
        continue;
      }
      res.status = OptimStatus::line_search_failed;
      break;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double f_old = fx;
    res.x = x_new;
    g = g_new;
    fx = f_new;

    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (fresh) hinv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      hinv += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      fresh = false;
    }

    if (s.norm() <= opt.xtol * (1.0 + res.x.norm())) {
      res.status = OptimStatus::step_small;
      ++res.iterations;
      break;
    }
    if (f_old - fx <= opt.ftol * std::max(std::abs(fx), 1e-300)) {
      if (++stall >= 3) {
        res.status = OptimStatus::function_stalled;
        ++res.iterations;
        break;
      }
    } else {
      stall = 0;
    }
  }
  res.value = fx;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  if (res.grad_norm <= opt.gtol) res.status = OptimStatus::gradient_small;
  return res;
}

/// Nelder-Mead with dimension-adaptive coefficients (Gao and Han).
inline OptimResult minimize_simplex(const ValueObjective& f, const Eigen::VectorXd& x0, double initial_step,
                                    const OptimOptions& opt = {}) {
  OptimResult res;
  const Eigen::Index dim = x0.size();
  res.used_simplex = true;
  res.x = x0;
  res.value = f(x0);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) {
    res.status = OptimStatus::non_finite_start;
    return res;
  }
  if (dim == 0) {
    res.status = OptimStatus::step_small;
    return res;
  }
  const double n = static_cast<double>(dim);
  const double alpha = 1.0, beta = 1.0 + 2.0 / n, gamma = 0.75 - 0.5 / n, delta = 1.0 - 1.0 / n;

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(dim + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(dim + 1), res.value);
  for (Eigen::Index i = 0; i < dim; ++i) {
    auto& p = pts[static_cast<std::size_t>(i + 1)];
    p(i) += initial_step;
    vals[static_cast<std::size_t>(i + 1)] = f(p);
    ++res.evaluations;
  }
  std::vector<std::size_t> order(pts.size());
  res.status = OptimStatus::max_iterations;
  while (res.evaluations < opt.simplex_max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = vals[a], vb = vals[b];
      if (std::isnan(va)) return false;
      if (std::isnan(vb)) return true;
      return va < vb;
    });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    double spread = 0.0;
    for (std::size_t i = 1; i < order.size(); ++i) {
      spread = std::max(spread, (pts[order[i]] - pts[best]).lpNorm<Eigen::Infinity>());
    }
    const double fb = vals[best], fw = vals[worst];
    if (spread <= opt.xtol * (1.0 + pts[best].norm()) * 1e2) {
      res.status = OptimStatus::step_small;
      break;
    }
    if (std::isfinite(fw) && std::abs(fw - fb) <= opt.ftol * std::max(std::abs(fb), 1e-300)) {
      res.status = OptimStatus::function_stalled;
      break;
    }
    ++res.iterations;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += pts[order[i]];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + alpha * (centroid - pts[worst]);
    const double fr = f(xr);
    ++res.evaluations;
    if (fr < fb) {
      const Eigen::VectorXd xe = centroid + beta * (xr - centroid);
      const double fe = f(xe);
      ++res.evaluations;
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < fw;
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + gamma * (xr - centroid))
                                       : Eigen::VectorXd(centroid - gamma * (centroid - pts[worst]));
    const double fc = f(xc);
    ++res.evaluations;
    if ((outside && fc <= fr) || (!outside && fc < fw)) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 1; i < order.size(); ++i) {
      auto& p = pts[order[i]];
      p = pts[best] + delta * (p - pts[best]);
      vals[order[i]] = f(p);
      ++res.evaluations;
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end(), [](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a < b;
  });
  const auto bi = static_cast<std::size_t>(it - vals.begin());
  res.x = pts[bi];
  res.value = vals[bi];
  return res;
}

/// BFGS, then Nelder-Mead from the BFGS end point if the line search broke
/// down. The better of the two results is returned.
inline OptimResult minimize_robust(const GradObjective& f, const Eigen::VectorXd& x0, const OptimOptions& opt = {}) {
  OptimResult res = minimize_bfgs(f, x0, opt);
  if (res.status != OptimStatus::line_search_failed && res.status != OptimStatus::max_iterations) return res;
  Eigen::VectorXd scratch;
  const ValueObjective value_only = [&](const Eigen::VectorXd& x) {
    scratch.resize(x.size());
    return f(x, scratch);
  };
  OptimResult nm = minimize_simplex(value_only, res.x, 0.05, opt);
  nm.evaluations += res.evaluations;
  nm.iterations += res.iterations;
  if (nm.value <= res.value) {
    Eigen::VectorXd g(nm.x.size());
    f(nm.x, g);
    nm.grad_norm = g.lpNorm<Eigen::Infinity>();
    return nm;
  }
  return res;
}

}  // namespace transmix

#endif  // TRANSMIX_OPTIM_HPP
