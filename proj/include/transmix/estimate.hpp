#ifndef TRANSMIX_ESTIMATE_HPP
#define TRANSMIX_ESTIMATE_HPP

/** @file
 * Order selection and estimation of the parametric part.
 *
 * Stage 1 minimizes the penalized criterion
 *   C_n(k, theta) = M_n(theta) + lambda_n [J(k) + I_k(theta)]
 * over k = 1..k_max. Stage 2 re-minimizes M_n for the selected order over
 * {theta : I(theta) <= 2 I(theta_tilde)}. fit_compact minimizes M_n over a
 * user-supplied compact subset of the interior when k is known.
 *
 * All searches run in an unconstrained parameterization: consecutive
 * translation gaps are softplus-positive increments from m[0] = 0 and Q is a
 * softmax over k*k logits with the last logit pinned to 0. Translations come
 * out sorted, so every evaluated parameter is already canonical.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "transmix/contrast.hpp"
#include "transmix/ecf.hpp"
#include "transmix/errors.hpp"
#include "transmix/model.hpp"
#include "transmix/numeric.hpp"
#include "transmix/optim.hpp"
#include "transmix/parallel.hpp"
#include "transmix/rng.hpp"

namespace transmix {

enum class Objective { Mn, Cn };

struct SelectionConfig {
  int k_max = 5;
  double lambda_coeff = 0.5;  ///< lambda_n = c * n^(-1/4)
  std::function<double(int)> order_cost = [](int k) { return static_cast<double>(k); };  ///< J(k)
  int multistart = 20;
  std::uint64_t seed = 0;
  OptimOptions optim{};
  unsigned threads = 1;  ///< workers for independent restarts; 0 means all cores

  void validate() const {
    if (k_max < 1) throw ConfigError("k_max must be >= 1");
    if (!(lambda_coeff > 0.0)) throw ConfigError("lambda coefficient must be positive");
    if (multistart < 1) throw ConfigError("multistart must be >= 1");
  }
};

/// lambda_n = c n^(-1/4): tends to 0 while sqrt(n) lambda_n = c n^(1/4) diverges.
inline double lambda_n(std::size_t n, double coeff) { return coeff * std::pow(static_cast<double>(n), -0.25); }

/// Compact subset of the interior: ||m||_inf <= m_bound, consecutive gaps
/// >= gap_min, |det Q| >= det_min and every Q entry >= q_floor.
struct CompactSpec {
  double m_bound = 10.0;
  double gap_min = 0.05;
  double det_min = 1e-4;
  double q_floor = 0.0;

  [[nodiscard]] bool contains(const ThetaParams& theta, double slack = 1e-12) const {
    double norm_inf = 0.0;
    for (double v : theta.m) norm_inf = std::max(norm_inf, std::abs(v));
    if (norm_inf > m_bound + slack) return false;
    for (int i = 1; i < theta.k; ++i) {
      if (theta.m[static_cast<std::size_t>(i)] - theta.m[static_cast<std::size_t>(i - 1)] < gap_min - slack) return false;
    }
    if ((theta.q.array() < q_floor - slack).any()) return false;
    return std::abs(theta.q.determinant()) >= det_min - slack;
  }
};

/// Gradient of penalty_I with respect to the free coordinates; theta must be
/// canonical (sorted translations) with finite penalty.
inline Eigen::VectorXd penalty_I_gradient(const ThetaParams& theta) {
  const int k = theta.k;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.free_dim()));
  if (k == 1) return g;
  // -log|det Q|: ambient derivative is -(Q^{-1})^T.
  const Eigen::MatrixXd inv_t = theta.q.inverse().transpose();
  std::size_t arg_max = 0;
  for (std::size_t i = 1; i < theta.m.size(); ++i) {
    if (std::abs(theta.m[i]) > std::abs(theta.m[arg_max])) arg_max = i;
  }
  const double norm_inf = std::abs(theta.m[arg_max]);
  for (int j = 1; j < k; ++j) {
    const auto js = static_cast<std::size_t>(j);
    double d = -1.0 / (theta.m[js] - theta.m[js - 1]);
    if (j + 1 < k) d += 1.0 / (theta.m[js + 1] - theta.m[js]);
    if (js == arg_max) d += 2.0 * (k - 1) / (1.0 + norm_inf) * (theta.m[js] >= 0.0 ? 1.0 : -1.0);
    g(j - 1) = d;
  }
  Eigen::Index idx = k - 1;
  const double anchor = -inv_t(k - 1, k - 1);
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) {
      if (r == k - 1 && s == k - 1) continue;
      g(idx++) = -inv_t(r, s) - anchor;
    }
  }
  return g;
}

/// Maps unconstrained vectors to canonical parameters.
struct Reparam {
  int k = 1;
  double gap_floor = 0.0;
  double q_floor = 0.0;

  [[nodiscard]] Eigen::Index dim() const { return (k - 1) + (k * k - 1); }

  [[nodiscard]] ThetaParams to_theta(const Eigen::VectorXd& x) const {
    ThetaParams theta;
    theta.k = k;
    theta.m.assign(static_cast<std::size_t>(k), 0.0);
    for (int j = 1; j < k; ++j) {
      theta.m[static_cast<std::size_t>(j)] = theta.m[static_cast<std::size_t>(j - 1)] + gap_floor + detail::softplus(x(j - 1));
    }
    theta.q = softmax(x).array() * free_mass() + q_floor;
    return theta;
  }

  /// Approximate inverse of to_theta for warm starts; coordinates at or below
  /// the floors are nudged inside.
  [[nodiscard]] Eigen::VectorXd from_theta(const ThetaParams& theta) const {
    Eigen::VectorXd x(dim());
    for (int j = 1; j < k; ++j) {
      const double excess = std::max(theta.m[static_cast<std::size_t>(j)] - theta.m[static_cast<std::size_t>(j - 1)] - gap_floor, 1e-8);
      x(j - 1) = excess > 30.0 ? excess : std::log(std::expm1(excess));
    }
    const double mass = free_mass();
    auto logit_base = [&](int r, int s) { return std::max((theta.q(r, s) - q_floor) / mass, 1e-12); };
    const double ref = logit_base(k - 1, k - 1);
    Eigen::Index idx = k - 1;
    for (int r = 0; r < k; ++r) {
      for (int s = 0; s < k; ++s) {
        if (r == k - 1 && s == k - 1) continue;
        x(idx++) = std::log(logit_base(r, s) / ref);
      }
    }
    return x;
  }

  /// Converts a free-coordinate gradient at to_theta(x) into a gradient in x.
  [[nodiscard]] Eigen::VectorXd pullback(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_free) const {
    Eigen::VectorXd gx(dim());
    double tail = 0.0;
    for (int j = k - 1; j >= 1; --j) {
      tail += grad_free(j - 1);  // m_j depends on every gap l <= j
      gx(j - 1) = detail::sigmoid(x(j - 1)) * tail;
    }
    const Eigen::MatrixXd p = softmax(x);
    Eigen::MatrixXd amb = Eigen::MatrixXd::Zero(k, k);
    Eigen::Index idx = k - 1;
    for (int r = 0; r < k; ++r) {
      for (int s = 0; s < k; ++s) {
        if (r == k - 1 && s == k - 1) continue;
        amb(r, s) = grad_free(idx++);
      }
    }
    const double mean = (p.array() * amb.array()).sum();
    const double mass = free_mass();
    idx = k - 1;
    for (int r = 0; r < k; ++r) {
      for (int s = 0; s < k; ++s) {
        if (r == k - 1 && s == k - 1) continue;
        gx(idx++) = mass * p(r, s) * (amb(r, s) - mean);
      }
    }
    return gx;
  }

 private:
  [[nodiscard]] double free_mass() const { return 1.0 - static_cast<double>(k * k) * q_floor; }

  [[nodiscard]] Eigen::MatrixXd softmax(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(k, k);
    Eigen::Index idx = k - 1;
    for (int r = 0; r < k; ++r) {
      for (int s = 0; s < k; ++s) {
        if (r == k - 1 && s == k - 1) continue;
        z(r, s) = x(idx++);
      }
    }
    const double top = z.maxCoeff();
    Eigen::MatrixXd e = (z.array() - top).exp().matrix();
    return e / e.sum();
  }
};

/// Contrast evaluator plus the data percentiles used to seed the searches.
class ContrastProblem {
 public:
  ContrastProblem(EcfGrid grid, const ContrastConfig& cfg, std::vector<double> percentiles)
      : eval_(std::move(grid), cfg), cfg_(cfg), percentiles_(std::move(percentiles)) {
    if (percentiles_.size() < 2) throw InvalidParameter("need at least two percentiles");
  }

  static ContrastProblem from_series(const Series& s, const ContrastConfig& cfg) {
    return {ecf_grid_for(s, cfg), cfg, percentiles_of(s)};
  }

  [[nodiscard]] const ContrastEvaluator& evaluator() const { return eval_; }
  [[nodiscard]] const ContrastConfig& config() const { return cfg_; }
  /// Sample size behind the grid; 0 for a population grid.
  [[nodiscard]] std::size_t n() const { return eval_.grid().n; }

  /// Linearly interpolated data quantile, p in [0, 1].
  [[nodiscard]] double quantile(double p) const {
    const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(percentiles_.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, percentiles_.size() - 1);
    return percentiles_[lo] + (pos - static_cast<double>(lo)) * (percentiles_[hi] - percentiles_[lo]);
  }

  static std::vector<double> percentiles_of(const Series& s) {
    std::vector<double> sorted(s.data());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out(101);
    for (std::size_t i = 0; i <= 100; ++i) {
      const double pos = static_cast<double>(i) / 100.0 * static_cast<double>(sorted.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
      out[i] = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    }
    return out;
  }

 private:
  ContrastEvaluator eval_;
  ContrastConfig cfg_;
  std::vector<double> percentiles_;
};

struct RestartDiagnostics {
  int restart = 0;
  double value = std::numeric_limits<double>::infinity();
  std::string status;
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::infinity();
  bool used_simplex = false;
};

struct FixedKFit {
  ThetaParams theta;
  double value = 0.0;     ///< objective at theta (M_n or C_n)
  double mn_value = 0.0;  ///< M_n at theta
  int best_restart = 0;
  int converged_restarts = 0;
  std::vector<RestartDiagnostics> restarts;
};

namespace detail {

// Objective on the unconstrained vector. `wall` returns false for
// parameters outside the admissible set, which then evaluate to +infinity.
struct SearchObjective {
  const ContrastEvaluator* eval = nullptr;
  Reparam reparam;
  bool penalized = false;
  double lambda = 0.0;
  double order_cost = 0.0;
  std::function<bool(const ThetaParams&)> wall;

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    const ThetaParams theta = reparam.to_theta(x);
    grad.setZero(x.size());
    if (wall && !wall(theta)) return std::numeric_limits<double>::infinity();
    Eigen::VectorXd g_free;
    double value = eval->value_and_gradient(theta, g_free);
    if (penalized) {
      const double pen = penalty_I(theta);
      if (!std::isfinite(pen)) return std::numeric_limits<double>::infinity();
      value += lambda * (order_cost + pen);
      if (theta.k > 1) g_free += lambda * penalty_I_gradient(theta);
    }
    if (theta.k > 1) grad = reparam.pullback(x, g_free);
    return value;
  }
};

inline ThetaParams random_start(int k, const ContrastProblem& problem, Rng& rng, bool jitter, double gap_floor,
                                double q_floor, double max_span = std::numeric_limits<double>::infinity()) {
  ThetaParams theta;
  theta.k = k;
  theta.m.assign(static_cast<std::size_t>(k), 0.0);
  boost::random::uniform_real_distribution<double> scale(0.5, 1.5);
  for (int j = 1; j < k; ++j) {
    const double lo = problem.quantile((j - 0.5) / k);
    const double hi = problem.quantile((j + 0.5) / k);
    double gap = std::max(hi - lo, 1e-3);
    if (jitter) gap *= scale(rng);
    theta.m[static_cast<std::size_t>(j)] = theta.m[static_cast<std::size_t>(j - 1)] + std::max(gap, gap_floor + 1e-3);
  }
  // Compress the excess over the gap floor so the start fits in max_span.
  const double floor_total = (k - 1) * gap_floor;
  const double target = floor_total + 0.9 * (max_span - floor_total);
  if (k > 1 && theta.m.back() > target) {
    const double factor = (target - floor_total) / (theta.m.back() - floor_total);
    std::vector<double> m = theta.m;
    for (int j = 1; j < k; ++j) {
      const double gap = m[static_cast<std::size_t>(j)] - m[static_cast<std::size_t>(j - 1)];
      theta.m[static_cast<std::size_t>(j)] = theta.m[static_cast<std::size_t>(j - 1)] + gap_floor + (gap - gap_floor) * factor;
    }
  }
  Eigen::MatrixXd q(k, k);
  if (jitter) {
    boost::random::exponential_distribution<double> expo(1.0);
    for (int r = 0; r < k; ++r) {
      for (int s = 0; s < k; ++s) q(r, s) = expo(rng) + (r == s ? 1.0 : 0.0);
    }
  } else {
    q = Eigen::MatrixXd::Constant(k, k, 1.0 / k) + Eigen::MatrixXd::Identity(k, k);
  }
  q /= q.sum();
  q = q.array() * (1.0 - k * k * q_floor) + q_floor;
  theta.q = q;
  return theta;
}

}  // namespace detail

struct SearchSpec {
  int k = 1;
  Objective objective = Objective::Mn;
  double gap_floor = 0.0;
  double q_floor = 0.0;
  std::function<bool(const ThetaParams&)> wall;
  std::optional<ThetaParams> warm_start;  ///< used as restart 0 when present
  int restarts = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double max_span = std::numeric_limits<double>::infinity();  ///< cap on m_k for random starts
};

/// Multistart search shared by every estimator. Restart r draws its start
/// from stream (seed, stream, r); the winner is the lowest value, ties going
/// to the lower restart index.
inline FixedKFit run_search(const SearchSpec& spec, const ContrastProblem& problem, const SelectionConfig& scfg) {
  const int k = spec.k;
  FixedKFit fit;
  detail::SearchObjective obj;
  obj.eval = &problem.evaluator();
  obj.reparam = Reparam{k, spec.gap_floor, spec.q_floor};
  obj.penalized = spec.objective == Objective::Cn;
  obj.lambda = problem.n() > 0 ? lambda_n(problem.n(), scfg.lambda_coeff) : 0.0;
  obj.order_cost = scfg.order_cost(k);
  obj.wall = spec.wall;

  if (k == 1) {
    ThetaParams theta;
    fit.theta = theta;
    fit.mn_value = problem.evaluator().value(theta);
    fit.value = fit.mn_value + (obj.penalized ? obj.lambda * (obj.order_cost + penalty_I(theta)) : 0.0);
    fit.converged_restarts = 1;
    fit.restarts.push_back({0, fit.value, "no_free_parameters", 0, 0.0, false});
    return fit;
  }

  const GradObjective f = [&obj](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return obj(x, g); };
  // Restarts run independently; the reduction below is sequential, so the
  // winner does not depend on the number of workers.
  const auto restarts = static_cast<std::size_t>(spec.restarts);
  std::vector<OptimResult> results(restarts);
  parallel_for(restarts, scfg.threads, [&](std::size_t r) {
    Rng rng = make_rng(spec.seed, {spec.stream, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)});
    Eigen::VectorXd x0;
    if (r == 0 && spec.warm_start) {
      x0 = obj.reparam.from_theta(*spec.warm_start);
    } else {
      const bool jitter = spec.warm_start ? true : r > 0;
      Eigen::VectorXd scratch;
      for (int attempt = 0; attempt < 50; ++attempt) {
        x0 = obj.reparam.from_theta(detail::random_start(k, problem, rng, jitter || attempt > 0, spec.gap_floor, spec.q_floor,
                                                         spec.max_span));
        if (std::isfinite(obj(x0, scratch))) break;
      }
    }
    results[r] = minimize_robust(f, x0, scfg.optim);
  });
  double best = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    const OptimResult& res = results[r];
    fit.restarts.push_back({static_cast<int>(r), res.value, to_string(res.status), res.iterations, res.grad_norm, res.used_simplex});
    if (res.converged()) ++fit.converged_restarts;
    if (std::isfinite(res.value) && res.value < best) {
      best = res.value;
      fit.best_restart = static_cast<int>(r);
      fit.theta = obj.reparam.to_theta(res.x);
      have_best = true;
    }
  }
  if (!have_best || fit.converged_restarts == 0) {
    std::string msg = "all " + std::to_string(spec.restarts) + " restarts failed for k=" + std::to_string(k) + ":";
    for (const auto& d : fit.restarts) msg += " [" + d.status + " value=" + std::to_string(d.value) + "]";
    throw OptimizationFailure(msg);
  }
  fit.value = best;
  fit.mn_value = problem.evaluator().value(fit.theta);
  return fit;
}

/// Best local minimizer of M_n (or C_n) at fixed k over scfg.multistart starts.
inline FixedKFit fit_fixed_k(int k, const ContrastProblem& problem, const SelectionConfig& scfg, Objective objective) {
  scfg.validate();
  if (k < 1) throw InvalidParameter("k must be >= 1");
  SearchSpec spec;
  spec.k = k;
  spec.objective = objective;
  spec.restarts = scfg.multistart;
  spec.seed = scfg.seed;
  spec.stream = objective == Objective::Cn ? 1 : 0;
  return run_search(spec, problem, scfg);
}

struct OrderRow {
  int k = 0;
  bool ok = false;
  double cn_value = std::numeric_limits<double>::infinity();
  double mn_value = std::numeric_limits<double>::infinity();
  ThetaParams theta;
  int converged_restarts = 0;
  std::string error;
};

struct ParamFit {
  int k_hat = 0;
  ThetaParams theta_tilde;  ///< stage-1 penalized minimizer
  ThetaParams theta_hat;    ///< stage-2 refit
  double mn_value = 0.0;    ///< M_n(theta_hat)
  double cn_value = 0.0;    ///< C_n(k_hat, theta_tilde)
  double lambda = 0.0;
  double penalty_tilde = 0.0;
  double penalty_hat = 0.0;
  std::vector<OrderRow> per_k;
  std::string stage2_status;
  int stage2_iterations = 0;
};

/// Slack added to the stage-2 bound 2 I(theta_tilde).
inline constexpr double kStage2Slack = 1e-9;

/// Stage 2: minimize M_n over {I_k(theta) <= 2 I_k(theta_tilde)}. Restart 0
/// is warm-started at theta_tilde; the penalized stage-1 fit often sits at
/// nearly saturated Q entries, so the remaining restarts start from fresh
/// admissible points. Points outside the set evaluate to +infinity, so the
/// returned parameter always satisfies the constraint.
inline FixedKFit refine_stage2(const ThetaParams& theta_tilde, const ContrastProblem& problem,
                               const SelectionConfig& scfg) {
  const double bound = 2.0 * penalty_I(theta_tilde) + kStage2Slack;
  SearchSpec spec;
  spec.k = theta_tilde.k;
  spec.objective = Objective::Mn;
  spec.warm_start = theta_tilde;
  spec.restarts = scfg.multistart;
  spec.seed = scfg.seed;
  spec.stream = 2;
  spec.wall = [bound](const ThetaParams& t) { return penalty_I(t) <= bound; };
  FixedKFit fit = run_search(spec, problem, scfg);
  if (theta_tilde.k > 1 && !(penalty_I(fit.theta) <= bound)) {
    fit.theta = theta_tilde;
    fit.mn_value = problem.evaluator().value(theta_tilde);
    fit.value = fit.mn_value;
  }
  return fit;
}

/// Penalized order selection followed by the restricted refit.
inline ParamFit select_order(const ContrastProblem& problem, const SelectionConfig& scfg) {
  scfg.validate();
  ParamFit out;
  out.lambda = lambda_n(problem.n(), scfg.lambda_coeff);
  int best_k = 0;
  double best_cn = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= scfg.k_max; ++k) {
    OrderRow row;
    row.k = k;
    try {
      const FixedKFit fit = fit_fixed_k(k, problem, scfg, Objective::Cn);
      row.ok = true;
      row.cn_value = fit.value;
      row.mn_value = fit.mn_value;
      row.theta = fit.theta;
      row.converged_restarts = fit.converged_restarts;
      if (fit.value < best_cn) {
        best_cn = fit.value;
        best_k = k;
      }
    } catch (const OptimizationFailure& e) {
      row.error = e.what();
    }
    out.per_k.push_back(std::move(row));
  }
  if (best_k == 0) throw OptimizationFailure("order selection failed for every k in 1.." + std::to_string(scfg.k_max));
  out.k_hat = best_k;
  out.theta_tilde = out.per_k[static_cast<std::size_t>(best_k - 1)].theta;
  out.cn_value = best_cn;
  out.penalty_tilde = penalty_I(out.theta_tilde);

  const FixedKFit refit = refine_stage2(out.theta_tilde, problem, scfg);
  out.theta_hat = refit.theta;
  out.mn_value = refit.mn_value;
  out.penalty_hat = penalty_I(out.theta_hat);
  out.stage2_status = refit.restarts.at(static_cast<std::size_t>(refit.best_restart)).status;
  out.stage2_iterations = refit.restarts.at(static_cast<std::size_t>(refit.best_restart)).iterations;
  return out;
}

/// Stage 1 at a known order followed by the restricted refit.
inline ParamFit fit_two_stage(int k, const ContrastProblem& problem, const SelectionConfig& scfg) {
  SelectionConfig single = scfg;
  single.validate();
  ParamFit out;
  out.lambda = lambda_n(problem.n(), scfg.lambda_coeff);
  const FixedKFit stage1 = fit_fixed_k(k, problem, single, Objective::Cn);
  out.k_hat = k;
  out.theta_tilde = stage1.theta;
  out.cn_value = stage1.value;
  out.penalty_tilde = penalty_I(stage1.theta);
  out.per_k.push_back({k, true, stage1.value, stage1.mn_value, stage1.theta, stage1.converged_restarts, ""});
  const FixedKFit refit = refine_stage2(stage1.theta, problem, scfg);
  out.theta_hat = refit.theta;
  out.mn_value = refit.mn_value;
  out.penalty_hat = penalty_I(out.theta_hat);
  out.stage2_status = refit.restarts.at(static_cast<std::size_t>(refit.best_restart)).status;
  out.stage2_iterations = refit.restarts.at(static_cast<std::size_t>(refit.best_restart)).iterations;
  return out;
}

/// Checks that spec has a nonempty intersection with the k-population
/// parameter set, using the most favourable parameter: equally spaced
/// translations and the floor-respecting Q with maximal determinant.
inline void check_compact_feasible(int k, const CompactSpec& spec) {
  if (!(spec.m_bound > 0.0) || !(spec.gap_min > 0.0) || !(spec.det_min > 0.0) || !(spec.q_floor >= 0.0)) {
    throw ConfigError("compact set bounds must be positive (q_floor nonnegative)");
  }
  if (k == 1) return;
  if ((k - 1) * spec.gap_min > spec.m_bound) throw ConfigError("compact set is empty: gaps do not fit in m_bound");
  if (static_cast<double>(k * k) * spec.q_floor >= 1.0) throw ConfigError("compact set is empty: q_floor too large");
  const double diag = (1.0 - k * k * spec.q_floor) / k;
  const Eigen::MatrixXd best = Eigen::MatrixXd::Constant(k, k, spec.q_floor) + diag * Eigen::MatrixXd::Identity(k, k);
  if (std::abs(best.determinant()) < spec.det_min) {
    throw ConfigError("compact set is empty: det_min exceeds the largest attainable |det Q|");
  }
}

/// Minimizer of M_n over the compact set K described by spec.
inline ThetaParams fit_compact(int k, const CompactSpec& spec, const ContrastProblem& problem,
                               const SelectionConfig& scfg, const std::optional<ThetaParams>& warm_start = {},
                               FixedKFit* details = nullptr) {
  scfg.validate();
  check_compact_feasible(k, spec);
  SearchSpec search;
  search.k = k;
  search.objective = Objective::Mn;
  search.gap_floor = spec.gap_min;
  search.q_floor = spec.q_floor;
  search.restarts = scfg.multistart;
  search.seed = scfg.seed;
  search.stream = 3;
  search.max_span = spec.m_bound;
  search.wall = [spec](const ThetaParams& t) {
    double norm_inf = 0.0;
    for (double v : t.m) norm_inf = std::max(norm_inf, std::abs(v));
    return norm_inf <= spec.m_bound && std::abs(t.q.determinant()) >= spec.det_min;
  };
  if (warm_start && spec.contains(*warm_start)) search.warm_start = *warm_start;
  FixedKFit fit = run_search(search, problem, scfg);
  if (details) *details = fit;
  return fit.theta;
}

/// Data-driven default for the weight half-width: a coarse two-population fit
/// estimates the translation spread, then default_halfwidth converts it.
inline double prescan_halfwidth(const Series& s, std::uint64_t seed) {
  ContrastConfig coarse;
  coarse.halfwidth = 2.0;
  coarse.quad_order = 16;
  const ContrastProblem problem = ContrastProblem::from_series(s, coarse);
  SelectionConfig scfg;
  scfg.multistart = 4;
  scfg.seed = seed;
  try {
    const FixedKFit fit = fit_fixed_k(2, problem, scfg, Objective::Mn);
    return default_halfwidth(fit.theta.m.back());
  } catch (const OptimizationFailure&) {
    return default_halfwidth(0.0);
  }
}

}  // namespace transmix

#endif  // TRANSMIX_ESTIMATE_HPP
