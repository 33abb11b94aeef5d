#ifndef TRANSMIX_DENSITY_HPP
#define TRANSMIX_DENSITY_HPP

/** @file
 * Noise density estimation once the parametric part is fixed.
 *
 * The sieve F_p holds p-component Gaussian mixtures with locations in
 * [-A_p, A_p] and scales in [b_p, B]. For each p the marginal
 * pseudo-likelihood
 *   l_n(f) = (1/n) sum_i log sum_j mu(j) f(Y_i - m_j)
 * is maximized by truncated EM, and p is chosen by minimizing
 *   D_n(p) = -l_n(f_p) + pen(p, n).
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "transmix/ecf.hpp"
#include "transmix/errors.hpp"
#include "transmix/model.hpp"
#include "transmix/numeric.hpp"
#include "transmix/parallel.hpp"
#include "transmix/rng.hpp"

namespace transmix {

/// Element of F_p: sum_i pi_i N(alpha_i, u_i^2).
struct GaussianMixtureDensity {
  std::vector<double> pi;
  std::vector<double> alpha;
  std::vector<double> u;

  [[nodiscard]] int p() const { return static_cast<int>(pi.size()); }

  [[nodiscard]] double operator()(double x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
      const double z = (x - alpha[i]) / u[i];
      acc += pi[i] * std::exp(-0.5 * z * z) / (u[i] * std::sqrt(2.0 * std::numbers::pi));
    }
    return acc;
  }
};

/// Box constraints of F_p.
struct SieveBounds {
  double a_p = 0.0;      ///< |alpha_i| <= a_p
  double b_p = 0.0;      ///< u_i >= b_p
  double b_upper = 0.0;  ///< u_i <= b_upper

  [[nodiscard]] bool contains(const GaussianMixtureDensity& f, double slack = 1e-12) const {
    double total = 0.0;
    for (std::size_t i = 0; i < f.pi.size(); ++i) {
      if (f.pi[i] < -slack) return false;
      if (std::abs(f.alpha[i]) > a_p + slack) return false;
      if (f.u[i] < b_p - slack || f.u[i] > b_upper + slack) return false;
      total += f.pi[i];
    }
    return std::abs(total - 1.0) <= 1e-9;
  }
};

struct SieveConfig {
  int p_min = 2;
  int p_max = 10;
  double b0 = 1.0;
  double a0 = 2.0;
  double b_upper = 0.0;  ///< B; 0 means 3 x sample standard deviation
  double kappa = 1.0 / 3.0;
  std::function<double(int)> x_p = [](int p) { return static_cast<double>(p); };
  int restarts = 3;
  int max_iter = 500;
  double tol = 1e-8;  ///< stop when the l_n gain falls below tol
  std::uint64_t seed = 0;

  void validate() const {
    if (p_min < 2) throw ConfigError("p_min must be >= 2");
    if (p_max < p_min) throw ConfigError("p_max must be >= p_min");
    if (!(b0 > 0.0) || !(a0 > 0.0)) throw ConfigError("b0 and a0 must be positive");
    if (b_upper < 0.0) throw ConfigError("B must be positive (or 0 for the default)");
    if (!(kappa >= 0.0)) throw ConfigError("kappa must be nonnegative");
    if (restarts < 1 || max_iter < 1) throw ConfigError("restarts and max_iter must be >= 1");
  }

  [[nodiscard]] double b_p(int p) const {
    const double lp = std::log(static_cast<double>(p));
    return b0 * lp * lp / p;
  }
  [[nodiscard]] double a_p(int p) const { return a0 * std::abs(std::log(b_p(p))); }

  /// Bounds for F_p. If b_p exceeds B the scale box collapses to {B}.
  [[nodiscard]] SieveBounds bounds(int p, const Series& s) const {
    SieveBounds b;
    b.b_upper = b_upper > 0.0 ? b_upper : 3.0 * sample_sd(s);
    b.b_p = std::min(b_p(p), b.b_upper);
    b.a_p = a_p(p);
    return b;
  }

  static double sample_sd(const Series& s) {
    const double n = static_cast<double>(s.size());
    const double mean = detail::pairwise_sum(s.data()) / n;
    std::vector<double> sq(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) sq[i] = (s[i] - mean) * (s[i] - mean);
    return std::sqrt(detail::pairwise_sum(sq) / (n - 1.0));
  }
};

/// pen(p, n) = 3 kappa / n (k p + x_p) log n.
inline double sieve_penalty(int p, std::size_t n, int k, const SieveConfig& cfg) {
  if (p < 2 || n < 2) throw InvalidParameter("penalty needs p >= 2 and n >= 2");
  const double dn = static_cast<double>(n);
  return 3.0 * cfg.kappa / dn * (k * p + cfg.x_p(p)) * std::log(dn);
}

namespace detail {

inline double log_normal_pdf(double z, double u) {
  return -0.5 * z * z / (u * u) - std::log(u) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// log of pi_i mu_j phi_{u_i}(y - m_j - alpha_i) for every (i, j); -inf where
// a weight vanishes.
inline void component_logs(const GaussianMixtureDensity& f, const std::vector<double>& mu, const std::vector<double>& m,
                           double y, std::vector<double>& out) {
  const std::size_t p = f.pi.size(), k = mu.size();
  out.resize(p * k);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double w = f.pi[i] * mu[j];
      out[i * k + j] = w > 0.0 ? std::log(w) + log_normal_pdf(y - m[j] - f.alpha[i], f.u[i])
                               : -std::numeric_limits<double>::infinity();
    }
  }
}

inline double log_sum_exp(const std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - top);
  return top + std::log(acc);
}

}  // namespace detail

/// l_n(f) with mu = row sums of theta.q and translations theta.m.
inline double marginal_loglik(const GaussianMixtureDensity& f, const Series& s, const ThetaParams& theta) {
  const std::vector<double> mu = marginal_mu(theta);
  std::vector<double> terms(s.size()), logs;
  for (std::size_t t = 0; t < s.size(); ++t) {
    detail::component_logs(f, mu, theta.m, s[t], logs);
    terms[t] = detail::log_sum_exp(logs);
  }
  return detail::pairwise_sum(terms) / static_cast<double>(s.size());
}

struct EmStepInfo {
  bool truncated = false;  ///< some alpha or scale update hit a bound
  double loglik_before = 0.0;  ///< l_n of the input density, a by-product of the E step
};

/// One truncated EM update. Components with zero responsibility keep their
/// location and scale.
inline GaussianMixtureDensity em_step(const GaussianMixtureDensity& f, const Series& s, const ThetaParams& theta,
                                      const SieveBounds& bounds, EmStepInfo* info = nullptr) {
  const std::vector<double> mu = marginal_mu(theta);
  const std::size_t p = f.pi.size(), k = mu.size(), n = s.size();
  // Responsibilities, stored per (i, j) pair so the sums below stay pairwise.
  std::vector<std::vector<double>> resp(p * k, std::vector<double>(n));
  std::vector<double> logs, norms(n);
  for (std::size_t t = 0; t < n; ++t) {
    detail::component_logs(f, mu, theta.m, s[t], logs);
    norms[t] = detail::log_sum_exp(logs);
    for (std::size_t c = 0; c < p * k; ++c) resp[c][t] = std::exp(logs[c] - norms[t]);
  }

  GaussianMixtureDensity out = f;
  bool truncated = false;
  std::vector<double> buf(n * k);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < k; ++j) std::copy(resp[i * k + j].begin(), resp[i * k + j].end(), buf.begin() + static_cast<std::ptrdiff_t>(j * n));
    const double mass = detail::pairwise_sum(buf);
    out.pi[i] = mass / static_cast<double>(n);
    if (!(mass > 0.0)) continue;

    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t t = 0; t < n; ++t) buf[j * n + t] = resp[i * k + j][t] * (s[t] - theta.m[j]);
    }
    const double raw_alpha = detail::pairwise_sum(buf) / mass;
    out.alpha[i] = std::clamp(raw_alpha, -bounds.a_p, bounds.a_p);
    truncated = truncated || out.alpha[i] != raw_alpha;

    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t t = 0; t < n; ++t) {
        const double z = s[t] - theta.m[j] - out.alpha[i];
        buf[j * n + t] = resp[i * k + j][t] * z * z;
      }
    }
    const double raw_u = std::sqrt(detail::pairwise_sum(buf) / mass);
    out.u[i] = std::clamp(raw_u, bounds.b_p, bounds.b_upper);
    truncated = truncated || out.u[i] != raw_u;
  }
  const double total = std::accumulate(out.pi.begin(), out.pi.end(), 0.0);
  for (double& w : out.pi) w /= total;
  if (info) {
    info->truncated = truncated;
    info->loglik_before = detail::pairwise_sum(norms) / static_cast<double>(n);
  }
  return out;
}

struct EmTrace {
  std::vector<double> loglik;      ///< l_n before the first step and after each step
  std::vector<bool> truncated;     ///< per step
  int iterations = 0;
  bool decrease_without_truncation = false;  ///< ascent violated by more than 1e-9
  bool decrease_with_truncation = false;
};

/// Runs EM from f0 until the l_n gain drops below cfg.tol or cfg.max_iter steps.
inline GaussianMixtureDensity run_em(GaussianMixtureDensity f, const Series& s, const ThetaParams& theta,
                                     const SieveBounds& bounds, const SieveConfig& cfg, EmTrace* trace = nullptr) {
  EmTrace local;
  EmTrace& tr = trace ? *trace : local;
  tr = EmTrace{};
  // l_n of each iterate comes out of the following E step; only the last
  // iterate needs a separate evaluation.
  double ll = 0.0;
  bool pending = false;  // a step whose outcome is not yet scored
  bool last_truncated = false;
  for (int it = 0; it <= cfg.max_iter; ++it) {
    EmStepInfo info;
    GaussianMixtureDensity next;
    if (it < cfg.max_iter) next = em_step(f, s, theta, bounds, &info);
    else info.loglik_before = marginal_loglik(f, s, theta);
    const double ll_f = info.loglik_before;
    tr.loglik.push_back(ll_f);
    if (pending) {
      tr.truncated.push_back(last_truncated);
      if (ll_f < ll - 1e-9) (last_truncated ? tr.decrease_with_truncation : tr.decrease_without_truncation) = true;
      if (ll_f - ll < cfg.tol) break;
    }
    if (it == cfg.max_iter) break;
    ll = ll_f;
    f = std::move(next);
    pending = true;
    last_truncated = info.truncated;
    tr.iterations = it + 1;
  }
  return f;
}

/// Starting point for EM: locations at p quantiles of the data centred by the
/// mean translation, common scale from the residual spread, uniform weights.
/// Restarts other than 0 jitter all three.
inline GaussianMixtureDensity sieve_init(int p, const Series& s, const ThetaParams& theta, const SieveBounds& bounds,
                                         Rng& rng, bool jitter) {
  const std::vector<double> mu = marginal_mu(theta);
  double shift = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) shift += mu[j] * theta.m[j];
  std::vector<double> centred(s.data());
  for (double& v : centred) v -= shift;
  std::sort(centred.begin(), centred.end());
  const double sd = SieveConfig::sample_sd(s);

  GaussianMixtureDensity f;
  f.pi.assign(static_cast<std::size_t>(p), 1.0 / p);
  f.alpha.resize(static_cast<std::size_t>(p));
  f.u.resize(static_cast<std::size_t>(p));
  boost::random::normal_distribution<double> nudge(0.0, 0.1 * sd);
  boost::random::uniform_real_distribution<double> scale(0.7, 1.3);
  boost::random::exponential_distribution<double> expo(1.0);
  const double u0 = sd / std::sqrt(static_cast<double>(p));
  for (int i = 0; i < p; ++i) {
    const double pos = (i + 0.5) / p * static_cast<double>(centred.size() - 1);
    double a = centred[static_cast<std::size_t>(std::lround(pos))];
    double u = u0;
    if (jitter) {
      a += nudge(rng);
      u *= scale(rng);
      f.pi[static_cast<std::size_t>(i)] = expo(rng) + 0.1;
    }
    f.alpha[static_cast<std::size_t>(i)] = std::clamp(a, -bounds.a_p, bounds.a_p);
    f.u[static_cast<std::size_t>(i)] = std::clamp(u, bounds.b_p, bounds.b_upper);
  }
  const double total = std::accumulate(f.pi.begin(), f.pi.end(), 0.0);
  for (double& w : f.pi) w /= total;
  return f;
}

struct SieveFit {
  GaussianMixtureDensity f;
  double loglik = -std::numeric_limits<double>::infinity();
  int best_restart = 0;
  std::vector<EmTrace> traces;  ///< one per restart
};

/// Best of cfg.restarts EM runs in F_p. Restart r draws from (seed, p, r).
inline SieveFit fit_sieve(int p, const Series& s, const ThetaParams& theta, const SieveConfig& cfg) {
  cfg.validate();
  if (p < 2) throw InvalidParameter("p must be >= 2");
  const SieveBounds bounds = cfg.bounds(p, s);
  SieveFit fit;
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(r)});
    EmTrace trace;
    GaussianMixtureDensity f = run_em(sieve_init(p, s, theta, bounds, rng, r > 0), s, theta, bounds, cfg, &trace);
    const double ll = trace.loglik.back();
    if (ll > fit.loglik) {
      fit.loglik = ll;
      fit.f = std::move(f);
      fit.best_restart = r;
    }
    fit.traces.push_back(std::move(trace));
  }
  return fit;
}

/// Embeds f (p - 1 components) in F_p by splitting its heaviest component
/// into two halves nudged apart by 1e-3 of its scale, then clamps to bounds.
inline GaussianMixtureDensity split_heaviest(const GaussianMixtureDensity& f, const SieveBounds& bounds) {
  GaussianMixtureDensity g = f;
  const auto i = static_cast<std::size_t>(std::max_element(f.pi.begin(), f.pi.end()) - f.pi.begin());
  const double delta = 1e-3 * f.u[i];
  g.pi[i] *= 0.5;
  g.pi.push_back(g.pi[i]);
  g.alpha[i] -= delta;
  g.alpha.push_back(f.alpha[i] + delta);
  g.u.push_back(f.u[i]);
  for (std::size_t c = 0; c < g.pi.size(); ++c) {
    g.alpha[c] = std::clamp(g.alpha[c], -bounds.a_p, bounds.a_p);
    g.u[c] = std::clamp(g.u[c], bounds.b_p, bounds.b_upper);
  }
  return g;
}

struct DensityRow {
  int p = 0;
  double loglik = 0.0;
  double pen = 0.0;
  double d_n = 0.0;
  int em_iterations = 0;
  bool ascent_violation = false;  ///< decrease without truncation in any restart
  bool truncation_decrease = false;
  bool from_smaller = false;  ///< best fit came from the split p - 1 solution
};

struct DensityFit {
  int p_hat = 0;
  GaussianMixtureDensity f_hat;
  ThetaParams theta_hat;
  std::vector<DensityRow> rows;
};

/// Minimizes D_n(p) over p_min..p_max; ties go to the smaller p. Per-p fits
/// are independent and run on up to `threads` workers.
inline DensityFit select_p(const Series& s, const ThetaParams& theta, const SieveConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const auto count = static_cast<std::size_t>(cfg.p_max - cfg.p_min + 1);
  std::vector<SieveFit> fits(count);
  parallel_for(count, threads, [&](std::size_t i) { fits[i] = fit_sieve(cfg.p_min + static_cast<int>(i), s, theta, cfg); });
  // F_p is nested in F_{p+1} once b_p decreases and A_p increases; where EM
  // found a worse optimum at p than at p - 1, retry from the split p - 1 fit.
  std::vector<bool> from_smaller(count, false);
  for (std::size_t i = 1; i < count; ++i) {
    if (fits[i].loglik >= fits[i - 1].loglik) continue;
    const int p = cfg.p_min + static_cast<int>(i);
    const SieveBounds bounds = cfg.bounds(p, s);
    EmTrace trace;
    GaussianMixtureDensity f = run_em(split_heaviest(fits[i - 1].f, bounds), s, theta, bounds, cfg, &trace);
    const double ll = trace.loglik.back();
    if (ll > fits[i].loglik) {
      fits[i].loglik = ll;
      fits[i].f = std::move(f);
      fits[i].best_restart = static_cast<int>(fits[i].traces.size());
      from_smaller[i] = true;
    }
    fits[i].traces.push_back(std::move(trace));
  }

  DensityFit out;
  out.theta_hat = theta;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    DensityRow row;
    row.p = cfg.p_min + static_cast<int>(i);
    row.loglik = fits[i].loglik;
    row.pen = sieve_penalty(row.p, s.size(), theta.k, cfg);
    row.d_n = -row.loglik + row.pen;
    row.em_iterations = fits[i].traces[static_cast<std::size_t>(fits[i].best_restart)].iterations;
    row.from_smaller = from_smaller[i];
    for (const auto& tr : fits[i].traces) {
      row.ascent_violation = row.ascent_violation || tr.decrease_without_truncation;
      row.truncation_decrease = row.truncation_decrease || tr.decrease_with_truncation;
    }
    if (row.d_n < best) {
      best = row.d_n;
      out.p_hat = row.p;
      out.f_hat = fits[i].f;
    }
    out.rows.push_back(row);
  }
  return out;
}

/// s(x) = sum_j mu(j) f(x - m_j).
struct MixtureMarginal {
  GaussianMixtureDensity f;
  std::vector<double> mu;
  std::vector<double> m;

  double operator()(double x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) acc += mu[j] * f(x - m[j]);
    return acc;
  }
};

inline MixtureMarginal mixture_marginal(const GaussianMixtureDensity& f, const ThetaParams& theta) {
  return {f, marginal_mu(theta), theta.m};
}

using DensityFn = std::function<double(double)>;

/// Integration domain for distances between densities: [lo, hi] split at the
/// listed breakpoints (kinks of either density).
struct IntegrationRange {
  double lo = -20.0;
  double hi = 20.0;
  std::vector<double> breakpoints;
};

namespace detail {

inline double integrate_pieces(const DensityFn& g, const IntegrationRange& range) {
  std::vector<double> cuts{range.lo};
  for (double b : range.breakpoints) {
    if (b > range.lo && b < range.hi) cuts.push_back(b);
  }
  cuts.push_back(range.hi);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, cuts[i], cuts[i + 1], 15, 1e-12);
  }
  return total;
}

}  // namespace detail

/// h^2(s1, s2) = (1/2) int (sqrt s1 - sqrt s2)^2, clamped to [0, 1].
inline double hellinger_sq(const DensityFn& s1, const DensityFn& s2, const IntegrationRange& range = {}) {
  const DensityFn g = [&](double x) {
    const double d = std::sqrt(std::max(s1(x), 0.0)) - std::sqrt(std::max(s2(x), 0.0));
    return 0.5 * d * d;
  };
  return std::clamp(detail::integrate_pieces(g, range), 0.0, 1.0);
}

/// int |s1 - s2|.
inline double l1_distance(const DensityFn& s1, const DensityFn& s2, const IntegrationRange& range = {}) {
  const DensityFn g = [&](double x) { return std::abs(s1(x) - s2(x)); };
  return detail::integrate_pieces(g, range);
}

inline double integrate_density(const DensityFn& s, const IntegrationRange& range = {}) {
  return detail::integrate_pieces(s, range);
}

}  // namespace transmix

#endif  // TRANSMIX_DENSITY_HPP
