#ifndef TRANSMIX_INFERENCE_HPP
#define TRANSMIX_INFERENCE_HPP

/** @file
 * Sampling variability of the parametric estimate.
 *
 * The covariance of sqrt(n)(theta_hat - theta*) is estimated by a circular
 * moving-block bootstrap: each replicate is refitted on the compact set and
 * Sigma is n times the empirical covariance of the replicate estimates in
 * free coordinates.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "transmix/contrast.hpp"
#include "transmix/ecf.hpp"
#include "transmix/errors.hpp"
#include "transmix/estimate.hpp"
#include "transmix/model.hpp"
#include "transmix/parallel.hpp"
#include "transmix/rng.hpp"

namespace transmix {

/// ceil(n^(1/3)).
inline std::size_t default_block_len(std::size_t n) {
  auto len = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-12));
  return std::max<std::size_t>(len, 1);
}

/// Draws a resampled series of the same length.
using Resampler = std::function<Series(const Series&, std::size_t block_len, Rng&)>;

/// Concatenates blocks of block_len consecutive values starting at uniform
/// positions, wrapping around the end of the series.
inline Series circular_block_resample(const Series& s, std::size_t block_len, Rng& rng) {
  const std::size_t n = s.size();
  boost::random::uniform_int_distribution<std::size_t> start(0, n - 1);
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    const std::size_t b = start(rng);
    for (std::size_t i = 0; i < block_len && out.size() < n; ++i) out.push_back(s[(b + i) % n]);
  }
  return Series(std::move(out));
}

struct BootstrapConfig {
  int replicates = 200;
  std::size_t block_len = 0;  ///< 0 selects ceil(n^(1/3))
  int refit_multistart = 2;   ///< restarts per replicate, the first warm-started at theta_hat
  double max_failure_rate = 0.1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  Resampler resampler = circular_block_resample;
};

struct CovarianceEstimate {
  Eigen::MatrixXd sigma;
  std::string method = "bootstrap";
  int replicates = 0;  ///< successful replicates
  int failures = 0;
  std::size_t block_len = 0;
  std::vector<Eigen::VectorXd> draws;  ///< free coordinates of each successful replicate
};

/// Block bootstrap estimate of Sigma around theta_hat.
inline CovarianceEstimate bootstrap_sigma(const Series& s, const ThetaParams& theta_hat, const CompactSpec& spec,
                                          const ContrastConfig& ccfg, const SelectionConfig& scfg,
                                          const BootstrapConfig& bcfg) {
  const std::size_t n = s.size();
  const std::size_t block = bcfg.block_len == 0 ? default_block_len(n) : bcfg.block_len;
  if (bcfg.replicates < 50) throw ConfigError("bootstrap needs at least 50 replicates");
  if (block < 1 || block > n / 2) throw ConfigError("block length must lie in [1, n/2]");
  if (!bcfg.resampler) throw ConfigError("no resampler supplied");
  SelectionConfig refit = scfg;
  refit.multistart = bcfg.refit_multistart;
  refit.threads = 1;  // parallelism is over replicates

  const auto reps = static_cast<std::size_t>(bcfg.replicates);
  std::vector<std::optional<Eigen::VectorXd>> results(reps);
  parallel_for(reps, bcfg.threads, [&](std::size_t r) {
    Rng rng = make_rng(bcfg.seed, {0xB007u, r});
    const Series y = bcfg.resampler(s, block, rng);
    // Restart seeds are shared by all replicates, so the only source of
    // variation between replicates is the resampling itself.
    try {
      const ContrastProblem problem = ContrastProblem::from_series(y, ccfg);
      results[r] = free_coords(fit_compact(theta_hat.k, spec, problem, refit, theta_hat));
    } catch (const OptimizationFailure&) {
    }
  });

  CovarianceEstimate out;
  out.block_len = block;
  for (auto& r : results) {
    if (r) out.draws.push_back(std::move(*r));
    else ++out.failures;
  }
  out.replicates = static_cast<int>(out.draws.size());
  if (out.failures > bcfg.max_failure_rate * bcfg.replicates) {
    throw OptimizationFailure(std::to_string(out.failures) + " of " + std::to_string(bcfg.replicates) +
                              " bootstrap refits failed");
  }
  const auto dim = static_cast<Eigen::Index>(theta_hat.free_dim());
  out.sigma = Eigen::MatrixXd::Zero(dim, dim);
  if (out.draws.size() < 2 || dim == 0) return out;
  // Shifted by the first draw: identical draws give an exactly zero matrix.
  const Eigen::VectorXd& origin = out.draws.front();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& d : out.draws) mean += d - origin;
  mean /= static_cast<double>(out.draws.size());
  for (const auto& d : out.draws) {
    const Eigen::VectorXd c = d - origin - mean;
    out.sigma += c * c.transpose();
  }
  out.sigma *= static_cast<double>(n) / static_cast<double>(out.draws.size() - 1);
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
  return out;
}

struct Interval {
  std::string name;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// theta_hat_j +/- z_{(1+level)/2} sqrt(Sigma_jj / n) in free coordinates.
inline std::vector<Interval> confidence_intervals(const ThetaParams& theta_hat, const Eigen::MatrixXd& sigma,
                                                  std::size_t n, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidParameter("level must lie in (0, 1)");
  const Eigen::VectorXd x = free_coords(theta_hat);
  if (sigma.rows() != x.size() || sigma.cols() != x.size()) throw InvalidParameter("Sigma has the wrong size");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 * (1.0 + level));
  const std::vector<std::string> names = free_coord_names(theta_hat.k);
  std::vector<Interval> out;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double half = z * std::sqrt(std::max(sigma(j, j), 0.0) / static_cast<double>(n));
    out.push_back({names[static_cast<std::size_t>(j)], x(j), x(j) - half, x(j) + half});
  }
  return out;
}

/// Two-sided Kolmogorov-Smirnov p-value for Gaussianity after standardizing by
/// the sample mean and standard deviation. The asymptotic Kolmogorov law with
/// the usual small-sample correction is used; estimating the parameters makes
/// the test conservative.
inline double ks_normal_pvalue(std::vector<double> x) {
  const std::size_t n = x.size();
  if (n < 3) throw InvalidParameter("KS test needs at least 3 values");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n - 1));
  if (!(sd > 0.0)) return 0.0;
  std::sort(x.begin(), x.end());
  const boost::math::normal_distribution<double> phi;
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = boost::math::cdf(phi, (x[i] - mean) / sd);
    d = std::max({d, static_cast<double>(i + 1) / static_cast<double>(n) - c, c - static_cast<double>(i) / static_cast<double>(n)});
  }
  const double rn = std::sqrt(static_cast<double>(n));
  const double lambda = (rn + 0.12 + 0.11 / rn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace transmix

#endif  // TRANSMIX_INFERENCE_HPP
