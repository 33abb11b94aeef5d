#ifndef TRANSMIX_SIMULATE_HPP
#define TRANSMIX_SIMULATE_HPP

/** @file
 * Ground-truth generator for hidden Markov translation mixtures
 * Y_i = m_{S_i} + e_i with S a finite Markov chain and e iid noise.
 */

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/constants/constants.hpp>
#include <boost/random/laplace_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <nlohmann/json.hpp>

#include "transmix/contrast.hpp"
#include "transmix/ecf.hpp"
#include "transmix/errors.hpp"
#include "transmix/model.hpp"
#include "transmix/rng.hpp"

namespace transmix {

enum class NoiseKind { gaussian, laplace, gaussian_mixture };

/// Noise law of the emissions. Every family has a density with exponential
/// tails, so an integrability condition of the form int f^(1-delta) < inf
/// holds for any delta in (0, 1).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double scale = 1.0;  ///< gaussian: sigma; laplace: b
  // gaussian_mixture: weight * N(mean1, sd1^2) + (1 - weight) * N(mean2, sd2^2)
  double weight = 0.5;
  double mean1 = 0.0, sd1 = 1.0, mean2 = 0.0, sd2 = 1.0;

  static NoiseSpec gaussian(double sigma) { return {NoiseKind::gaussian, sigma}; }
  static NoiseSpec laplace(double b) { return {NoiseKind::laplace, b}; }
  static NoiseSpec mixture(double w, double m1, double s1, double m2, double s2) {
    NoiseSpec n;
    n.kind = NoiseKind::gaussian_mixture;
    n.weight = w;
    n.mean1 = m1;
    n.sd1 = s1;
    n.mean2 = m2;
    n.sd2 = s2;
    return n;
  }

  void validate() const {
    switch (kind) {
      case NoiseKind::gaussian:
        if (!(scale >= 0.0)) throw InvalidParameter("gaussian sigma must be >= 0");
        break;
      case NoiseKind::laplace:
        if (!(scale > 0.0)) throw InvalidParameter("laplace scale must be > 0");
        break;
      case NoiseKind::gaussian_mixture:
        if (!(weight >= 0.0 && weight <= 1.0) || !(sd1 > 0.0) || !(sd2 > 0.0)) {
          throw InvalidParameter("invalid gaussian mixture noise");
        }
        break;
    }
  }

  [[nodiscard]] NoiseCF cf() const {
    switch (kind) {
      case NoiseKind::gaussian: return gaussian_cf(scale);
      case NoiseKind::laplace: return laplace_cf(scale);
      case NoiseKind::gaussian_mixture: return gaussian_mixture_cf(weight, mean1, sd1, mean2, sd2);
    }
    return gaussian_cf(scale);
  }

  [[nodiscard]] double pdf(double x) const {
    constexpr double inv_sqrt_2pi = boost::math::constants::one_div_root_two_pi<double>();
    auto normal = [](double z, double mu, double s) {
      const double u = (z - mu) / s;
      return inv_sqrt_2pi / s * std::exp(-0.5 * u * u);
    };
    switch (kind) {
      case NoiseKind::gaussian: return normal(x, 0.0, scale);
      case NoiseKind::laplace: return std::exp(-std::abs(x) / scale) / (2.0 * scale);
      case NoiseKind::gaussian_mixture: return weight * normal(x, mean1, sd1) + (1.0 - weight) * normal(x, mean2, sd2);
    }
    return 0.0;
  }

  [[nodiscard]] double standard_deviation() const {
    switch (kind) {
      case NoiseKind::gaussian: return scale;
      case NoiseKind::laplace: return std::sqrt(2.0) * scale;
      case NoiseKind::gaussian_mixture: {
        const double mean = weight * mean1 + (1.0 - weight) * mean2;
        const double second = weight * (sd1 * sd1 + mean1 * mean1) + (1.0 - weight) * (sd2 * sd2 + mean2 * mean2);
        return std::sqrt(second - mean * mean);
      }
    }
    return scale;
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case NoiseKind::gaussian:
        if (scale == 0.0) return 0.0;
        return boost::random::normal_distribution<double>(0.0, scale)(rng);
      case NoiseKind::laplace: return boost::random::laplace_distribution<double>(0.0, scale)(rng);
      case NoiseKind::gaussian_mixture: {
        const bool first = boost::random::uniform_01<double>()(rng) < weight;
        return first ? boost::random::normal_distribution<double>(mean1, sd1)(rng)
                     : boost::random::normal_distribution<double>(mean2, sd2)(rng);
      }
    }
    return 0.0;
  }
};

struct HmmSimConfig {
  Eigen::MatrixXd transition;          ///< row-stochastic P
  std::vector<double> m_true;          ///< translations, one per state
  NoiseSpec noise;
  std::optional<std::vector<double>> initial;  ///< stationary law when empty
  std::size_t n = 1000;
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_stochastic(const Eigen::MatrixXd& p) {
  if (p.rows() == 0 || p.rows() != p.cols()) throw InvalidParameter("transition matrix must be square and nonempty");
  if (!p.allFinite() || (p.array() < 0.0).any()) throw InvalidParameter("transition entries must be nonnegative");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > 1e-10) {
      throw InvalidParameter("transition row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

// A stochastic matrix is irreducible and aperiodic iff P^((k-1)^2 + 1) > 0
// entrywise (Wielandt's bound).
inline bool is_primitive(const Eigen::MatrixXd& p) {
  const Eigen::Index k = p.rows();
  using BoolMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const BoolMat pattern = (p.array() > 0.0).cast<int>();
  BoolMat power = pattern;
  const Eigen::Index exponent = (k - 1) * (k - 1) + 1;
  for (Eigen::Index e = 1; e < exponent; ++e) {
    power = ((power * pattern).array() > 0).cast<int>();
  }
  return (power.array() > 0).all();
}

}  // namespace detail

/// Stationary law of an irreducible aperiodic chain by power iteration.
inline std::vector<double> stationary_dist(const Eigen::MatrixXd& p) {
  detail::check_stochastic(p);
  if (!detail::is_primitive(p)) {
    throw InvalidParameter("transition matrix is reducible or periodic; power iteration cannot converge");
  }
  const Eigen::Index k = p.rows();
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(k, 1.0 / static_cast<double>(k));
  for (int it = 0; it < 1000000; ++it) {
    Eigen::RowVectorXd next = mu * p;
    next /= next.sum();
    const double change = (next - mu).lpNorm<1>();
    mu = next;
    if (change < 1e-15) break;
  }
  if ((mu * p - mu).lpNorm<Eigen::Infinity>() > 1e-12) {
    throw InvalidParameter("power iteration for the stationary law did not converge");
  }
  return {mu.data(), mu.data() + k};
}

/// Stationary law of two consecutive states: Q*_{ij} = mu_i P_{ij}.
inline Eigen::MatrixXd q_star(const Eigen::MatrixXd& p) {
  const std::vector<double> mu = stationary_dist(p);
  Eigen::MatrixXd q = p;
  for (Eigen::Index i = 0; i < p.rows(); ++i) q.row(i) *= mu[static_cast<std::size_t>(i)];
  return q;
}

/// True parametric part of a simulation config, in canonical form.
inline ThetaParams true_theta(const HmmSimConfig& cfg) { return canonicalize(cfg.m_true, q_star(cfg.transition)); }

struct SimResult {
  Series y;
  std::vector<int> states;
};

inline SimResult sample(const HmmSimConfig& cfg) {
  detail::check_stochastic(cfg.transition);
  cfg.noise.validate();
  const Eigen::Index k = cfg.transition.rows();
  if (static_cast<Eigen::Index>(cfg.m_true.size()) != k) throw InvalidParameter("m_true length must equal state count");
  if (cfg.n < 2) throw InsufficientData("simulation length must be >= 2");

  std::vector<double> init = cfg.initial ? *cfg.initial : stationary_dist(cfg.transition);
  if (static_cast<Eigen::Index>(init.size()) != k) throw InvalidParameter("initial law has wrong length");

  Rng rng = make_rng(cfg.seed);
  boost::random::uniform_01<double> unif;
  auto draw = [&](auto&& weight_of) {
    const double u = unif(rng);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      acc += weight_of(j);
      if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(k - 1);
  };

  std::vector<int> states(cfg.n);
  std::vector<double> y(cfg.n);
  states[0] = draw([&](Eigen::Index j) { return init[static_cast<std::size_t>(j)]; });
  for (std::size_t i = 1; i < cfg.n; ++i) {
    const int prev = states[i - 1];
    states[i] = draw([&](Eigen::Index j) { return cfg.transition(prev, j); });
  }
  for (std::size_t i = 0; i < cfg.n; ++i) {
    y[i] = cfg.m_true[static_cast<std::size_t>(states[i])] + cfg.noise.sample(rng);
  }
  return {Series(std::move(y)), std::move(states)};
}

inline void to_json(nlohmann::json& j, const NoiseSpec& n) {
  switch (n.kind) {
    case NoiseKind::gaussian: j = {{"kind", "gaussian"}, {"sigma", n.scale}}; break;
    case NoiseKind::laplace: j = {{"kind", "laplace"}, {"scale", n.scale}}; break;
    case NoiseKind::gaussian_mixture:
      j = {{"kind", "gaussian_mixture"}, {"weight", n.weight}, {"mean1", n.mean1},
           {"sd1", n.sd1},               {"mean2", n.mean2},   {"sd2", n.sd2}};
      break;
  }
}

}  // namespace transmix

#endif  // TRANSMIX_SIMULATE_HPP
