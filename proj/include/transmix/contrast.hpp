#ifndef TRANSMIX_CONTRAST_HPP
#define TRANSMIX_CONTRAST_HPP

/** @file
 * Characteristic-function contrast between the joint law of consecutive
 * observations and the product of its marginals, reweighted by the latent
 * model:
 *
 *   M_n(theta) = int | Ehat(t) phi_1(t1) phi_2(t2) - Phi(t) ehat_1(t1) ehat_2(t2) |^2 w(t) dt
 *
 * where Ehat is the empirical characteristic function of (Y_j, Y_{j+1}) and
 * ehat_1, ehat_2 its axis restrictions. Replacing Ehat by the population
 * characteristic function gives M(theta), which vanishes only at the true
 * parameter. The integral is discretized with a tensor Gauss-Legendre rule
 * over the support [-a, a]^2 of a uniform weight, and every derivative here
 * is the exact derivative of that discretized objective.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/legendre.hpp>

#include "transmix/ecf.hpp"
#include "transmix/errors.hpp"
#include "transmix/model.hpp"
#include "transmix/numeric.hpp"

namespace transmix {

enum class WeightKind { uniform };

struct ContrastConfig {
  double halfwidth = 2.0;  ///< a: the weight lives on [-a, a]^2
  int quad_order = 32;     ///< Gauss-Legendre nodes per axis
  WeightKind weight = WeightKind::uniform;

  void validate() const {
    if (!(halfwidth > 0.0) || !std::isfinite(halfwidth)) throw ConfigError("cf half-width must be positive");
    if (quad_order < 2) throw ConfigError("quadrature order must be >= 2");
  }
};

/// One-dimensional rule; the weight density is folded in so weights sum to 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre abscissae on [-a, a] with the uniform density 1/(2a) folded
/// into the weights. Nodes are built from the nonnegative half and mirrored,
/// so the rule is exactly symmetric.
inline QuadratureRule quad_nodes(const ContrastConfig& cfg) {
  cfg.validate();
  const int order = cfg.quad_order;
  const std::vector<double> half = boost::math::legendre_p_zeros<double>(order);  // ascending, >= 0
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(order));
  for (auto it = half.rbegin(); it != half.rend(); ++it) {
    if (*it > 0.0) x.push_back(-*it);
  }
  for (double v : half) x.push_back(v);

  QuadratureRule rule;
  rule.nodes.resize(x.size());
  rule.weights.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double dp = boost::math::legendre_p_prime(order, std::abs(xi));
    const double w = 2.0 / ((1.0 - xi * xi) * dp * dp);
    rule.nodes[i] = cfg.halfwidth * xi;
    rule.weights[i] = 0.5 * w;  // (a * w) * 1/(2a)
  }
  return rule;
}

/// Characteristic function of a noise law.
using NoiseCF = std::function<Complex(double)>;

inline NoiseCF gaussian_cf(double sigma) {
  return [sigma](double t) { return Complex{std::exp(-0.5 * sigma * sigma * t * t), 0.0}; };
}

inline NoiseCF laplace_cf(double scale) {
  return [scale](double t) { return Complex{1.0 / (1.0 + scale * scale * t * t), 0.0}; };
}

/// Two-component Gaussian mixture w N(mu1, s1^2) + (1-w) N(mu2, s2^2).
inline NoiseCF gaussian_mixture_cf(double weight, double mu1, double s1, double mu2, double s2) {
  return [=](double t) {
    return weight * std::exp(-0.5 * s1 * s1 * t * t) * std::polar(1.0, mu1 * t) +
           (1.0 - weight) * std::exp(-0.5 * s2 * s2 * t * t) * std::polar(1.0, mu2 * t);
  };
}

/// Tabulates the population characteristic function of (Y_1, Y_2) under
/// (theta_star, noise) in the layout of an empirical grid. Feeding this to
/// the contrast yields the population contrast M.
inline EcfGrid population_grid(const ThetaParams& theta_star, const NoiseCF& noise,
                               const std::vector<double>& nodes1, const std::vector<double>& nodes2) {
  EcfGrid grid;
  grid.nodes1 = nodes1;
  grid.nodes2 = nodes2;
  grid.n = 0;
  grid.values.resize(nodes1.size() * nodes2.size());
  grid.axis1.resize(nodes1.size());
  grid.axis2.resize(nodes2.size());
  std::vector<Complex> f1(nodes1.size()), f2(nodes2.size());
  for (std::size_t a = 0; a < nodes1.size(); ++a) f1[a] = noise(nodes1[a]);
  for (std::size_t b = 0; b < nodes2.size(); ++b) f2[b] = noise(nodes2[b]);
  for (std::size_t a = 0; a < nodes1.size(); ++a) {
    grid.axis1[a] = phi_theta(theta_star, nodes1[a], Axis::first) * f1[a];
    for (std::size_t b = 0; b < nodes2.size(); ++b) {
      grid.values[a * nodes2.size() + b] = Phi_theta(theta_star, nodes1[a], nodes2[b]) * f1[a] * f2[b];
    }
  }
  for (std::size_t b = 0; b < nodes2.size(); ++b) {
    grid.axis2[b] = phi_theta(theta_star, nodes2[b], Axis::second) * f2[b];
  }
  return grid;
}

/// Evaluates the discretized contrast and its derivatives for one grid.
class ContrastEvaluator {
 public:
  ContrastEvaluator(EcfGrid grid, const ContrastConfig& cfg) : grid_(std::move(grid)) {
    const QuadratureRule rule = quad_nodes(cfg);
    check_nodes(rule.nodes, grid_.nodes1, "first");
    check_nodes(rule.nodes, grid_.nodes2, "second");
    const auto n1 = static_cast<Eigen::Index>(grid_.nodes1.size());
    const auto n2 = static_cast<Eigen::Index>(grid_.nodes2.size());
    t1_ = Eigen::Map<const Eigen::VectorXd>(grid_.nodes1.data(), n1);
    t2_ = Eigen::Map<const Eigen::VectorXd>(grid_.nodes2.data(), n2);
    const Eigen::Map<const Eigen::VectorXd> w(rule.weights.data(), static_cast<Eigen::Index>(rule.weights.size()));
    weights_ = w * w.transpose();
    ehat_.resize(n1, n2);
    for (Eigen::Index a = 0; a < n1; ++a) {
      for (Eigen::Index b = 0; b < n2; ++b) {
        ehat_(a, b) = grid_.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
      }
    }
    ahat1_ = Eigen::Map<const Eigen::VectorXcd>(grid_.axis1.data(), n1);
    ahat2_ = Eigen::Map<const Eigen::VectorXcd>(grid_.axis2.data(), n2);
    axis_product_ = ahat1_ * ahat2_.transpose();
  }

  [[nodiscard]] const EcfGrid& grid() const { return grid_; }

  /// Discretized contrast value.
  [[nodiscard]] double value(const ThetaParams& theta) const {
    const Parts p = parts(theta);
    return (weights_.array() * p.g.array().abs2()).sum();
  }

  /// Value plus gradient with respect to the free coordinates.
  double value_and_gradient(const ThetaParams& theta, Eigen::VectorXd& grad) const {
    const Parts p = parts(theta);
    const double val = (weights_.array() * p.g.array().abs2()).sum();
    const int k = theta.k;
    grad.setZero(static_cast<Eigen::Index>(theta.free_dim()));
    if (k == 1) return val;

    const Complex iu{0.0, 1.0};
    const Eigen::MatrixXcd c = (weights_.cast<Complex>().array() * p.g.array().conjugate()).matrix();
    const Eigen::MatrixXcd r = (c.array() * ehat_.array()).matrix();
    const Eigen::MatrixXcd s = (c.array() * axis_product_.array()).matrix();
    const Eigen::MatrixXcd qc = theta.q.cast<Complex>();
    const Eigen::VectorXcd r_phi2 = r * p.phi2;                  // sum_b R_ab phi2_b
    const Eigen::VectorXcd rt_phi1 = r.transpose() * p.phi1;     // sum_a R_ab phi1_a
    const Eigen::MatrixXcd s_v2_qt = s * p.v2 * qc.transpose();  // (S V2 Q^T)_aj
    const Eigen::MatrixXcd st_v1_q = s.transpose() * p.v1 * qc;  // (S^T V1 Q)_bj

    Eigen::Index idx = 0;
    for (int j = 1; j < k; ++j, ++idx) {
      Complex acc{0.0, 0.0};
      for (Eigen::Index a = 0; a < p.v1.rows(); ++a) {
        const Complex d = iu * t1_(a) * p.v1(a, j);
        acc += d * (p.mu1(j) * r_phi2(a) - s_v2_qt(a, j));
      }
      for (Eigen::Index b = 0; b < p.v2.rows(); ++b) {
        const Complex d = iu * t2_(b) * p.v2(b, j);
        acc += d * (p.mu2(j) * rt_phi1(b) - st_v1_q(b, j));
      }
      grad(idx) = 2.0 * acc.real();
    }
    const Eigen::VectorXcd row_term = p.v1.transpose() * r_phi2;
    const Eigen::VectorXcd col_term = p.v2.transpose() * rt_phi1;
    const Eigen::MatrixXcd cross = p.v1.transpose() * s * p.v2;
    auto ambient = [&](int rr, int ss) { return 2.0 * (row_term(rr) + col_term(ss) - cross(rr, ss)).real(); };
    const double anchor = ambient(k - 1, k - 1);
    for (int rr = 0; rr < k; ++rr) {
      for (int ss = 0; ss < k; ++ss) {
        if (rr == k - 1 && ss == k - 1) continue;
        grad(idx++) = ambient(rr, ss) - anchor;
      }
    }
    return val;
  }

  /// Per-node derivatives dG(t_ab)/d(free coordinate p), rows ordered a-major.
  [[nodiscard]] Eigen::MatrixXcd jacobian(const ThetaParams& theta) const {
    const Parts p = parts(theta);
    const Eigen::Index n1 = p.v1.rows();
    const Eigen::Index n2 = p.v2.rows();
    const auto dim = static_cast<Eigen::Index>(theta.free_dim());
    Eigen::MatrixXcd jac(n1 * n2, dim);
    for (Eigen::Index a = 0; a < n1; ++a) {
      for (Eigen::Index b = 0; b < n2; ++b) {
        const PhiGradient g = grad_phi_Phi(theta, t1_(a), t2_(b));
        for (Eigen::Index q = 0; q < dim; ++q) {
          const auto qs = static_cast<std::size_t>(q);
          jac(a * n2 + b, q) = ehat_(a, b) * (g.phi1[qs] * p.phi2(b) + p.phi1(a) * g.phi2[qs]) -
                               g.Phi[qs] * axis_product_(a, b);
        }
      }
    }
    return jac;
  }

  /// Gauss-Newton form 2 Re(J^H W J); equals the Hessian wherever the
  /// integrand vanishes identically (the population contrast at its zero).
  [[nodiscard]] Eigen::MatrixXd gauss_newton(const ThetaParams& theta) const {
    const Eigen::MatrixXcd jac = jacobian(theta);
    Eigen::VectorXd w(jac.rows());
    for (Eigen::Index a = 0; a < weights_.rows(); ++a) {
      for (Eigen::Index b = 0; b < weights_.cols(); ++b) w(a * weights_.cols() + b) = weights_(a, b);
    }
    const Eigen::MatrixXcd wj = w.cast<Complex>().asDiagonal() * jac;
    Eigen::MatrixXd h = 2.0 * (jac.adjoint() * wj).real();
    return 0.5 * (h + h.transpose());
  }

 private:
  struct Parts {
    Eigen::MatrixXcd v1, v2;
    Eigen::VectorXd mu1, mu2;
    Eigen::VectorXcd phi1, phi2;
    Eigen::MatrixXcd g;
  };

  static void check_nodes(const std::vector<double>& expected, const std::vector<double>& actual, const char* axis) {
    bool ok = expected.size() == actual.size();
    for (std::size_t i = 0; ok && i < expected.size(); ++i) {
      ok = std::abs(expected[i] - actual[i]) <= 1e-12 * (1.0 + std::abs(expected[i]));
    }
    if (!ok) {
      throw ConfigError(std::string("ecf grid nodes on the ") + axis +
                        " axis do not match the contrast quadrature rule");
    }
  }

  [[nodiscard]] Parts parts(const ThetaParams& theta) const {
    if (static_cast<int>(theta.m.size()) != theta.k || theta.q.rows() != theta.k || theta.q.cols() != theta.k) {
      throw InvalidParameter("malformed theta");
    }
    const int k = theta.k;
    Parts p;
    p.v1.resize(t1_.size(), k);
    p.v2.resize(t2_.size(), k);
    for (int j = 0; j < k; ++j) {
      const double mj = theta.m[static_cast<std::size_t>(j)];
      for (Eigen::Index a = 0; a < t1_.size(); ++a) p.v1(a, j) = std::polar(1.0, t1_(a) * mj);
      for (Eigen::Index b = 0; b < t2_.size(); ++b) p.v2(b, j) = std::polar(1.0, t2_(b) * mj);
    }
    p.mu1 = theta.q.rowwise().sum();
    p.mu2 = theta.q.colwise().sum().transpose();
    p.phi1 = p.v1 * p.mu1.cast<Complex>();
    p.phi2 = p.v2 * p.mu2.cast<Complex>();
    const Eigen::MatrixXcd model_joint = p.v1 * theta.q.cast<Complex>() * p.v2.transpose();
    p.g = (ehat_.array() * (p.phi1 * p.phi2.transpose()).array() - model_joint.array() * axis_product_.array())
              .matrix();
    return p;
  }

  EcfGrid grid_;
  Eigen::VectorXd t1_, t2_;
  Eigen::MatrixXd weights_;
  Eigen::MatrixXcd ehat_;
  Eigen::VectorXcd ahat1_, ahat2_;
  Eigen::MatrixXcd axis_product_;
};

/// Empirical grid on the nodes of cfg's quadrature rule.
inline EcfGrid ecf_grid_for(const Series& s, const ContrastConfig& cfg) {
  const QuadratureRule rule = quad_nodes(cfg);
  return ecf_grid(s, rule.nodes, rule.nodes);
}

inline double contrast_Mn(const ThetaParams& theta, const EcfGrid& grid, const ContrastConfig& cfg) {
  return ContrastEvaluator(grid, cfg).value(theta);
}

inline Eigen::VectorXd grad_Mn(const ThetaParams& theta, const EcfGrid& grid, const ContrastConfig& cfg) {
  Eigen::VectorXd g;
  ContrastEvaluator(grid, cfg).value_and_gradient(theta, g);
  return g;
}

/// Population contrast M(theta) for data generated by (theta_star, noise).
inline double contrast_M_oracle(const ThetaParams& theta, const ThetaParams& theta_star, const NoiseCF& noise,
                                const ContrastConfig& cfg) {
  const QuadratureRule rule = quad_nodes(cfg);
  return ContrastEvaluator(population_grid(theta_star, noise, rule.nodes, rule.nodes), cfg).value(theta);
}

/// Closed-form Hessian of the population contrast at its zero theta_star:
/// 2 Re int H(t) conj(H(t))^T w(t) dt with H = dG/dtheta (the noise factor
/// |phi_F(t1) phi_F(t2)|^2 is carried inside G).
inline Eigen::MatrixXd hessian_Mstar(const ThetaParams& theta_star, const NoiseCF& noise, const ContrastConfig& cfg) {
  if (theta_star.k == 1) return Eigen::MatrixXd(0, 0);
  const QuadratureRule rule = quad_nodes(cfg);
  const ContrastEvaluator eval(population_grid(theta_star, noise, rule.nodes, rule.nodes), cfg);
  return eval.gauss_newton(theta_star);
}

inline constexpr double kDefaultHessianStep = 1e-4;

/// Central differences of the analytic gradient, symmetrized.
inline Eigen::MatrixXd hessian_Mn_fd(const ThetaParams& theta, const EcfGrid& grid, const ContrastConfig& cfg,
                                     double step = kDefaultHessianStep) {
  const ContrastEvaluator eval(grid, cfg);
  const Eigen::VectorXd x0 = free_coords(theta);
  const Eigen::Index dim = x0.size();
  Eigen::MatrixXd h(dim, dim);
  Eigen::VectorXd gp, gm;
  for (Eigen::Index p = 0; p < dim; ++p) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(p) += step;
    xm(p) -= step;
    eval.value_and_gradient(from_free_coords(theta.k, xp), gp);
    eval.value_and_gradient(from_free_coords(theta.k, xm), gm);
    h.col(p) = (gp - gm) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

/// Half-width heuristic: frequencies up to 2 pi / spread resolve translations
/// separated by `spread`; clamped to [0.5, 5].
inline double default_halfwidth(double spread) {
  if (!(spread > 0.0) || !std::isfinite(spread)) return 5.0;
  return std::clamp(2.0 * M_PI / spread, 0.5, 5.0);
}

}  // namespace transmix

#endif  // TRANSMIX_CONTRAST_HPP
