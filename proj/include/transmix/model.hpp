#ifndef TRANSMIX_MODEL_HPP
#define TRANSMIX_MODEL_HPP

/** @file
 * Parametric part of a translation mixture with dependent regimes.
 *
 * An observation is Y = m_S + e where the regime S takes k values. The
 * parametric part theta = (k, m, Q) holds the translations m, stored in
 * canonical order 0 = m[0] <= m[1] <= ... <= m[k-1], and the joint law Q of
 * two consecutive regimes (S_1, S_2). Free coordinates used for gradients are
 * (m[1..k-1], Q[i][j] for (i,j) != (k-1,k-1)); the last diagonal entry of Q is
 * implied by the unit-sum constraint.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "transmix/errors.hpp"
#include "transmix/numeric.hpp"

namespace transmix {

inline constexpr double kInteriorDetThreshold = 1e-12;
inline constexpr double kInteriorGapThreshold = 1e-9;

struct ThetaParams {
  int k = 1;
  std::vector<double> m{0.0};
  Eigen::MatrixXd q = Eigen::MatrixXd::Ones(1, 1);

  /// Dimension of the free-coordinate vector: (k-1) + (k*k-1).
  [[nodiscard]] std::size_t free_dim() const {
    return static_cast<std::size_t>((k - 1) + (k * k - 1));
  }

  friend bool operator==(const ThetaParams& a, const ThetaParams& b) {
    return a.k == b.k && a.m == b.m && a.q == b.q;
  }
};

/// Which marginal of Q: rows (law of S_1) or columns (law of S_2).
enum class Axis { first = 1, second = 2 };

namespace detail {

inline void check_shape(const ThetaParams& theta) {
  if (theta.k < 1) throw InvalidParameter("population count k must be >= 1");
  if (static_cast<int>(theta.m.size()) != theta.k) {
    throw InvalidParameter("translation vector length " + std::to_string(theta.m.size()) +
                           " does not match k=" + std::to_string(theta.k));
  }
  if (theta.q.rows() != theta.k || theta.q.cols() != theta.k) {
    throw InvalidParameter("Q must be k x k");
  }
}

}  // namespace detail

/// Puts (m_raw, Q_raw) into the identification convention: labels sorted by
/// translation, smallest translation shifted to 0, Q permuted accordingly and
/// rescaled to unit mass.
inline ThetaParams canonicalize(const std::vector<double>& m_raw, const Eigen::MatrixXd& q_raw) {
  const int k = static_cast<int>(m_raw.size());
  if (k < 1) throw InvalidParameter("empty translation vector");
  if (q_raw.rows() != k || q_raw.cols() != k) {
    throw InvalidParameter("Q must be " + std::to_string(k) + " x " + std::to_string(k));
  }
  for (double v : m_raw) {
    if (!std::isfinite(v)) throw InvalidParameter("non-finite translation");
  }
  if (!q_raw.allFinite() || (q_raw.array() < 0.0).any()) {
    throw InvalidParameter("Q entries must be finite and nonnegative");
  }
  const double total = q_raw.sum();
  if (!(total > 0.0)) throw InvalidParameter("Q has zero total mass");

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return m_raw[static_cast<std::size_t>(a)] < m_raw[static_cast<std::size_t>(b)]; });

  const double shift = m_raw[static_cast<std::size_t>(order[0])];
  ThetaParams out;
  out.k = k;
  out.m.resize(static_cast<std::size_t>(k));
  out.q.resize(k, k);
  for (int i = 0; i < k; ++i) {
    out.m[static_cast<std::size_t>(i)] = m_raw[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] - shift;
    for (int j = 0; j < k; ++j) {
      out.q(i, j) = q_raw(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]) / total;
    }
  }
  return out;
}

inline ThetaParams canonicalize(const ThetaParams& theta) {
  detail::check_shape(theta);
  return canonicalize(theta.m, theta.q);
}

/// Marginal law of the regimes: row sums of Q (Axis::first) or column sums.
inline std::vector<double> marginal(const ThetaParams& theta, Axis axis) {
  const Eigen::VectorXd v = axis == Axis::first ? Eigen::VectorXd(theta.q.rowwise().sum())
                                                : Eigen::VectorXd(theta.q.colwise().sum().transpose());
  return {v.data(), v.data() + v.size()};
}

/// mu(j) = sum_i Q[j][i], the stationary regime law used by density estimation.
inline std::vector<double> marginal_mu(const ThetaParams& theta) { return marginal(theta, Axis::first); }

/// Strict interior of the parameter set: strictly increasing translations and
/// a non-singular Q.
inline bool is_interior(const ThetaParams& theta) {
  for (int i = 1; i < theta.k; ++i) {
    if (!(theta.m[static_cast<std::size_t>(i)] - theta.m[static_cast<std::size_t>(i - 1)] > kInteriorGapThreshold)) {
      return false;
    }
  }
  return std::abs(theta.q.determinant()) > kInteriorDetThreshold;
}

/// V(t) = (exp(i t m_j))_j.
inline Eigen::VectorXcd phase_vector(const ThetaParams& theta, double t) {
  Eigen::VectorXcd v(theta.k);
  for (int j = 0; j < theta.k; ++j) v(j) = std::polar(1.0, t * theta.m[static_cast<std::size_t>(j)]);
  return v;
}

/// Characteristic function of m_{S_1} (Axis::first) or m_{S_2}.
inline Complex phi_theta(const ThetaParams& theta, double t, Axis axis) {
  const std::vector<double> mu = marginal(theta, axis);
  Complex acc{0.0, 0.0};
  for (int j = 0; j < theta.k; ++j) {
    acc += mu[static_cast<std::size_t>(j)] * std::polar(1.0, t * theta.m[static_cast<std::size_t>(j)]);
  }
  return acc;
}

/// Characteristic function of (m_{S_1}, m_{S_2}): V(t1)^T Q V(t2).
inline Complex Phi_theta(const ThetaParams& theta, double t1, double t2) {
  const Eigen::VectorXcd v1 = phase_vector(theta, t1);
  const Eigen::VectorXcd v2 = phase_vector(theta, t2);
  return v1.transpose() * theta.q.cast<Complex>() * v2;
}

/// Partial derivatives with respect to the free coordinates, in the order
/// (m[1..k-1], Q entries row-major without the last diagonal entry).
struct PhiGradient {
  std::vector<Complex> phi1;
  std::vector<Complex> phi2;
  std::vector<Complex> Phi;
};

inline PhiGradient grad_phi_Phi(const ThetaParams& theta, double t1, double t2) {
  const int k = theta.k;
  const std::size_t dim = theta.free_dim();
  PhiGradient g{std::vector<Complex>(dim), std::vector<Complex>(dim), std::vector<Complex>(dim)};
  if (dim == 0) return g;

  const std::vector<double> mu1 = marginal(theta, Axis::first);
  const std::vector<double> mu2 = marginal(theta, Axis::second);
  const Eigen::VectorXcd v1 = phase_vector(theta, t1);
  const Eigen::VectorXcd v2 = phase_vector(theta, t2);
  const Eigen::MatrixXcd qc = theta.q.cast<Complex>();
  const Eigen::VectorXcd q_v2 = qc * v2;                // (Q V(t2))_j
  const Eigen::VectorXcd qt_v1 = qc.transpose() * v1;   // (Q^T V(t1))_j
  const Complex i1{0.0, 1.0};

  std::size_t idx = 0;
  for (int j = 1; j < k; ++j, ++idx) {
    const auto js = static_cast<std::size_t>(j);
    g.phi1[idx] = i1 * t1 * mu1[js] * v1(j);
    g.phi2[idx] = i1 * t2 * mu2[js] * v2(j);
    g.Phi[idx] = i1 * t1 * v1(j) * q_v2(j) + i1 * t2 * v2(j) * qt_v1(j);
  }
  // Q[k-1][k-1] = 1 - sum(others), so each free entry moves it oppositely.
  const int last = k - 1;
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) {
      if (r == last && s == last) continue;
      g.phi1[idx] = v1(r) - v1(last);
      g.phi2[idx] = v2(s) - v2(last);
      g.Phi[idx] = v1(r) * v2(s) - v1(last) * v2(last);
      ++idx;
    }
  }
  return g;
}

/// Boundary penalty I_k(theta) = -log|det Q| - sum_i log(gap_i / (1 + ||m||_inf)^2).
/// Returns +infinity on the boundary (singular Q or a zero gap).
inline double penalty_I(const ThetaParams& theta) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double det = std::abs(theta.q.determinant());
  if (!(det > 0.0)) return inf;
  double norm_inf = 0.0;
  for (double v : theta.m) norm_inf = std::max(norm_inf, std::abs(v));
  const double scale = (1.0 + norm_inf) * (1.0 + norm_inf);
  double value = -std::log(det);
  for (int i = 1; i < theta.k; ++i) {
    const double gap = std::abs(theta.m[static_cast<std::size_t>(i)] - theta.m[static_cast<std::size_t>(i - 1)]);
    if (!(gap > 0.0)) return inf;
    value -= std::log(gap / scale);
  }
  return value;
}

/// Free coordinates (m[1..k-1], Q without its last diagonal entry).
inline Eigen::VectorXd free_coords(const ThetaParams& theta) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(theta.free_dim()));
  Eigen::Index idx = 0;
  for (int j = 1; j < theta.k; ++j) x(idx++) = theta.m[static_cast<std::size_t>(j)];
  for (int r = 0; r < theta.k; ++r) {
    for (int s = 0; s < theta.k; ++s) {
      if (r == theta.k - 1 && s == theta.k - 1) continue;
      x(idx++) = theta.q(r, s);
    }
  }
  return x;
}

/// Inverse of free_coords. The result is not canonicalized and may leave the
/// parameter set; callers perturbing coordinates rely on that.
inline ThetaParams from_free_coords(int k, const Eigen::VectorXd& x) {
  ThetaParams theta;
  theta.k = k;
  if (x.size() != (k - 1) + (k * k - 1)) throw InvalidParameter("free coordinate vector has wrong length");
  theta.m.assign(static_cast<std::size_t>(k), 0.0);
  theta.q.resize(k, k);
  Eigen::Index idx = 0;
  for (int j = 1; j < k; ++j) theta.m[static_cast<std::size_t>(j)] = x(idx++);
  double rest = 0.0;
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) {
      if (r == k - 1 && s == k - 1) continue;
      theta.q(r, s) = x(idx++);
      rest += theta.q(r, s);
    }
  }
  theta.q(k - 1, k - 1) = 1.0 - rest;
  return theta;
}

/// Euclidean distance between two parameters of equal k in free coordinates.
inline double theta_distance(const ThetaParams& a, const ThetaParams& b) {
  if (a.k != b.k) throw InvalidParameter("theta_distance needs equal k");
  return (free_coords(a) - free_coords(b)).norm();
}

/// Human-readable names of the free coordinates, 1-based as in the usual
/// notation: m2..mk then Q11, Q12, ...
inline std::vector<std::string> free_coord_names(int k) {
  std::vector<std::string> names;
  for (int j = 1; j < k; ++j) names.push_back("m" + std::to_string(j + 1));
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) {
      if (r == k - 1 && s == k - 1) continue;
      names.push_back("Q" + std::to_string(r + 1) + std::to_string(s + 1));
    }
  }
  return names;
}

inline void to_json(nlohmann::json& j, const ThetaParams& theta) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < theta.q.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int s = 0; s < theta.q.cols(); ++s) row.push_back(theta.q(r, s));
    rows.push_back(std::move(row));
  }
  j = nlohmann::json{{"k", theta.k}, {"m", theta.m}, {"Q", std::move(rows)}};
}

inline void from_json(const nlohmann::json& j, ThetaParams& theta) {
  theta.k = j.at("k").get<int>();
  theta.m = j.at("m").get<std::vector<double>>();
  const auto& rows = j.at("Q");
  if (!rows.is_array() || static_cast<int>(rows.size()) != theta.k) {
    throw InvalidParameter("Q must have k rows");
  }
  theta.q.resize(theta.k, theta.k);
  for (int r = 0; r < theta.k; ++r) {
    const auto& row = rows.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<int>(row.size()) != theta.k) {
      throw InvalidParameter("Q must have k columns");
    }
    for (int s = 0; s < theta.k; ++s) theta.q(r, s) = row.at(static_cast<std::size_t>(s)).get<double>();
  }
  detail::check_shape(theta);
}

}  // namespace transmix

#endif  // TRANSMIX_MODEL_HPP
