// Shared helpers for the test binaries.
#ifndef TRANSMIX_TESTS_TEST_UTIL_HPP
#define TRANSMIX_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "transmix/model.hpp"
#include "transmix/simulate.hpp"

namespace transmix::testing_util {

inline Eigen::MatrixXd matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return out;
}

/// Random interior parameter: gaps in [0.3, 2], diagonally dominant Q.
inline ThetaParams random_theta(std::mt19937_64& rng, int k, bool shuffle = false) {
  std::uniform_real_distribution<double> gap(0.3, 2.0), mass(0.05, 1.0);
  std::vector<double> m(static_cast<std::size_t>(k), 0.0);
  for (int j = 1; j < k; ++j) m[static_cast<std::size_t>(j)] = m[static_cast<std::size_t>(j - 1)] + gap(rng);
  Eigen::MatrixXd q(k, k);
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) q(r, s) = mass(rng) + (r == s ? 1.5 : 0.0);
  }
  q /= q.sum();
  if (shuffle) {
    std::uniform_real_distribution<double> off(-3.0, 3.0);
    const double shift = off(rng);
    for (double& v : m) v += shift;
    std::vector<int> perm(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pm(m.size());
    Eigen::MatrixXd pq(k, k);
    for (int i = 0; i < k; ++i) {
      pm[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
      for (int j = 0; j < k; ++j) pq(i, j) = q(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    m = pm;
    q = pq;
  }
  ThetaParams t;
  t.k = k;
  t.m = m;
  t.q = q;
  return t;
}

/// Two-state reference chain P = ((0.8, 0.2), (0.3, 0.7)), translations (0, 2).
inline HmmSimConfig reference_config(NoiseSpec noise, std::size_t n, std::uint64_t seed) {
  HmmSimConfig cfg;
  cfg.transition = matrix({{0.8, 0.2}, {0.3, 0.7}});
  cfg.m_true = {0.0, 2.0};
  cfg.noise = noise;
  cfg.n = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace transmix::testing_util

#endif  // TRANSMIX_TESTS_TEST_UTIL_HPP
