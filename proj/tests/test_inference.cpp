#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "transmix/inference.hpp"
#include "transmix/simulate.hpp"

namespace transmix {
namespace {

TEST(BlockLen, CubeRoot) {
  EXPECT_EQ(default_block_len(1000), 10u);
  EXPECT_EQ(default_block_len(4000), 16u);
  EXPECT_EQ(default_block_len(1), 1u);
}

TEST(CircularBlocks, ConsecutiveWithWraparound) {
  std::vector<double> v(10);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const Series s(v);
  Rng rng = make_rng(3);
  const Series r = circular_block_resample(s, 4, rng);
  ASSERT_EQ(r.size(), 10u);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i % 4 == 0) continue;
    EXPECT_EQ(r[i], std::fmod(r[i - 1] + 1.0, 10.0));
  }
}

TEST(ConfidenceIntervals, HalfWidthAndNesting) {
  ThetaParams t;
  t.k = 2;
  t.m = {0.0, 2.0};
  t.q = testing_util::matrix({{0.48, 0.12}, {0.12, 0.28}});
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(4, 4);
  const auto ci95 = confidence_intervals(t, sigma, 100, 0.95);
  ASSERT_EQ(ci95.size(), 4u);
  EXPECT_EQ(ci95[0].name, "m2");
  EXPECT_NEAR(ci95[0].upper - ci95[0].estimate, 0.1959963984540054, 1e-12);
  const auto ci90 = confidence_intervals(t, sigma, 100, 0.90);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_GT(ci90[j].lower, ci95[j].lower);
    EXPECT_LT(ci90[j].upper, ci95[j].upper);
  }
  const auto zero = confidence_intervals(t, Eigen::MatrixXd::Zero(4, 4), 100, 0.95);
  for (const auto& iv : zero) {
    EXPECT_EQ(iv.lower, iv.estimate);
    EXPECT_EQ(iv.upper, iv.estimate);
  }
  EXPECT_THROW(confidence_intervals(t, sigma, 100, 1.0), InvalidParameter);
  EXPECT_THROW(confidence_intervals(t, sigma, 100, 0.0), InvalidParameter);
  EXPECT_THROW(confidence_intervals(t, Eigen::MatrixXd::Identity(3, 3), 100, 0.9), InvalidParameter);
}

TEST(KsNormal, SeparatesGaussianFromSkewed) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::exponential_distribution<double> e(1.0);
  std::vector<double> g(500), x(500);
  for (double& v : g) v = z(rng);
  for (double& v : x) v = e(rng);
  EXPECT_GT(ks_normal_pvalue(g), 0.05);
  EXPECT_LT(ks_normal_pvalue(x), 1e-4);
  EXPECT_EQ(ks_normal_pvalue({1.0, 1.0, 1.0}), 0.0);
}

TEST(KsNormal, MatchesReferencePValues) {
  // Pinned with scipy: kstest on the standardized data (ddof = 1), then
  // kstwobign.sf((sqrt(n) + 0.12 + 0.11 / sqrt(n)) D).
  std::vector<double> slow(40), fast(40);
  for (int i = 1; i <= 40; ++i) {
    slow[static_cast<std::size_t>(i - 1)] = std::exp(0.1 * i);
    fast[static_cast<std::size_t>(i - 1)] = std::exp(0.15 * i);
  }
  EXPECT_NEAR(ks_normal_pvalue(slow), 0.09857450546313147, 1e-12);
  EXPECT_NEAR(ks_normal_pvalue(fast), 0.012484314040332083, 1e-12);
}

TEST(Bootstrap, ConstantResamplerGivesZeroSigma) {
  const auto cfg = testing_util::reference_config(NoiseSpec::gaussian(1.0), 1000, 6);
  const Series y = sample(cfg).y;
  const ThetaParams star = true_theta(cfg);
  BootstrapConfig b;
  b.replicates = 50;
  b.resampler = [](const Series& s, std::size_t, Rng&) { return s; };
  SelectionConfig s;
  const CovarianceEstimate est = bootstrap_sigma(y, star, CompactSpec{}, ContrastConfig{}, s, b);
  EXPECT_EQ(est.replicates, 50);
  EXPECT_EQ(est.sigma, Eigen::MatrixXd::Zero(4, 4));
}

TEST(Bootstrap, ValidationAndDeterminism) {
  const auto cfg = testing_util::reference_config(NoiseSpec::gaussian(1.0), 1000, 7);
  const Series y = sample(cfg).y;
  const ThetaParams star = true_theta(cfg);
  SelectionConfig s;
  BootstrapConfig b;
  b.replicates = 10;
  EXPECT_THROW(bootstrap_sigma(y, star, CompactSpec{}, ContrastConfig{}, s, b), ConfigError);
  b.replicates = 50;
  b.block_len = 600;
  EXPECT_THROW(bootstrap_sigma(y, star, CompactSpec{}, ContrastConfig{}, s, b), ConfigError);
  b.block_len = 0;
  b.seed = 11;
  const CovarianceEstimate one = bootstrap_sigma(y, star, CompactSpec{}, ContrastConfig{}, s, b);
  b.threads = 4;
  const CovarianceEstimate four = bootstrap_sigma(y, star, CompactSpec{}, ContrastConfig{}, s, b);
  EXPECT_EQ(one.sigma, four.sigma);
  EXPECT_EQ(one.block_len, 10u);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(one.sigma);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
  EXPECT_EQ(one.sigma, one.sigma.transpose());
}

}  // namespace
}  // namespace transmix
