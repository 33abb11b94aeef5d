#ifndef TRANSMIX_PIPELINE_HPP
#define TRANSMIX_PIPELINE_HPP

// End-to-end estimation: contrast grid, order selection or compact fit,
// optional bootstrap inference and optional noise density estimation. Every
// random stream is derived from PipelineOptions::seed.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "transmix/contrast.hpp"
#include "transmix/density.hpp"
#include "transmix/ecf.hpp"
#include "transmix/estimate.hpp"
#include "transmix/inference.hpp"
#include "transmix/model.hpp"
#include "transmix/rng.hpp"

namespace transmix {

struct PipelineOptions {
  ContrastConfig contrast;            ///< halfwidth <= 0 selects the data-driven default
  SelectionConfig selection;          ///< seed is overwritten from `seed`
  std::optional<int> k;               ///< known order: fit on the compact set instead of selecting
  CompactSpec compact;
  bool infer = false;
  BootstrapConfig bootstrap;          ///< seed is overwritten from `seed`
  double level = 0.95;
  bool density = false;
  SieveConfig sieve;                  ///< seed is overwritten from `seed`
  std::optional<ThetaParams> frozen_theta;  ///< skip estimation and use this parametric part
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct PipelineResult {
  ContrastConfig contrast;  ///< as used, with the resolved halfwidth
  std::string mode;         ///< "select_order", "compact" or "frozen"
  std::optional<ParamFit> selection;
  std::optional<FixedKFit> compact;
  ThetaParams theta_hat;
  double mn_value = 0.0;
  Eigen::MatrixXd hessian;  ///< plug-in Hessian of M_n at theta_hat
  std::optional<CovarianceEstimate> covariance;
  std::vector<Interval> intervals;
  std::optional<DensityFit> density;
};

namespace streams {
inline constexpr std::uint64_t selection = 1;
inline constexpr std::uint64_t bootstrap = 2;
inline constexpr std::uint64_t sieve = 3;
inline constexpr std::uint64_t prescan = 4;
}  // namespace streams

inline PipelineResult run_pipeline(const Series& y, const PipelineOptions& opt) {
  PipelineResult out;
  out.contrast = opt.contrast;
  if (!(out.contrast.halfwidth > 0.0)) {
    out.contrast.halfwidth = prescan_halfwidth(y, derive_seed(opt.seed, {streams::prescan}));
  }
  out.contrast.validate();
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw ConfigError("level must lie in (0, 1)");

  const ContrastProblem problem = ContrastProblem::from_series(y, out.contrast);
  SelectionConfig scfg = opt.selection;
  scfg.seed = derive_seed(opt.seed, {streams::selection});
  scfg.threads = opt.threads;
  scfg.validate();

  if (opt.frozen_theta) {
    out.mode = "frozen";
    out.theta_hat = *opt.frozen_theta;
  } else if (opt.k) {
    out.mode = "compact";
    FixedKFit details;
    out.theta_hat = fit_compact(*opt.k, opt.compact, problem, scfg, std::nullopt, &details);
    out.compact = details;
  } else {
    out.mode = "select_order";
    out.selection = select_order(problem, scfg);
    out.theta_hat = out.selection->theta_hat;
  }
  out.mn_value = problem.evaluator().value(out.theta_hat);
  out.hessian = out.theta_hat.k > 1 ? hessian_Mn_fd(out.theta_hat, problem.evaluator().grid(), out.contrast)
                                    : Eigen::MatrixXd(0, 0);

  if (opt.infer) {
    BootstrapConfig bcfg = opt.bootstrap;
    bcfg.seed = derive_seed(opt.seed, {streams::bootstrap});
    bcfg.threads = opt.threads;
    out.covariance = bootstrap_sigma(y, out.theta_hat, opt.compact, out.contrast, scfg, bcfg);
    out.intervals = confidence_intervals(out.theta_hat, out.covariance->sigma, y.size(), opt.level);
  }

  if (opt.density) {
    SieveConfig sc = opt.sieve;
    sc.seed = derive_seed(opt.seed, {streams::sieve});
    out.density = select_p(y, out.theta_hat, sc, opt.threads);
  }
  return out;
}

}  // namespace transmix

#endif  // TRANSMIX_PIPELINE_HPP
