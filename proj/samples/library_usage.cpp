// Simulates a two-regime series, estimates the parametric part on the compact
// set and fits the noise density.

#include <iostream>

#include "transmix/transmix.hpp"

int main() {
  using namespace transmix;

  HmmSimConfig sim;
  sim.transition = Eigen::MatrixXd{{0.8, 0.2}, {0.3, 0.7}};
  sim.m_true = {0.0, 2.0};
  sim.noise = NoiseSpec::laplace(1.0);
  sim.n = 4000;
  sim.seed = 1;
  const Series y = sample(sim).y;

  PipelineOptions opt;
  opt.k = 2;
  opt.density = true;
  opt.sieve.p_max = 6;
  opt.seed = 7;
  const PipelineResult fit = run_pipeline(y, opt);

  std::cout << "m_hat = " << fit.theta_hat.m[0] << ", " << fit.theta_hat.m[1] << "\n";
  std::cout << "Q_hat =\n" << fit.theta_hat.q << "\n";
  std::cout << "true Q =\n" << q_star(sim.transition) << "\n";
  std::cout << "p_hat = " << fit.density->p_hat << "\n";
}
