#ifndef TRANSMIX_REPORT_HPP
#define TRANSMIX_REPORT_HPP

// JSON report and plot tables for a pipeline run.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "transmix/density.hpp"
#include "transmix/io.hpp"
#include "transmix/pipeline.hpp"

#ifndef TRANSMIX_VERSION
#define TRANSMIX_VERSION "0.0.0"
#endif

namespace transmix {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = TRANSMIX_VERSION;

struct InputDigest {
  std::string path;
  std::string fnv1a64;
  std::size_t n = 0;
};

namespace report_detail {

inline Json matrix_json(const Eigen::MatrixXd& a) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json theta_json(const ThetaParams& t) {
  return Json{{"k", t.k}, {"m", t.m}, {"Q", matrix_json(t.q)}};
}

inline Json restarts_json(const std::vector<RestartDiagnostics>& rs) {
  Json out = Json::array();
  for (const auto& r : rs) {
    out.push_back({{"restart", r.restart},
                   {"value", r.value},
                   {"status", r.status},
                   {"iterations", r.iterations},
                   {"grad_norm", r.grad_norm},
                   {"used_simplex", r.used_simplex}});
  }
  return out;
}

inline Json mixture_json(const GaussianMixtureDensity& f) {
  return Json{{"p", f.p()}, {"pi", f.pi}, {"alpha", f.alpha}, {"u", f.u}};
}

}  // namespace report_detail

/// Assembles the report. `config` is echoed verbatim; `timing` is included
/// only when given, since wall-clock values differ between runs.
inline Json make_report(const InputDigest& input, const Json& config, const PipelineResult& r,
                        const std::optional<Json>& timing = std::nullopt) {
  using namespace report_detail;
  Json rep;
  rep["tool"] = {{"name", "transmix"}, {"version", kVersion}};
  rep["input"] = {{"path", input.path}, {"fnv1a64", input.fnv1a64}, {"n", input.n}};
  rep["config"] = config;
  rep["contrast"] = {{"halfwidth", r.contrast.halfwidth}, {"quad_order", r.contrast.quad_order}, {"weight", "uniform"}};

  Json fit;
  fit["mode"] = r.mode;
  fit["k_hat"] = r.theta_hat.k;
  fit["theta_hat"] = theta_json(r.theta_hat);
  fit["mn_value"] = r.mn_value;
  fit["penalty_hat"] = penalty_I(r.theta_hat);
  if (r.selection) {
    const ParamFit& p = *r.selection;
    fit["theta_tilde"] = theta_json(p.theta_tilde);
    fit["cn_value"] = p.cn_value;
    fit["lambda"] = p.lambda;
    fit["penalty_tilde"] = p.penalty_tilde;
    fit["stage2_status"] = p.stage2_status;
    fit["stage2_iterations"] = p.stage2_iterations;
    Json rows = Json::array();
    for (const auto& row : p.per_k) {
      Json j{{"k", row.k}, {"ok", row.ok}, {"cn_value", row.cn_value}, {"mn_value", row.mn_value},
             {"converged_restarts", row.converged_restarts}};
      if (row.ok) j["theta"] = theta_json(row.theta);
      if (!row.error.empty()) j["error"] = row.error;
      rows.push_back(std::move(j));
    }
    fit["per_k"] = std::move(rows);
  }
  if (r.compact) {
    fit["best_restart"] = r.compact->best_restart;
    fit["converged_restarts"] = r.compact->converged_restarts;
    fit["restarts"] = restarts_json(r.compact->restarts);
  }
  rep["fit"] = std::move(fit);

  Json hess{{"matrix", matrix_json(r.hessian)}};
  if (r.hessian.rows() > 0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.hessian, Eigen::EigenvaluesOnly);
    hess["min_eigenvalue"] = eig.eigenvalues().minCoeff();
  }
  rep["hessian"] = std::move(hess);

  if (r.covariance) {
    const CovarianceEstimate& c = *r.covariance;
    Json iv = Json::array();
    for (const auto& i : r.intervals) {
      iv.push_back({{"name", i.name}, {"estimate", i.estimate}, {"lower", i.lower}, {"upper", i.upper}});
    }
    rep["inference"] = {{"method", c.method},       {"replicates", c.replicates},
                        {"failures", c.failures},   {"block_len", c.block_len},
                        {"coordinates", free_coord_names(r.theta_hat.k)},
                        {"sigma", matrix_json(c.sigma)}, {"intervals", std::move(iv)}};
  }

  if (r.density) {
    const DensityFit& d = *r.density;
    Json rows = Json::array();
    for (const auto& row : d.rows) {
      rows.push_back({{"p", row.p},
                      {"loglik", row.loglik},
                      {"pen", row.pen},
                      {"d_n", row.d_n},
                      {"em_iterations", row.em_iterations},
                      {"ascent_violation", row.ascent_violation},
                      {"truncation_decrease", row.truncation_decrease},
                      {"from_smaller", row.from_smaller}});
    }
    rep["density"] = {{"p_hat", d.p_hat}, {"f_hat", mixture_json(d.f_hat)}, {"table", std::move(rows)}};
  }
  if (timing) rep["timing"] = *timing;
  return rep;
}

struct PlotTables {
  std::string density_csv;  ///< x,f_hat,s_hat,hist_y
  std::string dn_csv;       ///< p,loglik,pen,d_n,em_iterations,from_smaller
};

inline constexpr int kPlotPoints = 2001;

/// Samples f_hat, the fitted marginal s_hat and a histogram of y on a common
/// grid wide enough to hold all of their mass.
inline PlotTables plot_tables(const Series& y, const DensityFit& d) {
  const GaussianMixtureDensity& f = d.f_hat;
  const MixtureMarginal s = mixture_marginal(f, d.theta_hat);
  const auto [ymin_it, ymax_it] = std::minmax_element(y.data().begin(), y.data().end());
  double lo = *ymin_it, hi = *ymax_it;
  for (int i = 0; i < f.p(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double tail = 8.0 * f.u[ii];
    lo = std::min(lo, f.alpha[ii] - tail);
    hi = std::max(hi, f.alpha[ii] + tail);
    for (double m : d.theta_hat.m) {
      lo = std::min(lo, f.alpha[ii] + m - tail);
      hi = std::max(hi, f.alpha[ii] + m + tail);
    }
  }

  const std::size_t n = y.size();
  const double ylo = *ymin_it, yhi = *ymax_it;
  const auto bins = static_cast<std::size_t>(std::clamp(std::ceil(std::sqrt(static_cast<double>(n))), 10.0, 200.0));
  const double width = yhi > ylo ? (yhi - ylo) / static_cast<double>(bins) : 1.0;
  std::vector<double> counts(bins, 0.0);
  for (double v : y.data()) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>((v - ylo) / width));
    counts[b] += 1.0;
  }

  PlotTables out;
  out.density_csv = "x,f_hat,s_hat,hist_y\n";
  for (int i = 0; i < kPlotPoints; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (kPlotPoints - 1);
    double hist = 0.0;
    if (x >= ylo && x <= yhi) {
      const auto b = std::min(bins - 1, static_cast<std::size_t>((x - ylo) / width));
      hist = counts[b] / (static_cast<double>(n) * width);
    }
    out.density_csv += io::format_double(x) + "," + io::format_double(f(x)) + "," + io::format_double(s(x)) + "," +
                       io::format_double(hist) + "\n";
  }
  out.dn_csv = "p,loglik,pen,d_n,em_iterations,from_smaller\n";
  for (const auto& row : d.rows) {
    out.dn_csv += std::to_string(row.p) + "," + io::format_double(row.loglik) + "," + io::format_double(row.pen) + "," +
                  io::format_double(row.d_n) + "," + std::to_string(row.em_iterations) + "," +
                  (row.from_smaller ? "1" : "0") + "\n";
  }
  return out;
}

/// Writes density.csv and dn_table.csv into `dir`, creating it if needed.
inline void emit_plot_data(const Series& y, const DensityFit& d, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  const PlotTables t = plot_tables(y, d);
  io::write_file(dir / "density.csv", t.density_csv);
  io::write_file(dir / "dn_table.csv", t.dn_csv);
}

}  // namespace transmix

#endif  // TRANSMIX_REPORT_HPP
