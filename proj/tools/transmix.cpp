// transmix command-line tool.
//
// Exit codes: 0 success, 1 input/output error, 2 configuration error,
// 3 numerical failure.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "transmix/transmix.hpp"

namespace tx = transmix;
using tx::Json;

namespace {

enum ExitCode { kOk = 0, kIo = 1, kConfig = 2, kNumeric = 3 };

struct Settings {
  std::string config_path;
  std::string input;
  bool header = false;
  std::string report_path;
  std::string plot_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool timing = false;

  double cf_halfwidth = 0.0;
  int quad_order = 32;

  int k = 0;
  int k_max = 5;
  double lambda_coeff = 0.5;
  int multistart = 20;
  double m_bound = 10.0;
  double gap_min = 0.05;
  double det_min = 1e-4;

  int replicates = 200;
  std::string block_len = "auto";
  double level = 0.95;
  int refit_multistart = 2;

  int p_min = 2;
  int p_max = 10;
  double kappa = 1.0 / 3.0;
  double b0 = 1.0;
  double a0 = 2.0;
  double b_upper = 0.0;
  int density_restarts = 3;
  int em_max_iter = 500;
  double em_tol = 1e-8;
  std::string theta;

  bool no_infer = false;
  bool no_density = false;

  std::string out;
  std::string states_out;
  std::size_t n = 1000;
  std::string transition = "[[0.8, 0.2], [0.3, 0.7]]";
  std::string translations = "[0, 2]";
  std::string noise = "gaussian";
  double noise_scale = 1.0;
  std::string mixture = "[0.5, -1, 0.5, 1, 0.5]";
  std::string initial;
};

// A command-line option that can also be set from the configuration file.
struct Binding {
  std::string key;
  CLI::Option* option = nullptr;
  bool echo = true;
  std::function<void(const nlohmann::json&)> assign;
  std::function<Json()> value;
};

class Registry {
 public:
  Registry(CLI::App* app, std::vector<Binding>* bindings) : app_(app), bindings_(bindings) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& target, const std::string& help, bool echo = true) {
    CLI::Option* opt = app_->add_option("--" + name, target, help)->capture_default_str();
    const std::string key = tx::normalize_key(name);
    bindings_->push_back({key, opt, echo,
                          [&target, key](const nlohmann::json& j) {
                            try {
                              target = j.get<T>();
                            } catch (const nlohmann::json::exception&) {
                              throw tx::ConfigError("config key '" + key + "' has the wrong type");
                            }
                          },
                          [&target] { return Json(target); }});
    return opt;
  }

  // Option whose value is JSON text on the command line and any JSON value in
  // the configuration file.
  CLI::Option* add_json(const std::string& name, std::string& target, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, target, help)->capture_default_str();
    bindings_->push_back({tx::normalize_key(name), opt, true,
                          [&target](const nlohmann::json& j) { target = j.is_string() ? j.get<std::string>() : j.dump(); },
                          [&target]() -> Json {
                            if (target.empty()) return nullptr;
                            try {
                              return Json::parse(target);
                            } catch (const nlohmann::json::exception&) {
                              return target;
                            }
                          }});
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& target, const std::string& help, bool echo = true) {
    CLI::Option* opt = app_->add_flag("--" + name, target, help);
    const std::string key = tx::normalize_key(name);
    bindings_->push_back({key, opt, echo,
                          [&target, key](const nlohmann::json& j) {
                            if (!j.is_boolean()) throw tx::ConfigError("config key '" + key + "' must be true or false");
                            target = j.get<bool>();
                          },
                          [&target] { return Json(target); }});
    return opt;
  }

 private:
  CLI::App* app_;
  std::vector<Binding>* bindings_;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<Binding> bindings;
};

void add_common(Registry& r, Settings& s, bool with_input) {
  r.add("config", s.config_path, "key = value configuration file; flags take precedence", false);
  if (with_input) {
    r.add("input", s.input, "series CSV, one value per line ('-' reads stdin)");
    r.flag("header", s.header, "skip the first line of the input");
    r.add("report", s.report_path, "JSON report path (default: stdout)", false);
  }
  r.add("seed", s.seed, "top-level seed (default: $TRANSMIX_SEED or 0)");
  r.add("threads", s.threads, "worker threads, 0 for all cores; results do not depend on it", false);
  if (with_input) r.flag("timing", s.timing, "add wall-clock timings to the report", false);
}

void add_contrast(Registry& r, Settings& s) {
  r.add("cf-halfwidth", s.cf_halfwidth, "half-width a of the frequency square, 0 for the data-driven default");
  r.add("quad-order", s.quad_order, "Gauss-Legendre nodes per axis");
}

void add_fit(Registry& r, Settings& s) {
  r.add("k", s.k, "known number of populations; 0 selects it");
  r.add("k-max", s.k_max, "largest order considered");
  r.add("lambda-coeff", s.lambda_coeff, "penalty coefficient c in c n^(-1/4)");
  r.add("multistart", s.multistart, "optimizer restarts per fit");
  r.add("m-bound", s.m_bound, "compact set: bound on |m_j|");
  r.add("gap-min", s.gap_min, "compact set: minimal translation gap");
  r.add("det-min", s.det_min, "compact set: minimal |det Q|");
}

void add_infer(Registry& r, Settings& s) {
  r.add("replicates", s.replicates, "bootstrap replicates");
  r.add("block-len", s.block_len, "bootstrap block length or 'auto' for ceil(n^(1/3))");
  r.add("level", s.level, "confidence level");
  r.add("refit-multistart", s.refit_multistart, "optimizer restarts per bootstrap refit");
}

void add_density(Registry& r, Settings& s, bool with_theta) {
  r.add("p-min", s.p_min, "smallest mixture size");
  r.add("p-max", s.p_max, "largest mixture size");
  r.add("kappa", s.kappa, "penalty constant");
  r.add("b0", s.b0, "scale floor constant");
  r.add("a0", s.a0, "location bound constant");
  r.add("b-upper", s.b_upper, "scale ceiling B, 0 for 3 x sample sd");
  r.add("density-restarts", s.density_restarts, "EM restarts per mixture size");
  r.add("em-max-iter", s.em_max_iter, "EM iteration cap");
  r.add("em-tol", s.em_tol, "EM stopping tolerance on the log-likelihood gain");
  if (with_theta) r.add("theta", s.theta, "use the parametric estimate from this report or theta JSON file");
  r.add("plot-dir", s.plot_dir, "write density.csv and dn_table.csv here", false);
}

void add_simulate(Registry& r, Settings& s) {
  r.add("out", s.out, "series output path (default: stdout)", false);
  r.add("states-out", s.states_out, "latent state path output", false);
  r.add("n", s.n, "series length");
  r.add_json("transition", s.transition, "transition matrix as JSON");
  r.add_json("translations", s.translations, "translations as JSON array");
  r.add("noise", s.noise, "gaussian, laplace or mixture");
  r.add("noise-scale", s.noise_scale, "gaussian sigma or laplace scale");
  r.add_json("mixture", s.mixture, "mixture noise [weight, mean1, sd1, mean2, sd2]");
  r.add_json("initial", s.initial, "initial state law as JSON array (default: stationary)");
}

// Reads --config. A report is accepted too, in which case its configuration
// echo is used.
std::optional<tx::ConfigMap> read_config(const Command& cmd) {
  const CLI::Option* opt = cmd.app->get_option("--config");
  if (opt->count() == 0) return std::nullopt;
  const std::string path = opt->as<std::string>();
  const std::string text = tx::io::read_file(path);
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.is_object() && j.contains("tool") && j.contains("config")) return tx::parse_config(j.at("config").dump(), path);
  } catch (const nlohmann::json::exception&) {
  }
  return tx::parse_config(text, path);
}

// Configuration values fill options not given on the command line. Keys of
// other subcommands' sections are ignored; keys nobody knows are errors.
void apply_config(const std::string& section, Command& cmd, const tx::ConfigMap& cfg,
                  const std::set<std::string>& sections, const std::set<std::string>& known) {
  for (const auto& [key, value] : cfg) {
    std::string base = key;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      const std::string sec = key.substr(0, dot);
      if (!sections.count(sec)) throw tx::ConfigError("unknown config section '" + sec + "'");
      base = key.substr(dot + 1);
    }
    if (!known.count(base)) throw tx::ConfigError("unknown config key '" + base + "'");
  }
  for (auto& b : cmd.bindings) {
    if (b.key == "config" || b.option->count() > 0) continue;
    if (const nlohmann::json* v = tx::config_lookup(cfg, section, b.key)) b.assign(*v);
  }
}

void resolve_seed(Command& cmd, Settings& s, bool from_config) {
  if (cmd.app->get_option("--seed")->count() > 0 || from_config) return;
  if (const char* env = std::getenv("TRANSMIX_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      s.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw tx::ConfigError(std::string("TRANSMIX_SEED is not an unsigned integer: '") + env + "'");
    }
  }
}

Json echo(const Command& cmd) {
  Json out;
  for (const auto& b : cmd.bindings) {
    if (b.echo) out[b.key] = b.value();
  }
  return out;
}

unsigned resolve_threads(unsigned t) {
  if (t > 0) return t;
  return std::max(1u, std::thread::hardware_concurrency());
}

nlohmann::json parse_json_value(const std::string& name, const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw tx::ConfigError(name + " is not valid JSON: " + text);
  }
}

tx::HmmSimConfig simulation_config(const Settings& s) {
  tx::HmmSimConfig cfg;
  try {
    const auto rows = parse_json_value("transition", s.transition).get<std::vector<std::vector<double>>>();
    const auto k = static_cast<Eigen::Index>(rows.size());
    cfg.transition.resize(k, k);
    for (Eigen::Index r = 0; r < k; ++r) {
      if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != k) {
        throw tx::ConfigError("transition must be square");
      }
      for (Eigen::Index c = 0; c < k; ++c) cfg.transition(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    cfg.m_true = parse_json_value("translations", s.translations).get<std::vector<double>>();
    if (!s.initial.empty()) cfg.initial = parse_json_value("initial", s.initial).get<std::vector<double>>();
    if (s.noise == "gaussian") {
      cfg.noise = tx::NoiseSpec::gaussian(s.noise_scale);
    } else if (s.noise == "laplace") {
      cfg.noise = tx::NoiseSpec::laplace(s.noise_scale);
    } else if (s.noise == "mixture") {
      const auto p = parse_json_value("mixture", s.mixture).get<std::vector<double>>();
      if (p.size() != 5) throw tx::ConfigError("mixture needs [weight, mean1, sd1, mean2, sd2]");
      cfg.noise = tx::NoiseSpec::mixture(p[0], p[1], p[2], p[3], p[4]);
    } else {
      throw tx::ConfigError("unknown noise '" + s.noise + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw tx::ConfigError(std::string("simulation settings: ") + e.what());
  }
  if (static_cast<Eigen::Index>(cfg.m_true.size()) != cfg.transition.rows()) {
    throw tx::ConfigError("translations must have one entry per state");
  }
  cfg.n = s.n;
  cfg.seed = s.seed;
  cfg.noise.validate();
  tx::detail::check_stochastic(cfg.transition);
  return cfg;
}

int run_simulate(const Settings& s) {
  const tx::HmmSimConfig cfg = simulation_config(s);
  const tx::SimResult sim = tx::sample(cfg);
  const std::string csv = tx::io::series_csv(sim.y.data());
  if (s.out.empty() || s.out == "-") std::cout << csv;
  else tx::io::write_file(s.out, csv);
  if (!s.states_out.empty()) {
    std::string states;
    for (int st : sim.states) states += std::to_string(st) + "\n";
    tx::io::write_file(s.states_out, states);
  }
  return kOk;
}

struct Input {
  tx::Series y;
  tx::InputDigest digest;
};

Input read_input(const Settings& s) {
  if (s.input.empty()) throw tx::ConfigError("no input given (--input)");
  std::string text;
  if (s.input == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  } else {
    text = tx::io::read_file(s.input);
  }
  const std::string name = s.input == "-" ? "<stdin>" : s.input;
  std::vector<double> values = tx::io::parse_series(text, s.header, name);
  if (values.empty()) throw tx::IoError(name + ": no observations");
  if (values.size() < 2) throw tx::IoError(name + ": need at least two observations");
  Input in;
  try {
    in.y = tx::Series(std::move(values));
  } catch (const tx::Error& e) {
    throw tx::IoError(name + ": " + e.what());
  }
  in.digest = {s.input, tx::io::fnv1a64(text), in.y.size()};
  return in;
}

tx::ThetaParams read_theta(const std::string& path) {
  const std::string text = tx::io::read_file(path);
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.contains("fit")) j = j.at("fit").at("theta_hat");
    tx::ThetaParams theta = j.get<tx::ThetaParams>();
    return theta;
  } catch (const nlohmann::json::exception& e) {
    throw tx::ConfigError(path + ": not a theta or report file: " + e.what());
  }
}

int run_estimation(const std::string& mode, const Settings& s, const Json& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const Input in = read_input(s);

  tx::PipelineOptions opt;
  opt.seed = s.seed;
  opt.threads = resolve_threads(s.threads);
  opt.contrast.halfwidth = s.cf_halfwidth;
  opt.contrast.quad_order = s.quad_order;
  opt.selection.k_max = s.k_max;
  opt.selection.lambda_coeff = s.lambda_coeff;
  opt.selection.multistart = s.multistart;
  if (s.k < 0) throw tx::ConfigError("k must be >= 0");
  if (s.k > 0) opt.k = s.k;
  opt.compact.m_bound = s.m_bound;
  opt.compact.gap_min = s.gap_min;
  opt.compact.det_min = s.det_min;

  opt.infer = mode == "infer" || (mode == "pipeline" && !s.no_infer);
  opt.bootstrap.replicates = s.replicates;
  opt.bootstrap.refit_multistart = s.refit_multistart;
  if (s.block_len != "auto") {
    try {
      std::size_t used = 0;
      const long v = std::stol(s.block_len, &used);
      if (used != s.block_len.size() || v < 1) throw std::invalid_argument(s.block_len);
      opt.bootstrap.block_len = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw tx::ConfigError("block-len must be 'auto' or a positive integer");
    }
  }
  opt.level = s.level;

  opt.density = mode == "density" || (mode == "pipeline" && !s.no_density);
  opt.sieve.p_min = s.p_min;
  opt.sieve.p_max = s.p_max;
  opt.sieve.kappa = s.kappa;
  opt.sieve.b0 = s.b0;
  opt.sieve.a0 = s.a0;
  opt.sieve.b_upper = s.b_upper;
  opt.sieve.restarts = s.density_restarts;
  opt.sieve.max_iter = s.em_max_iter;
  opt.sieve.tol = s.em_tol;
  if (opt.density) opt.sieve.validate();
  if (!s.theta.empty()) opt.frozen_theta = read_theta(s.theta);

  const tx::PipelineResult result = tx::run_pipeline(in.y, opt);
  if (!s.plot_dir.empty()) {
    if (!result.density) throw tx::ConfigError("--plot-dir needs a density estimate");
    tx::emit_plot_data(in.y, *result.density, s.plot_dir);
  }
  std::optional<Json> timing;
  if (s.timing) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    timing = Json{{"wall_seconds", dt.count()}, {"threads", opt.threads}};
  }
  const std::string text = tx::make_report(in.digest, config, result, timing).dump(2) + "\n";
  if (s.report_path.empty() || s.report_path == "-") std::cout << text;
  else tx::io::write_file(s.report_path, text);
  return kOk;
}

// Human-readable summary of a JSON report.
int run_report(const std::string& path) {
  const std::string text = tx::io::read_file(path);
  nlohmann::ordered_json rep;
  try {
    rep = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw tx::ConfigError(path + ": not a JSON report: " + e.what());
  }
  if (!rep.contains("fit")) throw tx::ConfigError(path + ": not a transmix report");
  const auto& in = rep.at("input");
  const auto& fit = rep.at("fit");
  std::cout << "input    " << in.value("path", "") << "  n=" << in.value("n", 0) << "  fnv1a64=" << in.value("fnv1a64", "")
            << "\n";
  std::cout << "mode     " << fit.value("mode", "") << "\n";
  std::cout << "k_hat    " << fit.at("k_hat").get<int>() << "\n";
  const auto& th = fit.at("theta_hat");
  std::cout << "m_hat    " << th.at("m").dump() << "\n";
  std::cout << "Q_hat    " << th.at("Q").dump() << "\n";
  std::cout << "M_n      " << fit.at("mn_value").dump() << "\n";
  if (rep.contains("inference")) {
    const auto& inf = rep.at("inference");
    std::cout << "bootstrap  replicates=" << inf.at("replicates") << " failures=" << inf.at("failures")
              << " block_len=" << inf.at("block_len") << "\n";
    for (const auto& i : inf.at("intervals")) {
      std::cout << "  " << i.at("name").get<std::string>() << "  " << i.at("estimate").dump() << "  ["
                << i.at("lower").dump() << ", " << i.at("upper").dump() << "]\n";
    }
  }
  if (rep.contains("density")) {
    const auto& d = rep.at("density");
    std::cout << "p_hat    " << d.at("p_hat") << "\n";
    std::cout << "  p  loglik  pen  D_n\n";
    for (const auto& row : d.at("table")) {
      std::cout << "  " << row.at("p") << "  " << row.at("loglik").dump() << "  " << row.at("pen").dump() << "  "
                << row.at("d_n").dump() << "\n";
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-parametric translation mixtures with dependent regimes"};
  app.set_version_flag("--version", std::string(tx::kVersion));
  app.require_subcommand(1);

  Settings s;
  std::string report_in;
  const std::vector<std::string> names = {"simulate", "fit", "infer", "density", "pipeline"};
  std::vector<Command> commands(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string& name = names[i];
    static const char* help[] = {"simulate a hidden Markov translation mixture",
                                 "estimate k, m and Q",
                                 "estimate k, m and Q with bootstrap confidence intervals",
                                 "estimate the noise density",
                                 "fit, bootstrap and density estimation in one run"};
    Command& cmd = commands[i];
    cmd.app = app.add_subcommand(name, help[i]);
    Registry r(cmd.app, &cmd.bindings);
    if (name == "simulate") {
      add_common(r, s, false);
      add_simulate(r, s);
      continue;
    }
    add_common(r, s, true);
    add_contrast(r, s);
    add_fit(r, s);
    if (name == "infer" || name == "pipeline") add_infer(r, s);
    if (name == "density" || name == "pipeline") add_density(r, s, true);
    if (name == "pipeline") {
      r.flag("no-infer", s.no_infer, "skip the bootstrap");
      r.flag("no-density", s.no_density, "skip density estimation");
    }
  }
  CLI::App* report = app.add_subcommand("report", "print a summary of a JSON report");
  report->add_option("report", report_in, "report file")->required();

  std::set<std::string> sections(names.begin(), names.end());
  std::set<std::string> known;
  for (const auto& c : commands) {
    for (const auto& b : c.bindings) known.insert(b.key);
  }
  known.insert("input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (report->parsed()) return run_report(report_in);
    for (std::size_t i = 0; i < names.size(); ++i) {
      Command& cmd = commands[i];
      if (!cmd.app->parsed()) continue;
      const std::optional<tx::ConfigMap> cfg = read_config(cmd);
      if (cfg) apply_config(names[i], cmd, *cfg, sections, known);
      resolve_seed(cmd, s, cfg && tx::config_lookup(*cfg, names[i], "seed") != nullptr);
      if (names[i] == "simulate") return run_simulate(s);
      return run_estimation(names[i], s, echo(cmd));
    }
  } catch (const tx::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const tx::InsufficientData& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const tx::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const tx::InvalidParameter& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const tx::OptimizationFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
