#pragma once

#include <cstdint>
#include <exception>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftlab/csv.hpp"
#include "driftlab/errors.hpp"
#include "driftlab/estimators.hpp"
#include "driftlab/filtering.hpp"
#include "driftlab/process_sim.hpp"
#include "driftlab/risk_engine.hpp"

namespace driftlab {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int invalid_config = 1;
inline constexpr int io_failure = 2;
inline constexpr int degenerate_sample = 3;
inline constexpr int identity_failure = 4;
}  // namespace exit_code

/// Everything a subcommand depends on. Defaults follow the alpha = sigma = T = 1
/// setting.
struct RunConfig {
  std::string subcommand;
  double alpha = 1.0;
  double sigma = 1.0;
  double horizon = 1.0;
  std::size_t n = 4;
  std::size_t n_min = 3;
  std::size_t n_max = 10;
  std::optional<double> a;  // defaults to 2 - n
  std::uint64_t reps = 100000;
  std::uint64_t seed = 1;
  std::size_t n_basis = 1024;
  std::size_t grid = 2048;
  double tau = 1.0;
  double prior_alpha = 0.0;
  std::string surface_param = "T";
  std::vector<double> param_values{0.5, 1.0, 2.0};
  std::size_t workers = 1;
  double lambda_scale = 1.0;  // identity-suite negative control

  double exponent() const { return a.value_or(2.0 - static_cast<double>(n)); }
  McOptions mc() const { return {reps, seed, workers}; }
  ModelParams params() const { return ModelParams(sigma, horizon, alpha); }
  SimulationSetup setup() const {
    return SimulationSetup::linear(alpha, sigma, horizon, n_basis, grid);
  }
};

struct RunOutput {
  std::string csv;
  int exit_code = exit_code::ok;
  std::string message;
};

namespace detail {

inline void validate_common(const RunConfig& c) {
  ModelParams(c.sigma, c.horizon, c.alpha);
  require(c.reps >= 2, "--reps must be >= 2");
  require(c.workers >= 1, "--workers must be >= 1");
  require(c.n_basis >= 1, "--n-basis must be >= 1");
  require(c.grid >= 2, "--grid must be >= 2");
  require(std::isfinite(c.lambda_scale) && c.lambda_scale > 0.0, "lambda scale must be positive");
}

inline void validate_stein(const RunConfig& c) {
  require(c.n >= 3, "--n must be >= 3");
  require(c.n <= c.n_basis, "--n must not exceed --n-basis");
  require(std::isfinite(c.exponent()), "--a must be finite");
}

inline void validate_range(const RunConfig& c) {
  require(c.n_min >= 3, "--n-min must be >= 3");
  require(c.n_max >= c.n_min, "--n-max must be >= --n-min");
}

}  // namespace detail

inline std::string run_simulate(const RunConfig& c) {
  detail::validate_common(c);
  detail::validate_stein(c);
  const auto setup = c.setup();
  PathSimulator sim(setup.params, setup.grid(), setup.n_basis, setup.drift);
  const auto s = sim.simulate(c.seed, 0);
  const auto fnl = CylindricalFunctional::targeting(c.n, c.exponent(), setup.drift, setup.params);
  const auto est = stein_estimate(s, sim.grid(), fnl, setup.params);
  std::ostringstream out;
  out << "t,u,x,xu,stein_estimate\n";
  for (std::size_t i = 0; i < sim.grid().points(); ++i) {
    csv::write_row(out, {sim.grid()[i], s.u[i], s.x[i], s.xu[i], est.values[i]});
  }
  return out.str();
}

inline std::string run_gain_curve(const RunConfig& c) {
  detail::validate_common(c);
  detail::validate_range(c);
  const auto curve = gain_curve(c.alpha, c.sigma, c.horizon, c.n_min, c.n_max, c.mc());
  std::ostringstream out;
  out << "n,gain_mean,gain_stderr,gain_pct\n";
  for (const auto& r : curve.rows) {
    csv::write_row(out, {static_cast<std::uint64_t>(r.n), r.mean, r.standard_error, 100.0 * r.mean});
  }
  return out.str();
}

inline std::string run_gain_surface(const RunConfig& c) {
  detail::validate_common(c);
  detail::validate_range(c);
  const bool by_T = c.surface_param == "T";
  detail::require(by_T || c.surface_param == "sigma", "--param must be T or sigma");
  detail::require(!c.param_values.empty(), "--values must not be empty");
  std::ostringstream out;
  out << "n,param_value,gain_mean,gain_stderr\n";
  for (double p : c.param_values) {
    const double sigma = by_T ? c.sigma : p;
    const double horizon = by_T ? p : c.horizon;
    const auto curve = gain_curve(c.alpha, sigma, horizon, c.n_min, c.n_max, c.mc());
    for (const auto& r : curve.rows) {
      csv::write_row(out, {static_cast<std::uint64_t>(r.n), p, r.mean, r.standard_error});
    }
  }
  return out.str();
}

inline std::string run_constant(const RunConfig& c) {
  detail::validate_common(c);
  const auto r = universal_constant(c.mc());
  std::ostringstream out;
  out << "estimate,stderr,reps\n";
  csv::write_row(out, {r.mean, r.standard_error, r.reps});
  return out.str();
}

inline std::string run_bayes(const RunConfig& c) {
  detail::validate_common(c);
  const BayesSpec spec{VolatilityProfile::constant(c.tau), LinearDrift{c.prior_alpha}};
  const auto sigma = VolatilityProfile::constant(c.sigma);
  const double closed = bayes_risk_closed_form(spec.tau, sigma, c.horizon);
  const auto mc = bayes_prior_risk(spec, sigma, c.params(), c.grid, c.mc());
  std::ostringstream out;
  out << "closed_form_risk,mc_risk,mc_stderr,reps\n";
  csv::write_row(out, {closed, mc.mean, mc.standard_error, mc.reps});
  return out.str();
}

/// Filters replicate 0 of the simulated path under u = alpha t.
inline std::string run_filter(const RunConfig& c) {
  detail::validate_common(c);
  const auto setup = c.setup();
  const auto tau = VolatilityProfile::constant(c.tau);
  const auto sigma = VolatilityProfile::constant(c.sigma);
  PathSimulator sim(setup.params, setup.grid(), setup.n_basis, setup.drift);
  const auto s = sim.simulate(c.seed, 0);
  const auto res = scalar_path_filter(s.x, LinearDrift{c.prior_alpha}, tau, sigma, sim.grid(),
                                      setup.params);
  std::ostringstream out;
  out << "t,cond_drift,cond_variance\n";
  for (std::size_t i = 0; i < sim.grid().points(); ++i) {
    csv::write_row(out, {sim.grid()[i], res.drift[i], res.variance[i]});
  }
  return out.str();
}

inline RunOutput run_identity_suite(const RunConfig& c) {
  detail::validate_common(c);
  detail::validate_stein(c);
  const auto sweep =
      identity_sweep(SteinConfig{c.n, c.exponent()}, c.setup(), c.mc(), c.lambda_scale);
  RunOutput res;
  std::ostringstream out;
  out << "name,lhs,rhs,paired_stderr,pass\n";
  bool all = true;
  for (const auto& row : sweep.rows) {
    csv::write_row(out, {row.name, row.lhs, row.rhs, row.paired_stderr,
                         static_cast<std::int64_t>(row.pass ? 1 : 0)});
    if (!row.pass) {
      all = false;
      res.message += "identity failed: " + row.name + "\n";
    }
  }
  res.csv = out.str();
  res.exit_code = all ? exit_code::ok : exit_code::identity_failure;
  return res;
}

inline std::string run_optimal_n(const RunConfig& c) {
  detail::validate_common(c);
  detail::require(c.n_max >= 3, "--n-max must be >= 3");
  const auto opt = optimal_n_search(c.alpha, c.sigma, c.horizon, c.n_max, c.mc());
  std::ostringstream out;
  out << "n,gain_mean,gain_stderr,gain_pct,optimal\n";
  for (const auto& r : opt.curve.rows) {
    csv::write_row(out, {static_cast<std::uint64_t>(r.n), r.mean, r.standard_error, 100.0 * r.mean,
                         static_cast<std::int64_t>(r.n == opt.n_opt ? 1 : 0)});
  }
  return out.str();
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"simulate", "gain-curve", "gain-surface",
                                              "constant", "bayes",      "filter",
                                              "identity-suite", "optimal-n"};
  return names;
}

/// Runs a subcommand and maps failures to exit codes.
inline RunOutput run(const RunConfig& c) {
  auto plain = [](std::string csv) { return RunOutput{std::move(csv), exit_code::ok, {}}; };
  try {
    if (c.subcommand == "simulate") return plain(run_simulate(c));
    if (c.subcommand == "gain-curve") return plain(run_gain_curve(c));
    if (c.subcommand == "gain-surface") return plain(run_gain_surface(c));
    if (c.subcommand == "constant") return plain(run_constant(c));
    if (c.subcommand == "bayes") return plain(run_bayes(c));
    if (c.subcommand == "filter") return plain(run_filter(c));
    if (c.subcommand == "identity-suite") return run_identity_suite(c);
    if (c.subcommand == "optimal-n") return plain(run_optimal_n(c));
    return {{}, exit_code::invalid_config, "unknown subcommand: " + c.subcommand};
  } catch (const DegenerateSampleError& e) {
    return {{}, exit_code::degenerate_sample, e.what()};
  } catch (const std::invalid_argument& e) {
    return {{}, exit_code::invalid_config, e.what()};
  } catch (const std::out_of_range& e) {
    return {{}, exit_code::invalid_config, e.what()};
  }
}

/// Writes the CSV to `path` (stdout when empty). Returns the final exit code.
inline int emit(const RunOutput& res, const std::string& path, std::ostream& stdout_stream,
                std::ostream& err) {
  if (!res.message.empty()) err << res.message << (res.message.back() == '\n' ? "" : "\n");
  if (res.csv.empty()) return res.exit_code;
  if (path.empty() || path == "-") {
    stdout_stream << res.csv;
    stdout_stream.flush();
    if (!stdout_stream) return exit_code::io_failure;
    return res.exit_code;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    err << "cannot open output file: " << path << "\n";
    return exit_code::io_failure;
  }
  file << res.csv;
  file.close();
  if (!file) {
    err << "failed writing output file: " << path << "\n";
    return exit_code::io_failure;
  }
  return res.exit_code;
}

}  // namespace driftlab
