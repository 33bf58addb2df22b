#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "driftlab/experiments.hpp"

namespace {

void add_flags(CLI::App& cmd, driftlab::RunConfig& c, std::string& out) {
  cmd.add_option("--alpha", c.alpha, "slope of the linear drift u(t) = alpha t")->capture_default_str();
  cmd.add_option("--sigma", c.sigma, "noise volatility")->capture_default_str();
  cmd.add_option("--T", c.horizon, "time horizon")->capture_default_str();
  cmd.add_option("--n", c.n, "Stein dimension")->capture_default_str();
  cmd.add_option("--n-min", c.n_min, "first n of a gain curve")->capture_default_str();
  cmd.add_option("--n-max", c.n_max, "last n of a gain curve")->capture_default_str();
  cmd.add_option("--a", c.a, "exponent of F (default 2 - n)");
  cmd.add_option("--reps", c.reps, "Monte Carlo replicates")->capture_default_str();
  cmd.add_option("--seed", c.seed, "random seed")->capture_default_str();
  cmd.add_option("--n-basis", c.n_basis, "terms of the path expansion")->capture_default_str();
  cmd.add_option("--grid", c.grid, "grid intervals M (M + 1 points)")->capture_default_str();
  cmd.add_option("--tau", c.tau, "prior volatility")->capture_default_str();
  cmd.add_option("--prior-alpha", c.prior_alpha, "slope of the prior mean v(t)")->capture_default_str();
  cmd.add_option("--param", c.surface_param, "surface axis: T or sigma")->capture_default_str();
  cmd.add_option("--values", c.param_values, "surface axis values")->delimiter(',');
  cmd.add_option("--workers", c.workers, "worker threads")->capture_default_str();
  cmd.add_option("--out", out, "output CSV path (stdout if omitted)");
  cmd.add_option("--corrupt-lambda-scale", c.lambda_scale)->group("");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift estimation experiments with Stein-type estimators"};
  app.require_subcommand(1);
  driftlab::RunConfig config;
  std::string out;
  const char* help[] = {
      "one simulated path with its Stein estimate",
      "gain as a function of n",
      "gain over n and T or sigma",
      "large-sigma percentage gain floor",
      "Bayes risk, closed form and Monte Carlo",
      "conditional drift and variance of one path",
      "Stein risk identities, exit 4 on failure",
      "gain curve with the maximizing n marked",
  };
  const auto& names = driftlab::subcommands();
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto* cmd = app.add_subcommand(names[i], help[i]);
    add_flags(*cmd, config, out);
    cmd->callback([&config, name = names[i]] { config.subcommand = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return driftlab::exit_code::invalid_config;
  }
  return driftlab::emit(driftlab::run(config), out, std::cout, std::cerr);
}
