#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "driftlab/estimators.hpp"
#include "driftlab/monte_carlo.hpp"
#include "driftlab/philox.hpp"
#include "driftlab/process_sim.hpp"

namespace driftlab {

/// Monte Carlo estimate of a mean.
struct RiskReport {
  double mean = 0.0;
  double standard_error = 0.0;
  std::uint64_t reps = 0;
  std::uint64_t seed = 0;
  std::string label;
};

struct McOptions {
  std::uint64_t reps = 100000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  EngineOptions engine() const { return {workers, 1024}; }
};

/// Model, drift and discretization shared by the path-based experiments.
struct SimulationSetup {
  ModelParams params{1.0, 1.0, 1.0};
  DriftSpec drift = LinearDrift{1.0};
  std::size_t n_basis = 1024;
  std::size_t grid_intervals = 2048;

  TimeGrid grid() const { return TimeGrid(params.horizon(), grid_intervals); }

  /// Linear drift with the model's alpha.
  static SimulationSetup linear(double alpha, double sigma, double horizon,
                                std::size_t n_basis = 1024, std::size_t grid_intervals = 2048) {
    return {ModelParams(sigma, horizon, alpha), LinearDrift{alpha}, n_basis, grid_intervals};
  }
};

namespace detail {

inline void check_options(const McOptions& opts) {
  if (opts.reps < 2) throw std::invalid_argument("Monte Carlo runs need reps >= 2");
}

inline RiskReport report(const Moments& m, std::size_t k, const McOptions& opts, std::string label,
                         double scale = 1.0) {
  return {scale * m.mean(k), std::abs(scale) * m.stderr_of_mean(k), m.count(), opts.seed,
          std::move(label)};
}

inline void check_stein_n(std::size_t n) {
  if (n < 3) throw std::invalid_argument("Stein dimension n must be >= 3");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Closed-form risks
// ---------------------------------------------------------------------------

/// R = int_0^T int_0^t sigma_s^2 ds dt; sigma^2 T^2 / 2 for constant sigma.
inline double cramer_rao_bound(const VolatilityProfile& sigma, double horizon) {
  return nested_time_integral(sigma, sigma, horizon, [](double s, double) { return s * s; });
}

/// E int_0^T (X^u_t)^2 dt for the expansion truncated at n_basis terms:
/// (sigma^2 T^2 / pi^2) sum_{k<=N} (k - 1/2)^{-2}.
inline double truncated_efficient_risk(const ModelParams& params, std::size_t n_basis) {
  double acc = 0.0;
  for (std::size_t k = n_basis; k >= 1; --k) {
    const double m = static_cast<double>(k) - 0.5;
    acc += 1.0 / (m * m);
  }
  const double s = params.sigma() * params.horizon() / std::numbers::pi;
  return s * s * acc;
}

// ---------------------------------------------------------------------------
// Path-based risks
// ---------------------------------------------------------------------------

struct EfficientConfig {};

struct BayesConfig {
  BayesSpec spec;
};

/// Stein estimator X + D log F_{n,a,b} with offsets targeting the simulated
/// drift.
struct SteinConfig {
  std::size_t n = 4;
  double a = -2.0;
};

using EstimatorConfig = std::variant<EfficientConfig, BayesConfig, SteinConfig>;

/// Per-worker evaluation of E || xi - u ||^2_{L^2(dt)} by grid quadrature.
class LossKernel {
 public:
  LossKernel(const EstimatorConfig& est, const SimulationSetup& setup, std::uint64_t seed)
      : est_(est), sim_(setup.params, setup.grid(), setup.n_basis, setup.drift), seed_(seed),
        work_(setup.grid().points()) {
    if (const auto* cfg = std::get_if<SteinConfig>(&est_)) {
      fnl_.emplace(CylindricalFunctional::targeting(cfg->n, cfg->a, setup.drift, setup.params));
      inv_lambda_ = inverse_eigenvalues(cfg->n, setup.params);
      table_.emplace(sim_.grid(), cfg->n);
      if (cfg->n > setup.n_basis) throw std::invalid_argument("Stein n exceeds n_basis");
    }
  }

  double loss(std::uint64_t replicate) {
    sim_.simulate_into(seed_, replicate, sample_);
    return loss_of(sample_);
  }

  double loss_of(const PathSample& s) {
    const double dt = sim_.grid().spacing();
    if (std::holds_alternative<EfficientConfig>(est_)) {
      return trapezoid_distance_sq(s.x, s.u, dt);
    }
    if (const auto* cfg = std::get_if<BayesConfig>(&est_)) {
      const auto xi = bayes_estimate(s, sim_.grid(), cfg->spec,
                                     VolatilityProfile::constant(sim_.params().sigma()),
                                     sim_.params());
      return trapezoid_distance_sq(xi.values, s.u, dt);
    }
    const auto point = cylinder_point(*fnl_, s.eta, inv_lambda_);
    table_->combine(correction_coefficients(*fnl_, point), work_);
    for (std::size_t i = 0; i < work_.size(); ++i) work_[i] += s.x[i];
    return trapezoid_distance_sq(work_, s.u, dt);
  }

  void operator()(std::uint64_t replicate, std::span<double> out) { out[0] = loss(replicate); }

 private:
  EstimatorConfig est_;
  PathSimulator sim_;
  std::uint64_t seed_;
  std::optional<CylindricalFunctional> fnl_;
  std::vector<double> inv_lambda_;
  std::optional<UnitSineTable> table_;
  PathSample sample_;
  std::vector<double> work_;
};

/// Monte Carlo L^2(dt) risk of an estimator under the setup's fixed drift.
inline RiskReport mc_risk(const EstimatorConfig& est, const SimulationSetup& setup,
                          const McOptions& opts) {
  detail::check_options(opts);
  const auto m = run_replicates(opts.reps, 1, opts.engine(),
                                [&] { return LossKernel(est, setup, opts.seed); });
  return detail::report(m, 0, opts, "mc_risk");
}

/// Pointwise average of N paths observed under the same drift.
inline PathSample sample_average_estimator(std::span<const PathSample> samples) {
  if (samples.empty()) throw std::invalid_argument("sample_average_estimator: no samples");
  PathSample out = samples.front();
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.x.size() != out.x.size() || s.eta.size() != out.eta.size()) {
      throw std::invalid_argument("sample_average_estimator: mismatched grids");
    }
    for (std::size_t j = 0; j < out.x.size(); ++j) {
      out.x[j] += s.x[j];
      out.xu[j] += s.xu[j];
    }
    for (std::size_t j = 0; j < out.eta.size(); ++j) out.eta[j] += s.eta[j];
  }
  if (samples.size() > 1) {
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (auto& v : out.x) v *= inv;
    for (auto& v : out.xu) v *= inv;
    for (auto& v : out.eta) v *= inv;
  }
  return out;
}

/// Risk of the efficient estimator applied to the average of N independent
/// paths; replicate r uses noise replicates r*N .. r*N + N - 1.
inline RiskReport sample_average_risk(std::size_t n_paths, const SimulationSetup& setup,
                                      const McOptions& opts) {
  detail::check_options(opts);
  detail::require(n_paths >= 1, "sample_average_risk: need at least one path");
  struct Kernel {
    PathSimulator sim;
    std::size_t n_paths;
    std::uint64_t seed;
    std::vector<PathSample> paths;
    void operator()(std::uint64_t r, std::span<double> out) {
      for (std::size_t i = 0; i < n_paths; ++i) sim.simulate_into(seed, r * n_paths + i, paths[i]);
      const auto avg = sample_average_estimator(paths);
      out[0] = trapezoid_distance_sq(avg.x, avg.u, sim.grid().spacing());
    }
  };
  const auto m = run_replicates(opts.reps, 1, opts.engine(), [&] {
    return Kernel{PathSimulator(setup.params, setup.grid(), setup.n_basis, setup.drift), n_paths,
                  opts.seed, std::vector<PathSample>(n_paths)};
  });
  return detail::report(m, 0, opts, "sample_average_risk");
}

/// Bayes risk averaged over drifts drawn from the prior: z = v + Z with Z a
/// centered Gaussian path of volatility tau, observed as x = z + X^u. Both
/// paths use exact Gaussian increments on the grid.
inline RiskReport bayes_prior_risk(const BayesSpec& spec, const VolatilityProfile& sigma,
                                   const ModelParams& params, std::size_t grid_intervals,
                                   const McOptions& opts) {
  detail::check_options(opts);
  const TimeGrid grid(params.horizon(), grid_intervals);
  const auto v = drift_on_grid(spec.prior_mean, grid, params);
  std::vector<double> tau_sd(grid.intervals()), sigma_sd(grid.intervals());
  auto square = [](double l, double) { return l * l; };
  for (std::size_t j = 0; j < grid.intervals(); ++j) {
    const double a = grid[j], b = grid[j + 1], T = grid.horizon();
    tau_sd[j] = std::sqrt(running_time_integral(spec.tau, spec.tau, T, b, square) -
                          running_time_integral(spec.tau, spec.tau, T, a, square));
    sigma_sd[j] = std::sqrt(running_time_integral(sigma, sigma, T, b, square) -
                            running_time_integral(sigma, sigma, T, a, square));
  }
  struct Kernel {
    const BayesSpec& spec;
    const VolatilityProfile& sigma;
    const TimeGrid& grid;
    const std::vector<double>& v;
    const std::vector<double>& tau_sd;
    const std::vector<double>& sigma_sd;
    std::uint64_t seed;
    std::vector<double> dz, dn, z, x;
    void operator()(std::uint64_t r, std::span<double> out) {
      NormalStream(seed, Stream::prior_increments, r).fill(dz);
      NormalStream(seed, Stream::noise_increments, r).fill(dn);
      z[0] = v[0];
      x[0] = v[0];
      double zc = 0.0, nc = 0.0;
      for (std::size_t j = 0; j < dz.size(); ++j) {
        zc += tau_sd[j] * dz[j];
        nc += sigma_sd[j] * dn[j];
        z[j + 1] = v[j + 1] + zc;
        x[j + 1] = z[j + 1] + nc;
      }
      const auto xi = shrinkage_path(x, v, grid, spec.tau, sigma);
      out[0] = trapezoid_distance_sq(xi, z, grid.spacing());
    }
  };
  const auto m = run_replicates(opts.reps, 1, opts.engine(), [&] {
    const std::size_t n = grid.intervals();
    return Kernel{spec,  sigma, grid, v, tau_sd, sigma_sd, opts.seed,
                  std::vector<double>(n), std::vector<double>(n),
                  std::vector<double>(n + 1), std::vector<double>(n + 1)};
  });
  return detail::report(m, 0, opts, "bayes_prior_risk");
}

// ---------------------------------------------------------------------------
// Stein risk identities
// ---------------------------------------------------------------------------

/// One identity: lhs and rhs means with the standard error of their paired
/// per-replicate difference. Pathwise rows carry the maximal deviation in
/// `lhs` and 0 in `rhs`.
struct IdentityRow {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double paired_stderr = 0.0;
  bool pass = false;
};

/// Bias b_t = E[D_t log F] of the Stein estimator and its Jensen bound.
struct BiasReport {
  double bias_norm_sq = 0.0;           // || grid mean of D log F ||^2
  double bias_norm_sq_debiased = 0.0;  // minus the trace of the mean's covariance
  double bias_stderr = 0.0;
  double bound = 0.0;  // E || D log F ||^2 from the closed form
  double bound_stderr = 0.0;
  double grad_norm_sq_grid = 0.0;  // E || D log F ||^2 by grid quadrature
  bool within_bound = false;
  bool jensen_strict = false;
};

struct IdentitySweep {
  std::vector<IdentityRow> rows;
  BiasReport bias;
  RiskReport stein_risk;
  RiskReport efficient_risk;
};

inline constexpr double kPathwiseTolerance = 1e-10;
inline constexpr double kStderrFactor = 3.0;

namespace detail {

// Per-replicate layout of the identity sweep.
enum SweepSlot : std::size_t {
  kSteinLoss,
  kEfficientLoss,
  kGradNormGrid,
  kGradNormClosed,
  kDeltaF,
  kDeltaSqrtF,
  kDiffUnbiased,
  kDiffSqrtLaplacian,
  kDiffLogGradient,
  kDiffHarmonic,
  kSqrtLaplacianDeviation,
  kFormsDeviation,
  kFixedSlots
};

}  // namespace detail

/// Evaluates, on common random numbers, every identity linking the Stein risk
/// to the closed-form Laplacian ratios, plus the bias bound.
///
/// The Cramer-Rao term R is estimated on the same replicates by the loss of
/// the efficient estimator, which removes its sampling noise (and the
/// truncation bias) from each paired difference. `lambda_scale` multiplies
/// the eigenvalues used to form the functional's arguments; any value other
/// than 1 breaks the identities and exists as a negative control.
inline IdentitySweep identity_sweep(const SteinConfig& cfg, const SimulationSetup& setup,
                                    const McOptions& opts, double lambda_scale = 1.0) {
  using namespace detail;
  check_options(opts);
  check_stein_n(cfg.n);
  const auto fnl = CylindricalFunctional::targeting(cfg.n, cfg.a, setup.drift, setup.params);
  const TimeGrid grid = setup.grid();
  const std::size_t n = cfg.n;
  const std::size_t points = grid.points();
  const std::size_t coeff_slot = kFixedSlots;
  const std::size_t product_slot = coeff_slot + n;
  const std::size_t grid_slot = product_slot + n * (n + 1) / 2;
  const std::size_t width = grid_slot + points;
  const UnitSineTable table(grid, n);
  auto inv_lambda = inverse_eigenvalues(n, setup.params);
  for (double& v : inv_lambda) v /= lambda_scale;
  const bool james_stein = fnl.james_stein();
  const bool harmonic = fnl.a() == 0.0 || james_stein;

  struct Kernel {
    const CylindricalFunctional& fnl;
    const UnitSineTable& table;
    const std::vector<double>& inv_lambda;
    const SimulationSetup& setup;
    PathSimulator sim;
    std::uint64_t seed;
    std::size_t coeff_slot, product_slot, grid_slot;
    bool james_stein;
    PathSample s;
    std::vector<double> corr, est;

    void operator()(std::uint64_t r, std::span<double> out) {
      sim.simulate_into(seed, r, s);
      const double dt = sim.grid().spacing();
      const auto point = cylinder_point(fnl, s.eta, inv_lambda);
      const auto c = correction_coefficients(fnl, point);
      table.combine(c, corr);
      for (std::size_t i = 0; i < est.size(); ++i) est[i] = s.x[i] + corr[i];
      const double stein_loss = trapezoid_distance_sq(est, s.u, dt);
      const double eff_loss = trapezoid_distance_sq(s.x, s.u, dt);
      const double grad_grid = trapezoid_norm_sq(corr, dt);
      const double grad_closed = log_gradient_norm_sq(fnl, point);
      const auto lr = laplacian_ratios(fnl, point);
      const double laplace_log = lr.delta_f_over_f - grad_closed;
      out[kSteinLoss] = stein_loss;
      out[kEfficientLoss] = eff_loss;
      out[kGradNormGrid] = grad_grid;
      out[kGradNormClosed] = grad_closed;
      out[kDeltaF] = lr.delta_f_over_f;
      out[kDeltaSqrtF] = lr.delta_sqrt_f_over_sqrt_f;
      out[kDiffUnbiased] = stein_loss - (eff_loss + grad_grid + 2.0 * laplace_log);
      out[kDiffSqrtLaplacian] = stein_loss - (eff_loss + 4.0 * lr.delta_sqrt_f_over_sqrt_f);
      out[kDiffLogGradient] = stein_loss - (eff_loss - grad_closed + 2.0 * lr.delta_f_over_f);
      out[kDiffHarmonic] = stein_loss - (eff_loss - grad_closed);
      out[kSqrtLaplacianDeviation] =
          4.0 * lr.delta_sqrt_f_over_sqrt_f - (2.0 * lr.delta_f_over_f - grad_grid);
      out[kFormsDeviation] = 0.0;
      if (james_stein) {
        const auto alt =
            stein_correction_projection_form(s, sim.grid(), setup.drift, setup.params, fnl.n());
        double worst = 0.0;
        for (std::size_t i = 0; i < corr.size(); ++i) {
          worst = std::max(worst, std::abs(corr[i] - alt.values[i]));
        }
        out[kFormsDeviation] = worst;
      }
      std::size_t p = product_slot;
      for (std::size_t i = 0; i < c.size(); ++i) {
        out[coeff_slot + i] = c[i];
        for (std::size_t j = i; j < c.size(); ++j) out[p++] = c[i] * c[j];
      }
      std::copy(corr.begin(), corr.end(), out.begin() + static_cast<std::ptrdiff_t>(grid_slot));
    }
  };

  const auto m = run_replicates(opts.reps, width, opts.engine(), [&] {
    return Kernel{fnl,
                  table,
                  inv_lambda,
                  setup,
                  PathSimulator(setup.params, grid, setup.n_basis, setup.drift),
                  opts.seed,
                  coeff_slot,
                  product_slot,
                  grid_slot,
                  james_stein,
                  PathSample{},
                  std::vector<double>(points),
                  std::vector<double>(points)};
  });

  IdentitySweep out;
  out.stein_risk = report(m, kSteinLoss, opts, "stein_risk");
  out.efficient_risk = report(m, kEfficientLoss, opts, "efficient_risk");
  const double lhs = m.mean(kSteinLoss);
  auto paired = [&](std::string name, std::size_t diff_slot) {
    const double d = m.mean(diff_slot);
    const double se = m.stderr_of_mean(diff_slot);
    return IdentityRow{std::move(name), lhs, lhs - d, se, std::abs(d) <= kStderrFactor * se};
  };
  auto pathwise = [&](std::string name, std::size_t slot) {
    const double dev = m.max_abs(slot);
    return IdentityRow{std::move(name), dev, 0.0, 0.0, dev <= kPathwiseTolerance};
  };
  out.rows.push_back(paired("unbiased_risk_estimate", kDiffUnbiased));
  out.rows.push_back(paired("stein_risk_sqrt_laplacian", kDiffSqrtLaplacian));
  out.rows.push_back(paired("log_gradient_risk", kDiffLogGradient));
  if (harmonic) out.rows.push_back(paired("harmonic_equality", kDiffHarmonic));
  out.rows.push_back(pathwise("sqrt_laplacian_identity_pathwise", kSqrtLaplacianDeviation));
  if (james_stein) out.rows.push_back(pathwise("stein_forms_pathwise", kFormsDeviation));

  // Bias: grid mean of the corrections, and the delta-method error from the
  // coefficient covariance (the grid is exact for these sines).
  BiasReport& bias = out.bias;
  std::vector<double> mean_corr(m.means().begin() + static_cast<std::ptrdiff_t>(grid_slot),
                                m.means().end());
  bias.bias_norm_sq = trapezoid_norm_sq(mean_corr, grid.spacing());
  std::vector<double> cov(n * n);
  {
    std::size_t p = product_slot;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j, ++p) {
        const double v = m.mean(p) - m.mean(coeff_slot + i) * m.mean(coeff_slot + j);
        cov[i * n + j] = cov[j * n + i] = v;
      }
    }
  }
  const double reps = static_cast<double>(m.count());
  double quad = 0.0, trace = 0.0, trace_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    trace += cov[i * n + i];
    for (std::size_t j = 0; j < n; ++j) {
      quad += m.mean(coeff_slot + i) * cov[i * n + j] * m.mean(coeff_slot + j);
      trace_sq += cov[i * n + j] * cov[j * n + i];
    }
  }
  bias.bias_norm_sq_debiased = bias.bias_norm_sq - trace / reps;
  bias.bias_stderr = std::sqrt(std::max(0.0, 4.0 * quad / reps + 2.0 * trace_sq / (reps * reps)));
  bias.bound = m.mean(kGradNormClosed);
  bias.bound_stderr = m.stderr_of_mean(kGradNormClosed);
  bias.grad_norm_sq_grid = m.mean(kGradNormGrid);
  bias.within_bound = bias.bias_norm_sq <= bias.bound + kStderrFactor * bias.bound_stderr;
  bias.jensen_strict =
      bias.bound - bias.bias_norm_sq >
      kStderrFactor * std::hypot(bias.bound_stderr, bias.bias_stderr);
  out.rows.push_back(IdentityRow{"bias_bound", bias.bias_norm_sq, bias.bound, bias.bound_stderr,
                                 bias.within_bound});
  return out;
}

/// Unbiased risk estimate: E||X + xi - u||^2 vs
/// R + E||xi||^2 + 2 E[Delta log F].
inline IdentityRow unbiased_risk_identity_check(const SteinConfig& cfg, const SimulationSetup& setup,
                                                const McOptions& opts) {
  return identity_sweep(cfg, setup, opts).rows.at(0);
}

/// E||X + D log F - u||^2 vs R + 4 E[Delta sqrt(F) / sqrt(F)], together with
/// the R - E||D log F||^2 + 2 E[Delta F / F] form.
inline std::pair<IdentityRow, IdentityRow> stein_risk_identity_check(const SteinConfig& cfg,
                                                                     const SimulationSetup& setup,
                                                                     const McOptions& opts) {
  const auto sweep = identity_sweep(cfg, setup, opts);
  return {sweep.rows.at(1), sweep.rows.at(2)};
}

inline BiasReport bias_norm(std::size_t n, const SimulationSetup& setup, const McOptions& opts) {
  return identity_sweep(SteinConfig{n, 2.0 - static_cast<double>(n)}, setup, opts).bias;
}

// ---------------------------------------------------------------------------
// Gain of the Stein estimator over the efficient estimator
// ---------------------------------------------------------------------------

struct GainRow {
  std::size_t n = 0;
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Gain as a function of n for fixed (alpha, sigma, T) on common random
/// numbers.
struct GainCurve {
  double alpha = 0.0;
  double sigma = 1.0;
  double horizon = 1.0;
  std::uint64_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<GainRow> rows;
};

namespace detail {

/// alpha sqrt(2T) / sigma, written so that parameter changes preserving
/// 2T / sigma^2 by powers of two reproduce it bit for bit.
inline double drift_ratio(double alpha, double sigma, double horizon) {
  return alpha * std::sqrt(2.0 * horizon / (sigma * sigma));
}

}  // namespace detail

/// G(alpha, sigma, T, n) = 2 (n-2)^2 E[ (sum_{l<=n} (pi (l - 1/2) eta_l -
/// alpha sqrt(2T)/sigma (-1)^l)^2)^{-1} ] for every n in [n_min, n_max],
/// using the first n noise coefficients of each replicate.
inline GainCurve gain_curve(double alpha, double sigma, double horizon, std::size_t n_min,
                            std::size_t n_max, const McOptions& opts) {
  detail::check_options(opts);
  detail::check_stein_n(n_min);
  detail::require(n_max >= n_min, "gain_curve: n_max must be >= n_min");
  const ModelParams params(sigma, horizon, alpha);  // validates
  const double c = detail::drift_ratio(alpha, params.sigma(), params.horizon());
  const std::size_t width = n_max - n_min + 1;
  const auto m = run_replicates(opts.reps, width, opts.engine(), [&] {
    return [&, eta = std::vector<double>(n_max)](std::uint64_t r, std::span<double> out) mutable {
      NormalStream(opts.seed, Stream::noise, r).fill(eta);
      double s = 0.0;
      for (std::size_t l = 1; l <= n_max; ++l) {
        const double sign = (l % 2 == 0) ? 1.0 : -1.0;
        const double term = std::numbers::pi * (static_cast<double>(l) - 0.5) * eta[l - 1] - c * sign;
        s += term * term;
        if (l >= n_min) {
          if (!(s > 0.0)) throw DegenerateSampleError("gain: zero cylindrical radius");
          const double k = static_cast<double>(l) - 2.0;
          out[l - n_min] = 2.0 * k * k / s;
        }
      }
    };
  });
  GainCurve curve{alpha, sigma, horizon, m.count(), opts.seed, {}};
  for (std::size_t i = 0; i < width; ++i) {
    curve.rows.push_back({n_min + i, m.mean(i), m.stderr_of_mean(i)});
  }
  return curve;
}

inline RiskReport gain(double alpha, double sigma, double horizon, std::size_t n,
                       const McOptions& opts) {
  const auto curve = gain_curve(alpha, sigma, horizon, n, n, opts);
  return {curve.rows[0].mean, curve.rows[0].standard_error, curve.reps, opts.seed, "gain"};
}

/// Gain evaluated both by the closed form and by the paired risk difference
/// (R_hat - risk(Stein)) / R on simulated paths.
struct GainCrossCheck {
  RiskReport closed_form;
  RiskReport risk_difference;
  double paired_stderr = 0.0;
  double truncation_allowance = 0.0;  // relative tail of the truncated expansion
};

inline GainCrossCheck gain_cross_check(std::size_t n, const SimulationSetup& setup,
                                       const McOptions& opts) {
  detail::check_options(opts);
  detail::check_stein_n(n);
  const auto* lin = std::get_if<LinearDrift>(&setup.drift);
  detail::require(lin != nullptr, "gain_cross_check: requires a linear drift");
  const double c = detail::drift_ratio(lin->slope, setup.params.sigma(), setup.params.horizon());
  const double R = setup.params.efficient_risk();
  const EstimatorConfig stein = SteinConfig{n, 2.0 - static_cast<double>(n)};
  const EstimatorConfig eff = EfficientConfig{};
  struct Kernel {
    LossKernel stein, eff;
    PathSimulator sim;
    std::uint64_t seed;
    std::size_t n;
    double c, R;
    PathSample s;
    void operator()(std::uint64_t r, std::span<double> out) {
      sim.simulate_into(seed, r, s);
      double sum = 0.0;
      for (std::size_t l = 1; l <= n; ++l) {
        const double sign = (l % 2 == 0) ? 1.0 : -1.0;
        const double term = std::numbers::pi * (static_cast<double>(l) - 0.5) * s.eta[l - 1] - c * sign;
        sum += term * term;
      }
      const double k = static_cast<double>(n) - 2.0;
      out[0] = 2.0 * k * k / sum;
      out[1] = (eff.loss_of(s) - stein.loss_of(s)) / R;
      out[2] = out[0] - out[1];
    }
  };
  const auto m = run_replicates(opts.reps, 3, opts.engine(), [&] {
    return Kernel{LossKernel(stein, setup, opts.seed), LossKernel(eff, setup, opts.seed),
                  PathSimulator(setup.params, setup.grid(), setup.n_basis, setup.drift),
                  opts.seed, n, c, R, PathSample{}};
  });
  GainCrossCheck out;
  out.closed_form = detail::report(m, 0, opts, "gain_closed_form");
  out.risk_difference = detail::report(m, 1, opts, "gain_risk_difference");
  out.paired_stderr = m.stderr_of_mean(2);
  out.truncation_allowance = 1.0 - truncated_efficient_risk(setup.params, setup.n_basis) / R;
  return out;
}

/// Limit of the gain as sigma^2 / (alpha^2 T) -> infinity:
/// (n-2)^2 (8/pi^2) E[(sum_{l<=n} (2l-1)^2 eta_l^2)^{-1}].
inline RiskReport gain_large_sigma_limit(std::size_t n, const McOptions& opts) {
  detail::check_options(opts);
  detail::check_stein_n(n);
  const double k = static_cast<double>(n) - 2.0;
  const double scale = k * k * 8.0 / (std::numbers::pi * std::numbers::pi);
  const auto m = run_replicates(opts.reps, 1, opts.engine(), [&] {
    return [&, eta = std::vector<double>(n)](std::uint64_t r, std::span<double> out) mutable {
      NormalStream(opts.seed, Stream::noise, r).fill(eta);
      double s = 0.0;
      for (std::size_t l = 1; l <= n; ++l) {
        const double w = 2.0 * static_cast<double>(l) - 1.0;
        s += w * w * eta[l - 1] * eta[l - 1];
      }
      if (!(s > 0.0)) throw DegenerateSampleError("gain limit: zero radius");
      out[0] = scale / s;
    };
  });
  return detail::report(m, 0, opts, "gain_large_sigma_limit");
}

/// Integrand of the universal constant for one standard normal 4-vector:
/// (32/pi^2) / (x^2 + 9y^2 + 25z^2 + 49r^2). Even in every coordinate.
inline double universal_constant_integrand(std::span<const double, 4> g) {
  const double q = g[0] * g[0] + 9.0 * g[1] * g[1] + 25.0 * g[2] * g[2] + 49.0 * g[3] * g[3];
  if (!(q > 0.0)) throw DegenerateSampleError("universal constant: zero quadratic form");
  return 32.0 / (std::numbers::pi * std::numbers::pi) / q;
}

/// Percentage-gain floor for large sigma, about 11.38%. Uses its own random
/// stream so it is independent of gain_large_sigma_limit for the same seed.
inline RiskReport universal_constant(const McOptions& opts, bool negate = false) {
  detail::check_options(opts);
  const auto m = run_replicates(opts.reps, 1, opts.engine(), [&] {
    return [&](std::uint64_t r, std::span<double> out) {
      std::array<double, 4> g{};
      NormalStream(opts.seed, Stream::constant, r).fill(g);
      if (negate) {
        for (double& v : g) v = -v;
      }
      out[0] = universal_constant_integrand(g);
    };
  });
  return detail::report(m, 0, opts, "universal_constant");
}

/// (1 - 2/n)^2 sigma^2 / (alpha^2 T), the stated small-ratio equivalent.
inline double gain_small_ratio_asymptote(double alpha, double sigma, double horizon,
                                         std::size_t n) {
  detail::check_stein_n(n);
  if (alpha == 0.0) throw std::invalid_argument("gain_small_ratio_asymptote: alpha must be nonzero");
  const double f = 1.0 - 2.0 / static_cast<double>(n);
  return f * f * sigma * sigma / (alpha * alpha * horizon);
}

inline constexpr double kSixOverPiSquared = 6.0 / (std::numbers::pi * std::numbers::pi);

/// n pi^2 G / 6, which tends to 1 as n grows.
inline RiskReport asymptotic_gain_check(std::size_t n, const McOptions& opts, double alpha = 1.0,
                                        double sigma = 1.0, double horizon = 1.0) {
  const auto g = gain(alpha, sigma, horizon, n, opts);
  const double scale = static_cast<double>(n) / kSixOverPiSquared;
  return {g.mean * scale, g.standard_error * scale, g.reps, g.seed, "asymptotic_gain_ratio"};
}

struct OptimalN {
  std::size_t n_opt = 0;
  GainCurve curve;
};

/// argmax of the gain over n = 3..n_max; ties go to the smaller n.
inline OptimalN optimal_n_search(double alpha, double sigma, double horizon, std::size_t n_max,
                                 const McOptions& opts) {
  OptimalN out{0, gain_curve(alpha, sigma, horizon, 3, n_max, opts)};
  double best = -1.0;
  for (const auto& row : out.curve.rows) {
    if (row.mean > best) {
      best = row.mean;
      out.n_opt = row.n;
    }
  }
  return out;
}

/// Paired comparison of two Monte Carlo means on common random numbers.
struct PairedReport {
  RiskReport first;
  RiskReport second;
  double paired_stderr = 0.0;
};

/// gain(alpha, sigma, T, n) against its large-sigma limit on the same noise.
inline PairedReport gain_limit_gap(double alpha, double sigma, double horizon, std::size_t n,
                                   const McOptions& opts) {
  detail::check_options(opts);
  detail::check_stein_n(n);
  const double c = detail::drift_ratio(alpha, sigma, horizon);
  const double k = static_cast<double>(n) - 2.0;
  const auto m = run_replicates(opts.reps, 3, opts.engine(), [&] {
    return [&, eta = std::vector<double>(n)](std::uint64_t r, std::span<double> out) mutable {
      NormalStream(opts.seed, Stream::noise, r).fill(eta);
      double s = 0.0, q = 0.0;
      for (std::size_t l = 1; l <= n; ++l) {
        const double sign = (l % 2 == 0) ? 1.0 : -1.0;
        const double term = std::numbers::pi * (static_cast<double>(l) - 0.5) * eta[l - 1] - c * sign;
        s += term * term;
        const double w = 2.0 * static_cast<double>(l) - 1.0;
        q += w * w * eta[l - 1] * eta[l - 1];
      }
      out[0] = 2.0 * k * k / s;
      out[1] = k * k * 8.0 / (std::numbers::pi * std::numbers::pi) / q;
      out[2] = out[0] - out[1];
    };
  });
  return {detail::report(m, 0, opts, "gain"), detail::report(m, 1, opts, "gain_large_sigma_limit"),
          m.stderr_of_mean(2)};
}

}  // namespace driftlab
