#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "driftlab/errors.hpp"
#include "driftlab/process_sim.hpp"

namespace driftlab {

enum class EstimatorKind { efficient, bayes, stein };

/// Grid values of a drift estimate.
struct EstimateSeries {
  std::vector<double> values;
  EstimatorKind label = EstimatorKind::efficient;
};

// ---------------------------------------------------------------------------
// Efficient estimator
// ---------------------------------------------------------------------------

/// The observed path itself; unbiased and attains the Cramer-Rao bound.
inline EstimateSeries efficient_estimate(const PathSample& sample) {
  return {sample.x, EstimatorKind::efficient};
}

// ---------------------------------------------------------------------------
// Bayes estimator, independent-increment case
// ---------------------------------------------------------------------------

/// Gaussian prior on the drift: mean `prior_mean`, increments with
/// volatility `tau`.
struct BayesSpec {
  VolatilityProfile tau = VolatilityProfile::constant(1.0);
  DriftSpec prior_mean = LinearDrift{0.0};
};

/// xi_t = int_0^t sigma^2/(tau^2+sigma^2) dv + int_0^t tau^2/(tau^2+sigma^2) dx
/// with weights frozen at the left end of each grid interval.
///
/// Runs of intervals with equal weights are summed by telescoping, so a
/// constant profile gives xi_i = w x_i + (1 - w) v_i without accumulated
/// rounding. Shared by the Bayes estimator and the path filter.
inline std::vector<double> shrinkage_path(std::span<const double> x, std::span<const double> v,
                                          const TimeGrid& grid, const VolatilityProfile& tau,
                                          const VolatilityProfile& sigma) {
  if (x.size() != grid.points() || v.size() != grid.points()) {
    throw std::invalid_argument("shrinkage_path: shape mismatch");
  }
  tau.check_horizon(grid.horizon());
  sigma.check_horizon(grid.horizon());
  std::vector<double> out(grid.points());
  out[0] = 0.0;
  std::size_t start = 0;
  double w = 0.0, wc = 0.0;
  for (std::size_t j = 0; j < grid.intervals(); ++j) {
    const double tj = grid[j];
    const double t2 = tau.level(tj) * tau.level(tj);
    const double s2 = sigma.level(tj) * sigma.level(tj);
    const double wj = t2 / (t2 + s2);
    const double wcj = s2 / (t2 + s2);
    if (j == 0 || wj != w || wcj != wc) {
      start = j;
      w = wj;
      wc = wcj;
    }
    out[j + 1] = out[start] + w * (x[j + 1] - x[start]) + wc * (v[j + 1] - v[start]);
  }
  return out;
}

inline EstimateSeries bayes_estimate(const PathSample& sample, const TimeGrid& grid,
                                     const BayesSpec& spec, const VolatilityProfile& sigma,
                                     const ModelParams& params) {
  const auto v = drift_on_grid(spec.prior_mean, grid, params);
  return {shrinkage_path(sample.x, v, grid, spec.tau, sigma), EstimatorKind::bayes};
}

/// int_0^T int_0^t tau^2 sigma^2 / (tau^2 + sigma^2) ds dt, exact for
/// piecewise-constant profiles.
inline double bayes_risk_closed_form(const VolatilityProfile& tau, const VolatilityProfile& sigma,
                                     double horizon) {
  return nested_time_integral(tau, sigma, horizon, [](double t, double s) {
    const double t2 = t * t, s2 = s * s;
    return t2 * s2 / (t2 + s2);
  });
}

struct MseDecomposition {
  double variance_term = 0.0;
  double bias_sq_term = 0.0;
  double total() const noexcept { return variance_term + bias_sq_term; }
};

/// Variance and squared-bias terms of the Bayes estimator's risk at a fixed
/// drift u. The bias integral uses the same left-point discretization as
/// bayes_estimate, so the sum matches its Monte Carlo risk on the grid.
inline MseDecomposition bayes_mse_decomposition(const BayesSpec& spec, const DriftSpec& drift,
                                                const VolatilityProfile& sigma,
                                                const TimeGrid& grid, const ModelParams& params) {
  MseDecomposition out;
  out.variance_term = nested_time_integral(spec.tau, sigma, grid.horizon(), [](double t, double s) {
    const double t2 = t * t, s2 = s * s;
    const double w = t2 / (t2 + s2);
    return w * w * s2;
  });
  const auto v = drift_on_grid(spec.prior_mean, grid, params);
  const auto u = drift_on_grid(drift, grid, params);
  std::vector<double> gap(grid.points());
  for (std::size_t i = 0; i < gap.size(); ++i) gap[i] = v[i] - u[i];
  // Bias path: the shrinkage of (v - u) with a zero observation.
  const std::vector<double> zero(grid.points(), 0.0);
  const auto bias = shrinkage_path(zero, gap, grid, spec.tau, sigma);
  out.bias_sq_term = trapezoid_norm_sq(bias, grid.spacing());
  return out;
}

// ---------------------------------------------------------------------------
// Cylindrical functionals F_{n,a,b} = || (lambda_k^{-1} X^u(h_k) + b_k)_k ||^a
// ---------------------------------------------------------------------------

class CylindricalFunctional {
 public:
  CylindricalFunctional(std::size_t n, double a, std::vector<double> offset)
      : n_(n), a_(a), offset_(std::move(offset)) {
    detail::require(n >= 3, "CylindricalFunctional: n must be >= 3");
    detail::require(std::isfinite(a), "CylindricalFunctional: a must be finite");
    detail::require(offset_.size() == n, "CylindricalFunctional: offset must have n entries");
    const double dn = static_cast<double>(n);
    sqrt_superharmonic_ = a >= 4.0 - 2.0 * dn && a <= 0.0;
    superharmonic_ = a >= 2.0 - dn && a <= 0.0;
  }

  /// Offsets b_k = lambda_k^{-1} <u, h_k>, so that the arguments become the
  /// observable coefficients lambda_k^{-1} X(h_k).
  static CylindricalFunctional targeting(std::size_t n, double a, const DriftSpec& drift,
                                         const ModelParams& params) {
    std::vector<double> b(n);
    for (std::size_t k = 1; k <= n; ++k) {
      b[k - 1] = drift_inner_product(drift, k, params) / eigenvalue(k, params);
    }
    return CylindricalFunctional(n, a, std::move(b));
  }

  std::size_t n() const noexcept { return n_; }
  double a() const noexcept { return a_; }
  std::span<const double> offset() const noexcept { return offset_; }

  bool sqrt_superharmonic() const noexcept { return sqrt_superharmonic_; }
  bool superharmonic() const noexcept { return superharmonic_; }
  bool james_stein() const noexcept { return a_ == 2.0 - static_cast<double>(n_); }

 private:
  std::size_t n_;
  double a_;
  std::vector<double> offset_;
  bool sqrt_superharmonic_ = false;
  bool superharmonic_ = false;
};

/// Arguments z_k = b_k + lambda_k^{-1} X^u(h_k) of f_{n,a,b} and their squared
/// norm D_n.
struct CylinderPoint {
  std::vector<double> z;
  double radius_sq = 0.0;
};

inline CylinderPoint cylinder_point_from_arguments(std::vector<double> z) {
  CylinderPoint p;
  for (double v : z) p.radius_sq += v * v;
  if (!(p.radius_sq > 0.0)) {
    throw DegenerateSampleError("cylindrical radius is zero; D log F undefined");
  }
  p.z = std::move(z);
  return p;
}

/// z_k = b_k + inverse_lambda[k-1] * eta_k using X^u(h_k) = eta_k.
inline CylinderPoint cylinder_point(const CylindricalFunctional& fnl, std::span<const double> eta,
                                    std::span<const double> inverse_lambda) {
  const std::size_t n = fnl.n();
  if (eta.size() < n || inverse_lambda.size() < n) {
    throw std::out_of_range("cylinder_point: fewer coefficients than n");
  }
  std::vector<double> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = fnl.offset()[k] + inverse_lambda[k] * eta[k];
  return cylinder_point_from_arguments(std::move(z));
}

inline std::vector<double> inverse_eigenvalues(std::size_t n, const ModelParams& params) {
  std::vector<double> out(n);
  for (std::size_t k = 1; k <= n; ++k) out[k - 1] = 1.0 / eigenvalue(k, params);
  return out;
}

inline CylinderPoint cylinder_point(const CylindricalFunctional& fnl, const PathSample& sample,
                                    const ModelParams& params) {
  return cylinder_point(fnl, sample.eta, inverse_eigenvalues(fnl.n(), params));
}

/// Coordinates of D log F along the orthonormal functions lambda_k^{-1} Gamma h_k.
inline std::vector<double> correction_coefficients(const CylindricalFunctional& fnl,
                                                   const CylinderPoint& p) {
  std::vector<double> c(p.z.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = fnl.a() * p.z[k] / p.radius_sq;
  return c;
}

struct LaplacianRatios {
  double delta_f_over_f = 0.0;
  double delta_sqrt_f_over_sqrt_f = 0.0;
};

/// Delta F / F = a (n + a - 2) / D_n and Delta sqrt(F) / sqrt(F) =
/// a (n - 2 + a/2) / (2 D_n).
inline LaplacianRatios laplacian_ratios(const CylindricalFunctional& fnl, const CylinderPoint& p) {
  const double n = static_cast<double>(fnl.n());
  const double a = fnl.a();
  return {a * (n + a - 2.0) / p.radius_sq, a * (n - 2.0 + 0.5 * a) / 2.0 / p.radius_sq};
}

/// ||D log F||^2_{L^2(dt)} = a^2 / D_n.
inline double log_gradient_norm_sq(const CylindricalFunctional& fnl, const CylinderPoint& p) {
  return fnl.a() * fnl.a() / p.radius_sq;
}

/// (n - 2)^2 / D_n; defined for the harmonic exponent a = 2 - n only.
inline double correction_norm_sq(const CylindricalFunctional& fnl, const CylinderPoint& p) {
  if (!fnl.james_stein()) throw std::invalid_argument("correction_norm_sq: requires a = 2 - n");
  const double m = static_cast<double>(fnl.n()) - 2.0;
  return m * m / p.radius_sq;
}

/// Grid values of the orthonormal functions e_k = lambda_k^{-1} Gamma h_k,
/// k = 1..n, stored row-major.
class UnitSineTable {
 public:
  UnitSineTable(const TimeGrid& grid, std::size_t n) : n_(n), points_(grid.points()),
                                                      values_(n * grid.points()) {
    const double T = grid.horizon();
    const double scale = std::sqrt(2.0 / T);
    for (std::size_t k = 1; k <= n; ++k) {
      const double freq = (static_cast<double>(k) - 0.5) * std::numbers::pi / T;
      for (std::size_t i = 0; i < points_; ++i) {
        values_[(k - 1) * points_ + i] = scale * std::sin(freq * grid[i]);
      }
    }
  }

  std::size_t size() const noexcept { return n_; }

  /// out = sum_k c[k-1] e_k on the grid.
  void combine(std::span<const double> c, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < c.size() && k < n_; ++k) {
      const double* row = values_.data() + k * points_;
      for (std::size_t i = 0; i < points_; ++i) out[i] += c[k] * row[i];
    }
  }

 private:
  std::size_t n_;
  std::size_t points_;
  std::vector<double> values_;
};

/// D_t log F_{n,a,b} on the grid:
/// a sum_i lambda_i^{-1} Gamma h_i(t) z_i / sum_l z_l^2.
inline EstimateSeries stein_correction(const PathSample& sample, const TimeGrid& grid,
                                       const CylindricalFunctional& fnl,
                                       const ModelParams& params) {
  const auto point = cylinder_point(fnl, sample, params);
  const auto c = correction_coefficients(fnl, point);
  EstimateSeries out{std::vector<double>(grid.points()), EstimatorKind::stein};
  UnitSineTable(grid, fnl.n()).combine(c, out.values);
  return out;
}

/// X + D log F_{n,a,b}.
inline EstimateSeries stein_estimate(const PathSample& sample, const TimeGrid& grid,
                                     const CylindricalFunctional& fnl, const ModelParams& params) {
  auto out = stein_correction(sample, grid, fnl, params);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += sample.x[i];
  return out;
}

/// Pi_n X(t) = sum_{k<=n} lambda_k^{-2} X(h_k) Gamma h_k(t), the orthogonal
/// projection onto span(Gamma h_1..Gamma h_n) in L^2(dt).
inline EstimateSeries scaled_projection(const PathSample& sample, const TimeGrid& grid,
                                        const DriftSpec& drift, const ModelParams& params,
                                        std::size_t n) {
  if (n < 1 || n > sample.eta.size()) throw std::out_of_range("scaled_projection: n out of range");
  const SineBasis basis(params, n);
  std::vector<double> weight(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double lambda = basis.lambda(k);
    weight[k - 1] = (sample.eta[k - 1] + drift_inner_product(drift, k, params)) / (lambda * lambda);
  }
  EstimateSeries out{std::vector<double>(grid.points(), 0.0), EstimatorKind::stein};
  for (std::size_t i = 0; i < grid.points(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= n; ++k) acc += weight[k - 1] * basis.gamma_h(k, grid[i]);
    out.values[i] = acc;
  }
  return out;
}

/// Squared L^2(dt) norm of the projection from its coordinates:
/// sum_{k<=n} (lambda_k^{-1} X(h_k))^2.
inline double scaled_projection_norm_sq(const PathSample& sample, const DriftSpec& drift,
                                        const ModelParams& params, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double y = observed_coefficient(sample, drift, k, params);
    acc += y * y;
  }
  return acc;
}

/// -(n - 2) Pi_n X / ||Pi_n X||^2, the James-Stein form of D log F_{n,2-n,b}
/// for the targeting offsets.
inline EstimateSeries stein_correction_projection_form(const PathSample& sample,
                                                       const TimeGrid& grid,
                                                       const DriftSpec& drift,
                                                       const ModelParams& params, std::size_t n) {
  detail::require(n >= 3, "stein_correction_projection_form: n must be >= 3");
  auto proj = scaled_projection(sample, grid, drift, params, n);
  const double norm_sq = scaled_projection_norm_sq(sample, drift, params, n);
  if (!(norm_sq > 0.0)) throw DegenerateSampleError("projection norm is zero");
  const double factor = -(static_cast<double>(n) - 2.0) / norm_sq;
  for (double& v : proj.values) v *= factor;
  return proj;
}

}  // namespace driftlab
