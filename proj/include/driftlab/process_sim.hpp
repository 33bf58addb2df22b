#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "driftlab/errors.hpp"
#include "driftlab/philox.hpp"
#include "driftlab/sine_synthesis.hpp"

namespace driftlab {

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

/// Constant-volatility Brownian model on [0, T], with the slope used when the
/// drift is linear.
class ModelParams {
 public:
  ModelParams(double sigma, double horizon, double alpha = 0.0)
      : sigma_(sigma), horizon_(horizon), alpha_(alpha) {
    detail::require(std::isfinite(sigma) && sigma > 0.0, "ModelParams: sigma must be positive");
    detail::require(std::isfinite(horizon) && horizon > 0.0, "ModelParams: T must be positive");
    detail::require(std::isfinite(alpha), "ModelParams: alpha must be finite");
  }

  double sigma() const noexcept { return sigma_; }
  double horizon() const noexcept { return horizon_; }
  double alpha() const noexcept { return alpha_; }

  /// sigma^2 T^2 / 2, the risk of the efficient estimator.
  double efficient_risk() const noexcept { return 0.5 * sigma_ * sigma_ * horizon_ * horizon_; }

 private:
  double sigma_;
  double horizon_;
  double alpha_;
};

/// Piecewise-constant volatility: levels[i] holds on [breakpoints[i-1],
/// breakpoints[i]) with the outer ends at 0 and T.
class VolatilityProfile {
 public:
  static VolatilityProfile constant(double level) { return VolatilityProfile({level}, {}); }

  static VolatilityProfile piecewise(std::vector<double> levels, std::vector<double> breakpoints) {
    return VolatilityProfile(std::move(levels), std::move(breakpoints));
  }

  bool is_constant() const noexcept { return levels_.size() == 1; }
  std::span<const double> levels() const noexcept { return levels_; }
  std::span<const double> breakpoints() const noexcept { return breakpoints_; }

  double level(double t) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return levels_[static_cast<std::size_t>(it - breakpoints_.begin())];
  }

  void check_horizon(double horizon) const {
    if (!breakpoints_.empty() && !(breakpoints_.back() < horizon)) {
      throw std::invalid_argument("VolatilityProfile: breakpoints must lie inside (0, T)");
    }
  }

 private:
  VolatilityProfile(std::vector<double> levels, std::vector<double> breakpoints)
      : levels_(std::move(levels)), breakpoints_(std::move(breakpoints)) {
    detail::require(!levels_.empty(), "VolatilityProfile: at least one level required");
    detail::require(levels_.size() == breakpoints_.size() + 1,
                    "VolatilityProfile: need one more level than breakpoints");
    for (double l : levels_) {
      detail::require(std::isfinite(l) && l > 0.0, "VolatilityProfile: levels must be positive");
    }
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      detail::require(std::isfinite(breakpoints_[i]) && breakpoints_[i] > 0.0,
                      "VolatilityProfile: breakpoints must be positive");
      if (i > 0) {
        detail::require(breakpoints_[i] > breakpoints_[i - 1],
                        "VolatilityProfile: breakpoints must be strictly increasing");
      }
    }
  }

  std::vector<double> levels_;
  std::vector<double> breakpoints_;
};

/// Interval on which two profiles are simultaneously constant.
struct JointSegment {
  double start;
  double end;
  double first;
  double second;
};

/// Partition of [0, horizon] on which both profiles are constant.
inline std::vector<JointSegment> joint_segments(const VolatilityProfile& first,
                                                const VolatilityProfile& second, double horizon) {
  first.check_horizon(horizon);
  second.check_horizon(horizon);
  std::vector<double> cuts{0.0};
  std::merge(first.breakpoints().begin(), first.breakpoints().end(), second.breakpoints().begin(),
             second.breakpoints().end(), std::back_inserter(cuts));
  cuts.push_back(horizon);
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<JointSegment> out;
  out.reserve(cuts.size() - 1);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    out.push_back({cuts[i], cuts[i + 1], first.level(cuts[i]), second.level(cuts[i])});
  }
  return out;
}

/// int_0^T int_0^t g(s) ds dt = int_0^T (T - s) g(s) ds for g constant on
/// each joint segment, with g = rate(first level, second level).
template <class Rate>
double nested_time_integral(const VolatilityProfile& first, const VolatilityProfile& second,
                            double horizon, Rate&& rate) {
  double total = 0.0;
  for (const auto& seg : joint_segments(first, second, horizon)) {
    const double a = horizon - seg.start;
    const double b = horizon - seg.end;
    total += rate(seg.first, seg.second) * 0.5 * (a * a - b * b);
  }
  return total;
}

/// int_0^t g(s) ds for the same piecewise-constant g.
template <class Rate>
double running_time_integral(const VolatilityProfile& first, const VolatilityProfile& second,
                             double horizon, double t, Rate&& rate) {
  double total = 0.0;
  for (const auto& seg : joint_segments(first, second, horizon)) {
    if (seg.start >= t) break;
    total += rate(seg.first, seg.second) * (std::min(seg.end, t) - seg.start);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Time grid and quadrature
// ---------------------------------------------------------------------------

/// Uniform grid 0 = t_0 < ... < t_M = T.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t intervals) : horizon_(horizon), intervals_(intervals) {
    detail::require(std::isfinite(horizon) && horizon > 0.0, "TimeGrid: T must be positive");
    detail::require(intervals >= 2, "TimeGrid: at least 2 intervals required");
  }

  double horizon() const noexcept { return horizon_; }
  std::size_t intervals() const noexcept { return intervals_; }
  std::size_t points() const noexcept { return intervals_ + 1; }
  double spacing() const noexcept { return horizon_ / static_cast<double>(intervals_); }

  double operator[](std::size_t i) const noexcept {
    if (i == intervals_) return horizon_;
    return horizon_ * static_cast<double>(i) / static_cast<double>(intervals_);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double horizon_;
  std::size_t intervals_;
};

/// Trapezoidal int_0^T f g dt of two grid functions.
inline double trapezoid_inner(std::span<const double> f, std::span<const double> g,
                              double spacing) {
  const std::size_t n = f.size();
  double interior = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) interior += f[i] * g[i];
  return spacing * (interior + 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]));
}

inline double trapezoid_norm_sq(std::span<const double> f, double spacing) {
  return trapezoid_inner(f, f, spacing);
}

/// L^2(dt) distance squared between two grid functions.
inline double trapezoid_distance_sq(std::span<const double> f, std::span<const double> g,
                                    double spacing) {
  const std::size_t n = f.size();
  auto sq = [&](std::size_t i) {
    const double d = f[i] - g[i];
    return d * d;
  };
  double interior = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) interior += sq(i);
  return spacing * (interior + 0.5 * (sq(0) + sq(n - 1)));
}

/// Left-point Riemann-Stieltjes sum  sum_j f(t_j) (x_{j+1} - x_j).
inline double left_stieltjes(std::span<const double> integrand, std::span<const double> path) {
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < path.size(); ++j) {
    total += integrand[j] * (path[j + 1] - path[j]);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Sine basis of the Cameron-Martin space
// ---------------------------------------------------------------------------

namespace detail {
inline void check_index(std::size_t k) {
  if (k < 1) throw std::invalid_argument("basis index must be >= 1");
}
inline void check_time(double t, double horizon) {
  if (!(t >= 0.0 && t <= horizon)) throw std::invalid_argument("time outside [0, T]");
}
inline double half_shift(std::size_t k) { return static_cast<double>(k) - 0.5; }
}  // namespace detail

/// h_k(t) = sqrt(2T) / (sigma pi (k - 1/2)) sin((k - 1/2) pi t / T).
inline double basis_fn(std::size_t k, double t, const ModelParams& p) {
  detail::check_index(k);
  detail::check_time(t, p.horizon());
  const double m = detail::half_shift(k);
  const double T = p.horizon();
  return std::sqrt(2.0 * T) / (p.sigma() * std::numbers::pi * m) *
         std::sin(m * std::numbers::pi * t / T);
}

/// Time derivative of basis_fn.
inline double basis_derivative(std::size_t k, double t, const ModelParams& p) {
  detail::check_index(k);
  detail::check_time(t, p.horizon());
  const double m = detail::half_shift(k);
  const double T = p.horizon();
  return std::sqrt(2.0 / T) / p.sigma() * std::cos(m * std::numbers::pi * t / T);
}

/// lambda_k = sigma T / (pi (k - 1/2)) = ||Gamma h_k||_{L^2(dt)}.
inline double eigenvalue(std::size_t k, const ModelParams& p) {
  detail::check_index(k);
  return p.sigma() * p.horizon() / (std::numbers::pi * detail::half_shift(k));
}

/// The basis h_1..h_K for fixed (sigma, T) with Gamma h = sigma^2 h.
class SineBasis {
 public:
  SineBasis(ModelParams params, std::size_t max_index) : params_(params), max_index_(max_index) {
    detail::require(max_index >= 1, "SineBasis: max_index must be >= 1");
  }

  const ModelParams& params() const noexcept { return params_; }
  std::size_t max_index() const noexcept { return max_index_; }

  double h(std::size_t k, double t) const { return basis_fn(checked(k), t, params_); }
  double hdot(std::size_t k, double t) const { return basis_derivative(checked(k), t, params_); }
  double lambda(std::size_t k) const { return eigenvalue(checked(k), params_); }

  double gamma_h(std::size_t k, double t) const {
    return params_.sigma() * params_.sigma() * h(k, t);
  }

  /// lambda_k^{-1} Gamma h_k(t) = sqrt(2/T) sin((k - 1/2) pi t / T), orthonormal
  /// in L^2([0,T], dt).
  double unit_gamma_h(std::size_t k, double t) const {
    detail::check_time(t, params_.horizon());
    const double T = params_.horizon();
    return std::sqrt(2.0 / T) *
           std::sin(detail::half_shift(checked(k)) * std::numbers::pi * t / T);
  }

 private:
  std::size_t checked(std::size_t k) const {
    detail::check_index(k);
    if (k > max_index_) throw std::out_of_range("SineBasis: index beyond max_index");
    return k;
  }

  ModelParams params_;
  std::size_t max_index_;
};

// ---------------------------------------------------------------------------
// Deterministic drifts in the Cameron-Martin space
// ---------------------------------------------------------------------------

/// u(t) = slope * t.
struct LinearDrift {
  double slope = 0.0;
};

/// u = sum_k coefficients[k-1] h_k.
struct BasisDrift {
  std::vector<double> coefficients;
};

/// u-dot sampled on a uniform grid of [0, horizon] (derivative.size() - 1
/// intervals), u(0) = 0.
struct TabulatedDrift {
  double horizon = 1.0;
  std::vector<double> derivative;
};

/// Deterministic drift; adapted or random drifts have no representation.
using DriftSpec = std::variant<LinearDrift, BasisDrift, TabulatedDrift>;

namespace detail {

inline void check_tabulated(const TabulatedDrift& d) {
  require(d.derivative.size() >= 3, "TabulatedDrift: need at least 2 intervals");
  require(std::isfinite(d.horizon) && d.horizon > 0.0, "TabulatedDrift: horizon must be positive");
  for (double v : d.derivative) require(std::isfinite(v), "TabulatedDrift: non-finite derivative");
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace detail

/// u(t_i) on the grid.
inline std::vector<double> drift_on_grid(const DriftSpec& drift, const TimeGrid& grid,
                                         const ModelParams& params) {
  std::vector<double> out(grid.points());
  std::visit(detail::overloaded{
                 [&](const LinearDrift& d) {
                   for (std::size_t i = 0; i < out.size(); ++i) out[i] = d.slope * grid[i];
                 },
                 [&](const BasisDrift& d) {
                   for (std::size_t i = 0; i < out.size(); ++i) {
                     double acc = 0.0;
                     for (std::size_t k = 1; k <= d.coefficients.size(); ++k) {
                       acc += d.coefficients[k - 1] * basis_fn(k, grid[i], params);
                     }
                     out[i] = acc;
                   }
                 },
                 [&](const TabulatedDrift& d) {
                   detail::check_tabulated(d);
                   if (d.derivative.size() != grid.points() || d.horizon != grid.horizon()) {
                     throw std::invalid_argument("TabulatedDrift: grid mismatch");
                   }
                   const double dt = grid.spacing();
                   out[0] = 0.0;
                   for (std::size_t i = 1; i < out.size(); ++i) {
                     out[i] = out[i - 1] + 0.5 * dt * (d.derivative[i - 1] + d.derivative[i]);
                   }
                 }},
             drift);
  return out;
}

/// <u, h_k> = int_0^T u-dot(s) h_k-dot(s) ds.
///
/// Closed form for linear and basis drifts; trapezoidal quadrature on the
/// tabulation grid otherwise.
inline double drift_inner_product(const DriftSpec& drift, std::size_t k, const ModelParams& params) {
  detail::check_index(k);
  return std::visit(
      detail::overloaded{
          [&](const LinearDrift& d) {
            const double sign = (k % 2 == 1) ? 1.0 : -1.0;
            return d.slope * std::sqrt(2.0 * params.horizon()) / params.sigma() * sign /
                   (std::numbers::pi * detail::half_shift(k));
          },
          [&](const BasisDrift& d) {
            if (k > d.coefficients.size()) return 0.0;
            return d.coefficients[k - 1] / (params.sigma() * params.sigma());
          },
          [&](const TabulatedDrift& d) {
            detail::check_tabulated(d);
            if (d.horizon != params.horizon()) {
              throw std::invalid_argument("TabulatedDrift: grid mismatch");
            }
            const TimeGrid grid(d.horizon, d.derivative.size() - 1);
            std::vector<double> hd(grid.points());
            for (std::size_t i = 0; i < hd.size(); ++i) hd[i] = basis_derivative(k, grid[i], params);
            return trapezoid_inner(d.derivative, hd, grid.spacing());
          }},
      drift);
}

/// u-dot(t) for the closed-form variants.
inline double drift_derivative(const DriftSpec& drift, double t, const ModelParams& params) {
  return std::visit(detail::overloaded{
                        [&](const LinearDrift& d) { return d.slope; },
                        [&](const BasisDrift& d) {
                          double acc = 0.0;
                          for (std::size_t k = 1; k <= d.coefficients.size(); ++k) {
                            acc += d.coefficients[k - 1] * basis_derivative(k, t, params);
                          }
                          return acc;
                        },
                        [&](const TabulatedDrift& d) {
                          detail::check_tabulated(d);
                          const double pos =
                              t / d.horizon * static_cast<double>(d.derivative.size() - 1);
                          const auto i = std::min(static_cast<std::size_t>(pos),
                                                  d.derivative.size() - 2);
                          const double w = pos - static_cast<double>(i);
                          return (1.0 - w) * d.derivative[i] + w * d.derivative[i + 1];
                        }},
                    drift);
}

// ---------------------------------------------------------------------------
// Path simulation
// ---------------------------------------------------------------------------

/// One replicate: noise coefficients and the grid values of X^u, u and X.
struct PathSample {
  std::vector<double> eta;
  std::vector<double> xu;
  std::vector<double> u;
  std::vector<double> x;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
};

/// n_basis i.i.d. N(0,1) draws for replicate `replicate` of `seed`.
inline std::vector<double> simulate_noise(std::uint64_t seed, std::uint64_t replicate,
                                          std::size_t n_basis) {
  detail::require(n_basis >= 1, "simulate_noise: n_basis must be >= 1");
  return NormalStream(seed, Stream::noise, replicate).draw(n_basis);
}

namespace detail {
/// Sine coefficients of X^u = sigma sqrt(2T)/pi sum eta_m sin(...)/(m - 1/2).
inline void paley_wiener_coefficients(std::span<const double> eta, std::span<double> out,
                                      double sigma, double horizon) {
  const double scale = sigma * std::sqrt(2.0 * horizon) / std::numbers::pi;
  for (std::size_t m = 0; m < eta.size(); ++m) {
    out[m] = scale * eta[m] / (static_cast<double>(m) + 0.5);
  }
}
}  // namespace detail

/// X^u on the grid from the first n_basis terms of the Paley-Wiener
/// expansion.
inline std::vector<double> reconstruct_path(std::span<const double> eta, const TimeGrid& grid,
                                            const ModelParams& params, std::size_t n_basis) {
  if (eta.empty()) throw std::invalid_argument("reconstruct_path: empty eta");
  if (eta.size() < n_basis) throw std::invalid_argument("reconstruct_path: eta shorter than n_basis");
  if (grid.horizon() != params.horizon()) {
    throw std::invalid_argument("reconstruct_path: grid horizon differs from T");
  }
  std::vector<double> coeffs(n_basis);
  detail::paley_wiener_coefficients(eta.first(n_basis), coeffs, params.sigma(), params.horizon());
  std::vector<double> out(grid.points());
  SineSynthesis(grid.intervals()).synthesize(coeffs, out);
  return out;
}

/// Completes a sample with x = xu + u.
inline PathSample observed_path(std::vector<double> xu, const DriftSpec& drift,
                                const TimeGrid& grid, const ModelParams& params) {
  if (xu.size() != grid.points()) throw std::invalid_argument("observed_path: shape mismatch");
  PathSample s;
  s.u = drift_on_grid(drift, grid, params);
  s.x.resize(xu.size());
  for (std::size_t i = 0; i < xu.size(); ++i) s.x[i] = xu[i] + s.u[i];
  s.xu = std::move(xu);
  return s;
}

/// lambda_k^{-1} X(h_k) = lambda_k^{-1} (eta_k + <u, h_k>).
inline double observed_coefficient(const PathSample& sample, const DriftSpec& drift, std::size_t k,
                                   const ModelParams& params) {
  detail::check_index(k);
  if (k > sample.eta.size()) {
    throw std::out_of_range("observed_coefficient: index beyond simulated coefficients");
  }
  return (sample.eta[k - 1] + drift_inner_product(drift, k, params)) / eigenvalue(k, params);
}

/// lambda_k^{-1} int_0^T h_k-dot dX by left-point sums over the stored path.
inline double observed_coefficient_quadrature(const PathSample& sample, const TimeGrid& grid,
                                              std::size_t k, const ModelParams& params) {
  if (sample.x.size() != grid.points()) {
    throw std::invalid_argument("observed_coefficient_quadrature: shape mismatch");
  }
  std::vector<double> hd(grid.points());
  for (std::size_t i = 0; i < hd.size(); ++i) hd[i] = basis_derivative(k, grid[i], params);
  return left_stieltjes(hd, sample.x) / eigenvalue(k, params);
}

/// Reusable simulator for one (model, grid, truncation, drift) setting.
///
/// Holds an FFT plan, so each worker thread needs its own instance.
class PathSimulator {
 public:
  PathSimulator(ModelParams params, TimeGrid grid, std::size_t n_basis, DriftSpec drift)
      : params_(params), grid_(grid), n_basis_(n_basis), drift_(std::move(drift)),
        synth_(grid.intervals()), coeffs_(n_basis) {
    detail::require(n_basis >= 1, "PathSimulator: n_basis must be >= 1");
    detail::require(grid.horizon() == params.horizon(), "PathSimulator: grid horizon differs from T");
    drift_values_ = drift_on_grid(drift_, grid_, params_);
  }

  const ModelParams& params() const noexcept { return params_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t n_basis() const noexcept { return n_basis_; }
  const DriftSpec& drift() const noexcept { return drift_; }
  std::span<const double> drift_values() const noexcept { return drift_values_; }

  PathSample simulate(std::uint64_t seed, std::uint64_t replicate) {
    PathSample s;
    simulate_into(seed, replicate, s);
    return s;
  }

  void simulate_into(std::uint64_t seed, std::uint64_t replicate, PathSample& s) {
    s.seed = seed;
    s.replicate = replicate;
    s.eta.resize(n_basis_);
    NormalStream(seed, Stream::noise, replicate).fill(s.eta);
    synthesize_noise(s.eta, s);
  }

  /// Fills xu, u, x of `s` from the given noise coefficients.
  void synthesize_noise(std::span<const double> eta, PathSample& s) {
    if (eta.size() > n_basis_) throw std::invalid_argument("PathSimulator: eta longer than n_basis");
    s.xu.resize(grid_.points());
    detail::paley_wiener_coefficients(eta, coeffs_, params_.sigma(), params_.horizon());
    synth_.synthesize(std::span<const double>(coeffs_).first(eta.size()), s.xu);
    s.u.assign(drift_values_.begin(), drift_values_.end());
    s.x.resize(grid_.points());
    for (std::size_t i = 0; i < s.x.size(); ++i) s.x[i] = s.xu[i] + s.u[i];
  }

  /// Grid values of sum_m c_m sin((m - 1/2) pi t / T).
  void synthesize_sines(std::span<const double> coeffs, std::span<double> out) {
    synth_.synthesize(coeffs, out);
  }

 private:
  ModelParams params_;
  TimeGrid grid_;
  std::size_t n_basis_;
  DriftSpec drift_;
  SineSynthesis synth_;
  std::vector<double> coeffs_;
  std::vector<double> drift_values_;
};

}  // namespace driftlab
