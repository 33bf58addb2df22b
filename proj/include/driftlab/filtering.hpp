#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "driftlab/errors.hpp"
#include "driftlab/estimators.hpp"
#include "driftlab/process_sim.hpp"

namespace driftlab {

/// Finite-dimensional Gaussian drift model: Z ~ N(v, gamma_tau) observed as
/// X = Z + N with N ~ N(0, gamma) independent of Z.
struct DiscreteGaussianModel {
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd gamma_tau;
  Eigen::VectorXd v;
  Eigen::VectorXd x;
};

struct PosteriorLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kConditionLimit = 1e12;

namespace detail {

inline void check_spd(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw CovarianceError(std::string(what) + ": must be square and nonempty");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (((m - m.transpose()).cwiseAbs().maxCoeff()) > kSymmetryTolerance * scale) {
    throw CovarianceError(std::string(what) + ": not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw CovarianceError(std::string(what) + ": not positive definite");
}

/// Solves against an SPD matrix after an eigenvalue-ratio guard.
class GuardedSolve {
 public:
  explicit GuardedSolve(const Eigen::MatrixXd& a, const char* what) : llt_(a) {
    if (llt_.info() != Eigen::Success) {
      throw CovarianceError(std::string(what) + ": not positive definite");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kConditionLimit) {
      throw CovarianceError(std::string(what) + ": condition number exceeds 1e12");
    }
  }

  template <class Rhs>
  auto solve(const Rhs& b) const {
    return llt_.solve(b);
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/// Law of Z given X = x.
///
/// mean = Gamma A^{-1} v + Gamma_tau A^{-1} x and cov = Gamma_tau A^{-1} Gamma with
/// A = Gamma + Gamma_tau. When the two covariances commute this equals
/// A^{-1} Gamma v + A^{-1} Gamma_tau x.
inline PosteriorLaw conditional_law(const DiscreteGaussianModel& model) {
  detail::check_spd(model.gamma, "conditional_law: gamma");
  detail::check_spd(model.gamma_tau, "conditional_law: gamma_tau");
  const auto d = model.gamma.rows();
  if (model.gamma_tau.rows() != d || model.v.size() != d || model.x.size() != d) {
    throw std::invalid_argument("conditional_law: dimension mismatch");
  }
  const detail::GuardedSolve solver(model.gamma + model.gamma_tau, "conditional_law: gamma + gamma_tau");
  // v + Gamma_tau A^{-1} (x - v)
  const Eigen::VectorXd innovation = solver.solve(model.x - model.v);
  PosteriorLaw out;
  out.mean = model.v + model.gamma_tau * innovation;
  out.cov = detail::symmetrized(model.gamma_tau * solver.solve(model.gamma));
  return out;
}

/// Conditional law of the first half of a 2d-dimensional Gaussian vector
/// given that the second half equals x, by the Schur complement.
inline PosteriorLaw brute_force_condition(const Eigen::MatrixXd& joint_cov,
                                          const Eigen::VectorXd& joint_mean,
                                          const Eigen::VectorXd& x) {
  const auto n = joint_cov.rows();
  if (joint_cov.cols() != n || n % 2 != 0 || joint_mean.size() != n || x.size() != n / 2) {
    throw std::invalid_argument("brute_force_condition: dimension mismatch");
  }
  const auto d = n / 2;
  const Eigen::MatrixXd s11 = joint_cov.topLeftCorner(d, d);
  const Eigen::MatrixXd s12 = joint_cov.topRightCorner(d, d);
  const Eigen::MatrixXd s21 = joint_cov.bottomLeftCorner(d, d);
  const Eigen::MatrixXd s22 = joint_cov.bottomRightCorner(d, d);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s22);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().cwiseAbs().minCoeff() <= 0.0) {
    throw CovarianceError("brute_force_condition: singular observed block");
  }
  PosteriorLaw out;
  out.mean = joint_mean.head(d) + s12 * ldlt.solve(x - joint_mean.tail(d));
  out.cov = detail::symmetrized(s11 - s12 * ldlt.solve(s21));
  return out;
}

/// Joint covariance and mean of (Z, X = Z + N) for a model.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> joint_gaussian(const DiscreteGaussianModel& model) {
  const auto d = model.gamma.rows();
  Eigen::MatrixXd cov(2 * d, 2 * d);
  cov.topLeftCorner(d, d) = model.gamma_tau;
  cov.topRightCorner(d, d) = model.gamma_tau;
  cov.bottomLeftCorner(d, d) = model.gamma_tau;
  cov.bottomRightCorner(d, d) = model.gamma_tau + model.gamma;
  Eigen::VectorXd mean(2 * d);
  mean << model.v, model.v;
  return {cov, mean};
}

struct PathFilterResult {
  std::vector<double> drift;
  std::vector<double> variance;
};

/// Conditional drift and variance of an independent-increment prior given an
/// observed path on the grid. The drift is the Bayes estimate; the variance
/// int_0^t tau^2 sigma^2 / (tau^2 + sigma^2) ds is exact for piecewise
/// constant profiles.
inline PathFilterResult scalar_path_filter(std::span<const double> x, const DriftSpec& v,
                                           const VolatilityProfile& tau,
                                           const VolatilityProfile& sigma, const TimeGrid& grid,
                                           const ModelParams& params) {
  tau.check_horizon(grid.horizon());
  sigma.check_horizon(grid.horizon());
  const auto prior = drift_on_grid(v, grid, params);
  PathFilterResult out;
  out.drift = shrinkage_path(x, prior, grid, tau, sigma);
  out.variance.resize(grid.points());
  auto rate = [](double t, double s) {
    const double t2 = t * t, s2 = s * s;
    return t2 * s2 / (t2 + s2);
  };
  for (std::size_t i = 0; i < grid.points(); ++i) {
    out.variance[i] = running_time_integral(tau, sigma, grid.horizon(), grid[i], rate);
  }
  return out;
}

}  // namespace driftlab
