#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "driftlab/monte_carlo.hpp"
#include "driftlab/process_sim.hpp"

using namespace driftlab;
using std::numbers::pi;

namespace {

const ModelParams kUnit(1.0, 1.0, 1.0);

double direct_sine_sum(std::span<const double> c, double t, double T) {
  double acc = 0.0;
  for (std::size_t m = 1; m <= c.size(); ++m) acc += c[m - 1] * std::sin((m - 0.5) * pi * t / T);
  return acc;
}

}  // namespace

TEST(ModelParams, RejectsNonPositive) {
  EXPECT_THROW(ModelParams(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ModelParams(1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(ModelParams(1.0, 1.0, std::nan("")), std::invalid_argument);
  EXPECT_DOUBLE_EQ(ModelParams(2.0, 3.0).efficient_risk(), 18.0);
}

TEST(VolatilityProfile, LevelsAndValidation) {
  const auto p = VolatilityProfile::piecewise({1.0, 2.0, 3.0}, {0.25, 0.5});
  EXPECT_EQ(p.level(0.0), 1.0);
  EXPECT_EQ(p.level(0.25), 2.0);
  EXPECT_EQ(p.level(0.49), 2.0);
  EXPECT_EQ(p.level(0.9), 3.0);
  EXPECT_THROW(VolatilityProfile::piecewise({1.0, -1.0}, {0.5}), std::invalid_argument);
  EXPECT_THROW(VolatilityProfile::piecewise({1.0, 1.0, 1.0}, {0.5, 0.4}), std::invalid_argument);
  EXPECT_THROW(VolatilityProfile::piecewise({1.0}, {0.5}), std::invalid_argument);
  EXPECT_THROW(p.check_horizon(0.5), std::invalid_argument);
  EXPECT_NO_THROW(p.check_horizon(1.0));
}

TEST(TimeGrid, SpacingAndEndpoints) {
  const TimeGrid g(0.7, 3);
  EXPECT_EQ(g.points(), 4u);
  EXPECT_EQ(g.spacing(), 0.7 / 3);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[3], 0.7);
  EXPECT_THROW(TimeGrid(1.0, 1), std::invalid_argument);
}

TEST(NestedIntegrals, PiecewiseConstant) {
  const auto one = VolatilityProfile::constant(1.0);
  const auto p = VolatilityProfile::piecewise({1.0, 3.0}, {0.5});
  auto prod = [](double a, double b) { return a * b; };
  // int_0^1 (1 - s) g(s) ds with g = 1 on [0, .5), 3 on [.5, 1].
  EXPECT_NEAR(nested_time_integral(p, one, 1.0, prod), 0.375 + 3 * 0.125, 1e-15);
  EXPECT_NEAR(running_time_integral(p, one, 1.0, 0.75, prod), 0.5 + 3 * 0.25, 1e-15);
  EXPECT_NEAR(running_time_integral(p, one, 1.0, 0.0, prod), 0.0, 0.0);
}

TEST(SineBasis, ClosedFormValues) {
  EXPECT_EQ(basis_fn(1, 0.0, kUnit), 0.0);
  EXPECT_NEAR(basis_fn(1, 1.0, kUnit), 2 * std::sqrt(2.0) / pi, 1e-15);
  EXPECT_NEAR(basis_fn(1, 1.0, kUnit), 0.90032, 1e-5);
  EXPECT_NEAR(eigenvalue(1, kUnit), 2 / pi, 1e-15);
  EXPECT_NEAR(eigenvalue(2, kUnit), 2 / (3 * pi), 1e-15);
  EXPECT_NEAR(eigenvalue(2, kUnit), 0.21221, 1e-5);
  for (std::size_t k = 1; k < 40; ++k) {
    EXPECT_GT(eigenvalue(k, kUnit), eigenvalue(k + 1, kUnit));
  }
}

TEST(SineBasis, BoundaryConditions) {
  const ModelParams p(1.7, 2.3);
  for (std::size_t k = 1; k <= 16; ++k) {
    EXPECT_EQ(basis_fn(k, 0.0, p), 0.0);
    EXPECT_NEAR(basis_derivative(k, 2.3, p), 0.0, 1e-14);
  }
}

TEST(SineBasis, RejectsBadArguments) {
  EXPECT_THROW(basis_fn(0, 0.5, kUnit), std::invalid_argument);
  EXPECT_THROW(basis_fn(1, 1.5, kUnit), std::invalid_argument);
  EXPECT_THROW(basis_fn(1, -0.1, kUnit), std::invalid_argument);
  EXPECT_THROW(eigenvalue(0, kUnit), std::invalid_argument);
}

// Oracle: finite-difference solution of -phi'' = mu phi, phi(0) = 0,
// phi'(T) = 0, normalized in L^2(dt). Then lambda = sigma / sqrt(mu) and
// h = lambda phi / sigma^2.
TEST(SineBasis, MatchesFiniteDifferenceEigenSolver) {
  const double T = 1.0, sigma = 1.0;
  const int N = 3000;
  const double h = T / N;
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(N, 2.0 / (h * h));
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(N - 1, -1.0 / (h * h));
  sub(N - 2) *= std::sqrt(2.0);  // trapezoid weight h/2 at the Neumann end
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub);
  const double mu = eig.eigenvalues()(1);
  Eigen::VectorXd phi = eig.eigenvectors().col(1);
  phi(N - 1) *= std::sqrt(2.0);
  phi /= std::sqrt(h);
  if (phi(0) < 0) phi = -phi;
  const double lambda = sigma / std::sqrt(mu);
  EXPECT_NEAR(lambda, eigenvalue(2, kUnit), 1e-6);
  const double h2 = lambda * phi(N / 3 - 1) / (sigma * sigma);  // node t = T/3
  EXPECT_NEAR(h2, basis_fn(2, T / 3, kUnit), 1e-6);
}

TEST(SineBasis, QuadratureOrthonormality) {
  const ModelParams p(1.3, 0.8);
  const TimeGrid g(0.8, 10000);
  const SineBasis b(p, 16);
  std::vector<std::vector<double>> hd(16, std::vector<double>(g.points()));
  for (std::size_t k = 1; k <= 16; ++k) {
    for (std::size_t i = 0; i < g.points(); ++i) hd[k - 1][i] = b.hdot(k, g[i]);
  }
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      const double ip = p.sigma() * p.sigma() * trapezoid_inner(hd[i], hd[j], g.spacing());
      EXPECT_NEAR(ip, i == j ? 1.0 : 0.0, 1e-8) << i << "," << j;
    }
  }
}

TEST(SineBasis, QuadratureNorms) {
  const ModelParams p(1.3, 0.8);
  const TimeGrid g(0.8, 10000);
  const SineBasis b(p, 16);
  std::vector<double> f(g.points()), gh(g.points()), e(g.points());
  for (std::size_t k = 1; k <= 16; ++k) {
    for (std::size_t i = 0; i < g.points(); ++i) {
      f[i] = b.h(k, g[i]);
      gh[i] = b.gamma_h(k, g[i]);
      e[i] = b.unit_gamma_h(k, g[i]);
    }
    const double expect = 0.8 / (1.3 * pi * (k - 0.5));
    EXPECT_NEAR(std::sqrt(trapezoid_norm_sq(f, g.spacing())), expect, 1e-8);
    EXPECT_NEAR(std::sqrt(trapezoid_norm_sq(gh, g.spacing())), b.lambda(k), 1e-8);
    EXPECT_NEAR(trapezoid_norm_sq(e, g.spacing()), 1.0, 1e-8);
  }
}

TEST(DriftInnerProduct, ZeroAndLinear) {
  for (std::size_t k = 1; k <= 8; ++k) {
    EXPECT_EQ(drift_inner_product(LinearDrift{0.0}, k, kUnit), 0.0);
  }
  EXPECT_NEAR(drift_inner_product(LinearDrift{1.0}, 1, kUnit), std::sqrt(2.0) * 2 / pi, 1e-15);
  EXPECT_NEAR(drift_inner_product(LinearDrift{1.0}, 1, kUnit), 0.90032, 1e-5);
  EXPECT_LT(drift_inner_product(LinearDrift{1.0}, 2, kUnit), 0.0);
}

TEST(DriftInnerProduct, LinearClosedFormMatchesQuadrature) {
  const ModelParams p(0.7, 1.9, 2.5);
  const std::size_t M = 100000;
  const TabulatedDrift tab{1.9, std::vector<double>(M + 1, 2.5)};
  for (std::size_t k = 1; k <= 16; ++k) {
    EXPECT_NEAR(drift_inner_product(LinearDrift{2.5}, k, p), drift_inner_product(tab, k, p), 1e-8);
  }
}

TEST(DriftInnerProduct, BasisDriftIsKronecker) {
  const ModelParams p(1.4, 1.2);
  const BasisDrift h3{{0.0, 0.0, 1.0}};
  const std::size_t M = 100000;
  const TimeGrid g(1.2, M);
  TabulatedDrift tab{1.2, std::vector<double>(M + 1)};
  for (std::size_t i = 0; i <= M; ++i) tab.derivative[i] = basis_derivative(3, g[i], p);
  for (std::size_t k = 1; k <= 8; ++k) {
    const double expect = k == 3 ? 1.0 / (1.4 * 1.4) : 0.0;
    EXPECT_NEAR(drift_inner_product(h3, k, p), expect, 1e-15);
    EXPECT_NEAR(drift_inner_product(tab, k, p), expect, 1e-8);
  }
}

TEST(DriftInnerProduct, TabulatedMismatchRejected) {
  const TabulatedDrift tab{2.0, std::vector<double>(11, 1.0)};
  EXPECT_THROW(drift_inner_product(tab, 1, kUnit), std::invalid_argument);
  EXPECT_THROW(drift_on_grid(tab, TimeGrid(1.0, 10), kUnit), std::invalid_argument);
  const TabulatedDrift ok{1.0, std::vector<double>(11, 1.0)};
  EXPECT_THROW(drift_on_grid(ok, TimeGrid(1.0, 20), kUnit), std::invalid_argument);
}

TEST(DriftOnGrid, VariantsAgree) {
  const ModelParams p(1.0, 1.0);
  const TimeGrid g(1.0, 64);
  const auto lin = drift_on_grid(LinearDrift{2.0}, g, p);
  const auto tab = drift_on_grid(TabulatedDrift{1.0, std::vector<double>(65, 2.0)}, g, p);
  for (std::size_t i = 0; i < g.points(); ++i) EXPECT_NEAR(lin[i], tab[i], 1e-14);
  const auto basis = drift_on_grid(BasisDrift{{0.5, 0.0, -1.0}}, g, p);
  for (std::size_t i = 0; i < g.points(); ++i) {
    EXPECT_NEAR(basis[i], 0.5 * basis_fn(1, g[i], p) - basis_fn(3, g[i], p), 1e-15);
  }
}

TEST(SimulateNoise, DeterministicAndStandardNormal) {
  EXPECT_EQ(simulate_noise(17, 3, 256), simulate_noise(17, 3, 256));
  Moments m(1);
  double sum = 0.0, sumsq = 0.0;
  const std::size_t reps = 1000, nb = 1000;
  for (std::size_t r = 0; r < reps; ++r) {
    for (double v : simulate_noise(99, r, nb)) {
      sum += v;
      sumsq += v * v;
    }
  }
  const double n = static_cast<double>(reps * nb);
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.004);
  EXPECT_NEAR(var, 1.0, 0.005);
  EXPECT_THROW(simulate_noise(1, 0, 0), std::invalid_argument);
}

TEST(SineSynthesis, MatchesDirectSumWithFolding) {
  const std::size_t M = 16;
  SineSynthesis synth(M);
  const auto c = NormalStream(4, Stream::noise, 0).draw(3 * M + 5);  // beyond 2M
  std::vector<double> out(M + 1);
  synth.synthesize(c, out);
  for (std::size_t i = 0; i <= M; ++i) {
    EXPECT_NEAR(out[i], direct_sine_sum(c, static_cast<double>(i) / M, 1.0), 1e-12) << i;
  }
}

TEST(ReconstructPath, ZeroAndSingleTerm) {
  const TimeGrid g(1.0, 32);
  const auto zero = reconstruct_path(std::vector<double>(8, 0.0), g, kUnit, 8);
  for (double v : zero) EXPECT_EQ(v, 0.0);
  const ModelParams p(1.5, 2.0);
  const TimeGrid g2(2.0, 32);
  const auto one = reconstruct_path(std::vector<double>{1.0}, g2, p, 1);
  // sigma sqrt(2T)/pi * sin(pi t / (2T)) / (1/2)
  for (std::size_t i = 0; i < g2.points(); ++i) {
    EXPECT_NEAR(one[i], 1.5 * 2.0 / pi * std::sin(pi * g2[i] / 4.0) * 2.0, 1e-14);
  }
  EXPECT_THROW(reconstruct_path(std::vector<double>{}, g, kUnit, 0), std::invalid_argument);
  EXPECT_THROW(reconstruct_path(std::vector<double>(3), g, kUnit, 4), std::invalid_argument);
}

TEST(ReconstructPath, SingleTermTerminalVariance) {
  // Var(X^u_T) with one term: sigma^2 2T/pi^2 * 4.
  const ModelParams p(1.5, 2.0);
  const TimeGrid g(2.0, 16);
  PathSimulator sim(p, g, 1, LinearDrift{0.0});
  Moments m(1);
  for (std::uint64_t r = 0; r < 100000; ++r) {
    const double v[1] = {sim.simulate(5, r).xu.back()};
    const double sq[1] = {v[0] * v[0]};
    m.add(sq);
  }
  const double expect = 1.5 * 1.5 * 2 * 2.0 / (pi * pi) * 4;
  EXPECT_NEAR(m.mean(0), expect, 3 * m.stderr_of_mean(0));
}

TEST(ReconstructPath, SecondMomentMatchesTruncatedRisk) {
  const TimeGrid g(1.0, 2048);
  PathSimulator sim(kUnit, g, 1024, LinearDrift{0.0});
  Moments m(1);
  PathSample s;
  for (std::uint64_t r = 0; r < 100000; ++r) {
    sim.simulate_into(2024, r, s);
    const double v[1] = {trapezoid_norm_sq(s.xu, g.spacing())};
    m.add(v);
  }
  double tail_free = 0.0;
  for (std::size_t k = 1; k <= 1024; ++k) tail_free += 1.0 / ((k - 0.5) * (k - 0.5));
  tail_free /= pi * pi;
  EXPECT_NEAR(0.5 - tail_free, 9.9e-5, 1e-6);
  EXPECT_NEAR(m.mean(0), tail_free, 3 * m.stderr_of_mean(0));
  EXPECT_NEAR(m.mean(0), 0.5, 3 * m.stderr_of_mean(0) + 1e-4);
}

TEST(PathSimulator, MatchesReconstructAndObserved) {
  const ModelParams p(0.9, 1.5, 0.3);
  const TimeGrid g(1.5, 128);
  PathSimulator sim(p, g, 200, LinearDrift{0.3});
  const auto s = sim.simulate(8, 21);
  const auto eta = simulate_noise(8, 21, 200);
  EXPECT_EQ(s.eta, eta);
  const auto xu = reconstruct_path(eta, g, p, 200);
  EXPECT_EQ(s.xu, xu);
  const auto obs = observed_path(xu, LinearDrift{0.3}, g, p);
  EXPECT_EQ(obs.x, s.x);
  EXPECT_EQ(s.xu[0], 0.0);
  for (std::size_t i = 0; i < g.points(); ++i) EXPECT_EQ(s.x[i], s.xu[i] + s.u[i]);
}

TEST(ObservedPath, ZeroAndLinearDrift) {
  const TimeGrid g(2.0, 50);
  const ModelParams p(1.0, 2.0);
  const auto xu = reconstruct_path(simulate_noise(1, 0, 64), g, p, 64);
  const auto zero = observed_path(xu, LinearDrift{0.0}, g, p);
  EXPECT_EQ(zero.x, xu);
  const auto lin = observed_path(xu, LinearDrift{1.25}, g, p);
  EXPECT_EQ(lin.u.back(), 1.25 * 2.0);
  EXPECT_NEAR(lin.x.back() - lin.xu.back(), 2.5, 4 * std::numeric_limits<double>::epsilon() * 4);
  // Subtracting u recovers xu up to one rounding of the sum.
  for (std::size_t i = 0; i < g.points(); ++i) {
    const double scale = std::max(std::abs(lin.x[i]), std::abs(lin.u[i]));
    EXPECT_NEAR(lin.x[i] - lin.u[i], xu[i], 2 * std::numeric_limits<double>::epsilon() * scale);
  }
  EXPECT_THROW(observed_path(std::vector<double>(3), LinearDrift{0.0}, g, p), std::invalid_argument);
}

TEST(ObservedCoefficient, UnitVectorAndLinearDrift) {
  const TimeGrid g(1.0, 64);
  PathSimulator sim(kUnit, g, 8, LinearDrift{0.0});
  PathSample s;
  std::vector<double> e1(8, 0.0);
  e1[0] = 1.0;
  s.eta = e1;
  sim.synthesize_noise(s.eta, s);
  EXPECT_NEAR(observed_coefficient(s, LinearDrift{0.0}, 1, kUnit), pi / 2, 1e-15);
  for (std::size_t k = 2; k <= 8; ++k) EXPECT_EQ(observed_coefficient(s, LinearDrift{0.0}, k, kUnit), 0.0);
  s.eta.assign(8, 0.0);
  EXPECT_NEAR(observed_coefficient(s, LinearDrift{1.0}, 1, kUnit), std::sqrt(2.0), 1e-14);
  EXPECT_THROW(observed_coefficient(s, LinearDrift{1.0}, 9, kUnit), std::out_of_range);
}

TEST(ObservedCoefficient, QuadratureAgreesWithCoefficients) {
  const TimeGrid g(1.0, 4096);
  PathSimulator sim(kUnit, g, 1024, LinearDrift{1.0});
  std::vector<double> worst(6, 0.0);
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto s = sim.simulate(31, r);
    for (std::size_t k = 1; k <= 6; ++k) {
      const double dev = std::abs(observed_coefficient_quadrature(s, g, k, kUnit) -
                                  observed_coefficient(s, LinearDrift{1.0}, k, kUnit));
      worst[k - 1] = std::max(worst[k - 1], dev * eigenvalue(k, kUnit));  // on X(h_k)
    }
  }
  EXPECT_LT(worst[0], 1e-3);
  for (std::size_t k = 2; k <= 6; ++k) EXPECT_LT(worst[k - 1], 1e-2) << k;
}
