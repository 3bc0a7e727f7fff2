#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "spincat/estimation.hpp"
#include "spincat/state_factory.hpp"

using namespace spincat;

namespace {

ReadoutConfig half_pi_readout() {
  ReadoutConfig cfg;
  cfg.tau = kHalfPi;
  return cfg;
}

}  // namespace

TEST_CASE("qfi_jz of the maximal superposition is N^2") {
  for (const int n : {20, 100}) {
    const DickeVector ghz = msscs(SpinLength(n), 0.0);
    CHECK(qfi_jz(ghz) == Catch::Approx(static_cast<double>(n) * n).epsilon(1e-12));
  }
}

TEST_CASE("qcrb is the inverse root of mu times Fisher information") {
  CHECK(qcrb(400.0, 1) == Catch::Approx(0.05));
  CHECK(qcrb(400.0, 4) == Catch::Approx(0.025));
  CHECK_THROWS_AS(qcrb(0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(qcrb(100.0, 0), std::invalid_argument);
}

TEST_CASE("qcrb_analytic_cat matches the exact bound inside its regime") {
  // theta = 0: exactly the Heisenberg limit
  CHECK(qcrb_analytic_cat(CatSpec{100, 0.0}) == Catch::Approx(0.01).epsilon(1e-14));
  CHECK(qcrb_analytic_cat(CatSpec{100, 0.0}) ==
        Catch::Approx(qcrb(qfi_jz(msscs(SpinLength(100), 0.0)), 1)).epsilon(1e-12));
  // away from 0 the analytic bound tracks the exact one to a few percent
  for (const double theta : {kPi / 8.0, kPi / 4.0}) {
    const double analytic = qcrb_analytic_cat(CatSpec{100, theta});
    const double exact = qcrb(qfi_jz(msscs(SpinLength(100), theta)), 1);
    CHECK(std::abs(analytic - exact) / exact < 0.03);
  }
  // outside the regime: too small N or beyond the threshold angle
  CHECK_THROWS_AS(qcrb_analytic_cat(CatSpec{20, 0.1}), std::domain_error);
  CHECK_THROWS_AS(qcrb_analytic_cat(CatSpec{40, 1.2}), std::domain_error);
}

TEST_CASE("probabilities clamp and renormalize within tolerance") {
  const DickeVector state = msscs(SpinLength(8), kPi / 8.0);
  const Eigen::VectorXd p = probabilities(state);
  CHECK(p.sum() == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(p.minCoeff() >= 0.0);
  for (int i = 0; i <= 8; ++i) CHECK(p[i] == Catch::Approx(std::norm(state[i])).margin(1e-14));

  const DickeVector pure = msscs(SpinLength(8), 0.3);
  const DensityOperator rho = pure * pure.adjoint();
  const Eigen::VectorXd pr = probabilities_rho(rho);
  for (int i = 0; i <= 8; ++i) CHECK(pr[i] == Catch::Approx(std::norm(pure[i])).margin(1e-14));

  DensityOperator bad = rho;
  bad(0, 0) = -1e-6;
  CHECK_THROWS_AS(probabilities_rho(bad), std::runtime_error);
  DensityOperator drifted = 1.5 * rho;
  CHECK_THROWS_AS(probabilities_rho(drifted), std::runtime_error);
}

TEST_CASE("detection kernel is column-stochastic and sigma = 0 is the identity") {
  const Eigen::MatrixXd identity = detection_kernel(11, 0.0);
  CHECK((identity - Eigen::MatrixXd::Identity(11, 11)).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::MatrixXd kernel = detection_kernel(101, 5.0);
  for (int c = 0; c < 101; ++c) CHECK(kernel.col(c).sum() == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(kernel.minCoeff() >= 0.0);
  // interior column has the Gaussian ratio between neighbor and center
  const double ratio = kernel(51, 50) / kernel(50, 50);
  CHECK(ratio == Catch::Approx(std::exp(-1.0 / 50.0)).epsilon(1e-12));
  CHECK_THROWS_AS(detection_kernel(11, -1.0), std::invalid_argument);
}

TEST_CASE("apply_detection_noise preserves total weight and known moments") {
  const int dim = 101;
  const double j = 50.0;
  const double sigma = 12.5;

  // point mass at m = 0 picks up variance sigma^2 (bulk-centered, truncation negligible)
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(dim);
  delta[50] = 1.0;
  const Eigen::VectorXd blurred = apply_detection_noise(delta, NoiseModel{sigma});
  CHECK(blurred.sum() == Catch::Approx(1.0).epsilon(1e-13));
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < dim; ++i) {
    mean += (i - j) * blurred[i];
    second += (i - j) * (i - j) * blurred[i];
  }
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(second - mean * mean - sigma * sigma) / (sigma * sigma) < 2e-3);

  // equatorial coherent-state distribution: variance rises by sigma^2
  const Eigen::VectorXd p = probabilities(scs(SpinLength(100), kHalfPi));
  const Eigen::VectorXd q = apply_detection_noise(p, NoiseModel{sigma});
  double mean_q = 0.0, second_q = 0.0, var_p = 0.0, mean_p = 0.0;
  for (int i = 0; i < dim; ++i) {
    mean_p += (i - j) * p[i];
    var_p += (i - j) * (i - j) * p[i];
    mean_q += (i - j) * q[i];
    second_q += (i - j) * (i - j) * q[i];
  }
  var_p -= mean_p * mean_p;
  const double var_q = second_q - mean_q * mean_q;
  CHECK(std::abs(mean_q) < 1e-12);
  CHECK(std::abs(var_q - (var_p + sigma * sigma)) / (var_p + sigma * sigma) < 5e-3);

  // sigma = 0 passthrough
  CHECK((apply_detection_noise(p, NoiseModel{0.0}) - p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("readout_distribution derivative matches finite differences") {
  const SpinLength spin(40);
  const DickeVector cat = msscs(spin, kPi / 4.0);
  ReadoutConfig cfg;
  cfg.tau = 0.8;
  const double phi = 0.3;
  const DistributionWithDerivative dist = readout_distribution(cat, phi, cfg);
  CHECK(dist.p.sum() == Catch::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(dist.dp.sum()) < 1e-10);

  const double h = 1e-5;
  for (int i = 0; i <= 40; i += 5) {
    const double numeric = oracles::central_difference(
        [&](double x) { return readout_distribution(cat, x, cfg).p[i]; }, phi, h);
    CHECK(dist.dp[i] == Catch::Approx(numeric).margin(1e-6));
  }
}

TEST_CASE("cfi of the optimal working point equals the quantum limit") {
  const DickeVector cat = msscs(SpinLength(20), kPi / 8.0);
  const DistributionWithDerivative dist = readout_distribution(cat, kHalfPi, half_pi_readout());
  const CfiResult fisher = cfi(dist.p, dist.dp);
  CHECK_FALSE(fisher.divergent);
  CHECK(fisher.value == Catch::Approx(qfi_jz(cat)).epsilon(1e-10));
  CHECK_THROWS_AS(cfi(dist.p, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("error propagation saturates the bound at the optimal point") {
  const DickeVector cat = msscs(SpinLength(100), kPi / 4.0);
  const PrecisionResult res = error_propagation_precision(cat, kHalfPi, half_pi_readout(), NoiseModel{});
  CHECK_FALSE(res.divergent);
  CHECK(res.delta_phi * std::sqrt(qfi_jz(cat)) == Catch::Approx(1.0).epsilon(1e-8));
  // mu enters as the usual square root
  const PrecisionResult res4 =
      error_propagation_precision(cat, kHalfPi, half_pi_readout(), NoiseModel{}, 4);
  CHECK(res4.delta_phi == Catch::Approx(res.delta_phi / 2.0).epsilon(1e-13));
}

TEST_CASE("error propagation flags a flat response as divergent") {
  const DickeVector cat = msscs(SpinLength(20), kPi / 8.0);
  ReadoutConfig cfg;  // tau = 0: no interaction, outcome distribution is phase-blind
  const PrecisionResult res = error_propagation_precision(cat, 0.2, cfg, NoiseModel{});
  CHECK(res.divergent);
  CHECK(std::isinf(res.delta_phi));
}

TEST_CASE("precision_closed_form matches error propagation at both working points") {
  const DickeVector cat = msscs(SpinLength(32), kPi / 8.0);
  const PrecisionResult at_half_pi =
      error_propagation_precision(cat, kHalfPi, half_pi_readout(), NoiseModel{});
  CHECK(precision_closed_form(cat, kHalfPi) == Catch::Approx(at_half_pi.delta_phi).epsilon(1e-12));
  // phi = 0 compared on the maximal superposition, whose response has no
  // alternating-sum cancellation: Delta phi = 1/N exactly
  const DickeVector ghz = msscs(SpinLength(32), 0.0);
  const PrecisionResult at_zero = error_propagation_precision(ghz, 0.0, half_pi_readout(), NoiseModel{});
  CHECK(precision_closed_form(ghz, 0.0) == Catch::Approx(at_zero.delta_phi).epsilon(1e-12));
  CHECK(precision_closed_form(ghz, 0.0) == Catch::Approx(1.0 / 32.0).epsilon(1e-12));
  CHECK_THROWS_AS(precision_closed_form(cat, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(precision_closed_form(scs(SpinLength(32), 0.4), 0.0), std::invalid_argument);
}

TEST_CASE("dephased distribution at g = 0 equals the pure one") {
  const SpinLength spin(16);
  const DickeVector cat = msscs(spin, kPi / 8.0);
  const double phi = 0.27;
  const double tau = 0.9;
  ReadoutConfig cfg;
  cfg.tau = tau;
  const DistributionWithDerivative pure = readout_distribution(cat, phi, cfg);
  const DistributionWithDerivative mixed = dephased_distribution(cat, phi, tau, DephasingConfig{0.0});
  CHECK((pure.p - mixed.p).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((pure.dp - mixed.dp).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dephased error propagation: trace fast path equals the distribution route") {
  const SpinLength spin(24);
  const DickeVector cat = msscs(spin, kPi / 8.0);
  const double phi = 0.15;
  const double tau = 0.7;
  const DephasingConfig cfg{2.0};

  const PrecisionResult fast = error_propagation_dephased(cat, phi, tau, cfg, NoiseModel{});

  const DistributionWithDerivative dist = dephased_distribution(cat, phi, tau, cfg);
  const double j = spin.j();
  double mean = 0.0, second = 0.0, slope = 0.0;
  for (int i = 0; i < dist.p.size(); ++i) {
    const double m = i - j;
    mean += m * dist.p[i];
    second += m * m * dist.p[i];
    slope += m * dist.dp[i];
  }
  const double expected = std::sqrt(second - mean * mean) / std::abs(slope);
  CHECK(fast.delta_phi == Catch::Approx(expected).epsilon(1e-10));
}

TEST_CASE("dephased error propagation at g = 0 equals the pure path") {
  const SpinLength spin(24);
  const DickeVector cat = msscs(spin, kPi / 8.0);
  ReadoutConfig cfg;
  cfg.tau = 0.8;
  const PrecisionResult pure = error_propagation_precision(cat, 0.1, cfg, NoiseModel{});
  const PrecisionResult mixed = error_propagation_dephased(cat, 0.1, 0.8, DephasingConfig{0.0}, NoiseModel{});
  CHECK(mixed.delta_phi == Catch::Approx(pure.delta_phi).epsilon(1e-10));
  // and with detection noise on both routes
  const PrecisionResult pure_noise = error_propagation_precision(cat, 0.1, cfg, NoiseModel{2.0});
  const PrecisionResult mixed_noise =
      error_propagation_dephased(cat, 0.1, 0.8, DephasingConfig{0.0}, NoiseModel{2.0});
  CHECK(mixed_noise.delta_phi == Catch::Approx(pure_noise.delta_phi).epsilon(1e-10));
}
