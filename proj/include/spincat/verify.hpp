#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "spincat/estimation.hpp"
#include "spincat/evolution.hpp"
#include "spincat/experiments.hpp"
#include "spincat/io.hpp"
#include "spincat/spin_core.hpp"
#include "spincat/state_factory.hpp"

namespace spincat {

/// Self-check suite behind the `verify` subcommand: one line per check, returns
/// the number of failures.
inline int run_verification(std::ostream& os) {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    os << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    const SpinLength spin(8);
    const DenseOperator& plus = rot_x(spin, kHalfPi, +1);
    const DenseOperator& minus = rot_x(spin, kHalfPi, -1);
    const double inverse_defect =
        (plus * minus - DenseOperator::Identity(spin.dim(), spin.dim())).cwiseAbs().maxCoeff();
    check("rot_x inverse pair", inverse_defect < 1e-10);
    const double group_defect =
        (rot_x(spin, 0.3, +1) * rot_x(spin, 0.45, +1) - rot_x(spin, 0.75, +1)).cwiseAbs().maxCoeff();
    check("rot_x group property", group_defect < 1e-10);
  }

  {
    const SpinLength spin(40);
    const auto& es = detail::jx_eigensystem(spin);
    double spectrum_defect = 0.0;
    for (int i = 0; i < spin.dim(); ++i)
      spectrum_defect = std::max(spectrum_defect, std::abs(es.values[i] - (i - spin.j())));
    check("jx spectrum is the m ladder", spectrum_defect < 1e-10);
  }

  {
    bool ok = true;
    for (const int n : {8, 12}) {
      const SpinLength spin(n);
      for (const double theta : {0.0, kPi / 4.0}) {
        const DickeVector cat = msscs(spin, theta);
        for (int k = 0; k < 8; ++k) {
          const double phi = kPi * k / 7.0;
          ReadoutConfig cfg;
          cfg.tau = kHalfPi;
          const DickeVector dense = readout(phase_accumulate(cat, phi), cfg);
          // closed form consumes the unaccumulated amplitudes and phi directly
          const DickeVector closed = readout_closed_form(cat, phi);
          if ((dense - closed).cwiseAbs().maxCoeff() > 1e-10) ok = false;
        }
      }
    }
    check("closed-form readout matches dense pipeline", ok);
  }

  {
    const SpinLength spin(8);
    const DickeVector cat = msscs(spin, kPi / 4.0);
    bool ok = true;
    for (int k = 0; k < 5; ++k) {
      const double phi = 0.1 + 0.3 * k;
      const DickeVector out = readout_closed_form(cat, phi);
      for (int i = 0; i < spin.dim(); ++i) {
        const double kk = i - spin.j();
        const double sign = (i % 2) != 0 ? -1.0 : 1.0;
        const double expected = std::norm(cat[i]) * (1.0 + sign * std::sin(2.0 * kk * phi));
        if (std::abs(std::norm(out[i]) - expected) > 1e-12) ok = false;
      }
    }
    check("closed-form outcome probabilities", ok);
  }

  {
    const SpinLength spin(8);
    const DickeVector cat = msscs(spin, kPi / 8.0);
    const DickeVector pulsed = rot_x(spin, kHalfPi, +1) * phase_accumulate(cat, 0.4);
    const DensityOperator rho0 = pulsed * pulsed.adjoint();
    const DephasingConfig cfg{2.0};
    const DensityOperator one = dephasing_propagate(rho0, 0.25, cfg);
    const DensityOperator two = dephasing_propagate(dephasing_propagate(rho0, 0.1, cfg), 0.15, cfg);
    check("dephasing semigroup", (one - two).cwiseAbs().maxCoeff() < 1e-12);
    check("dephasing preserves trace", std::abs(one.trace().real() - 1.0) < 1e-12);
    Eigen::SelfAdjointEigenSolver<DensityOperator> solver(one);
    check("dephasing complete positivity", solver.eigenvalues().minCoeff() > -1e-10);
  }

  {
    const SpinLength spin(8);
    const DickeVector cat = msscs(spin, kPi / 4.0);
    ReadoutConfig cfg;
    cfg.tau = 0.7;
    const DickeVector pure = readout(phase_accumulate(cat, 0.3), cfg);
    const DensityOperator rho =
        dephased_readout_from_state(cat, 0.3, 0.7, DephasingConfig{0.0});
    const DensityOperator outer = pure * pure.adjoint();
    check("g=0 density path equals pure path", (rho - outer).cwiseAbs().maxCoeff() < 1e-10);
  }

  {
    bool ok = true;
    const SpinLength spin(100);
    for (const double theta : {0.0, kPi / 8.0, kPi / 4.0, 7.0 * kPi / 20.0}) {
      const DickeVector cat = msscs(spin, theta);
      ReadoutConfig cfg;
      cfg.tau = kHalfPi;
      const PrecisionResult res = error_propagation_precision(cat, kHalfPi, cfg, NoiseModel{});
      const double product = res.delta_phi * std::sqrt(qfi_jz(cat));
      if (std::abs(product - 1.0) > 1e-8) ok = false;
    }
    check("bound saturation at tau=pi/2, phi=pi/2", ok);
  }

  {
    const Eigen::MatrixXd kernel = detection_kernel(101, 5.0);
    double defect = 0.0;
    for (int n = 0; n < kernel.cols(); ++n) defect = std::max(defect, std::abs(kernel.col(n).sum() - 1.0));
    check("detection kernel is column stochastic", defect < 1e-12);
  }

  {
    const SpinLength spin(40);
    const DickeVector cat = msscs(spin, kPi / 4.0);
    ReadoutConfig cfg;
    cfg.tau = kPi / 4.0;
    const Eigen::VectorXd dp = derivative_distribution(cat, 0.35, cfg);
    const double h = 1e-5;
    const DickeVector hi = readout(phase_accumulate(cat, 0.35 + h), cfg);
    const DickeVector lo = readout(phase_accumulate(cat, 0.35 - h), cfg);
    double defect = 0.0;
    for (int i = 0; i < spin.dim(); ++i) {
      const double fd = (std::norm(hi[i]) - std::norm(lo[i])) / (2.0 * h);
      defect = std::max(defect, std::abs(fd - dp[i]));
    }
    check("derivative distribution matches finite difference", defect < 1e-6);
    check("derivative distribution sums to zero", std::abs(dp.sum()) < 1e-10);
  }

  {
    const std::vector<double> thetas{0.0, kPi / 4.0};
    const std::vector<double> gammas{0.0};
    const std::vector<double> taus = default_tau_grid(41);
    const auto seq = tau_scan(thetas, 40, PhiCenter::zero, gammas, taus, 1);
    const auto par = tau_scan(thetas, 40, PhiCenter::zero, gammas, taus, 4);
    check("scan determinism across worker counts",
          rows_to_csv("readout-scan", seq) == rows_to_csv("readout-scan", par));
  }

  return failures;
}

}  // namespace spincat
