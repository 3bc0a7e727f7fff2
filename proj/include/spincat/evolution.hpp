#pragma once

#include <cmath>
#include <stdexcept>

#include "spincat/spin_core.hpp"
#include "spincat/state_factory.hpp"

namespace spincat {

/// Interaction-based readout: pre pulse, one-axis twisting of strength tau, post pulse.
struct ReadoutConfig {
  double tau = 0.0;
  double pulse_angle = kHalfPi;
  int pulse_sign_pre = +1;
  int pulse_sign_post = -1;
};

struct DephasingConfig {
  double gamma_ratio = 0.0;  // g = gamma / chi
};

/// a_m <- a_m e^{-i m phi}
inline DickeVector phase_accumulate(const DickeVector& state, double phi) {
  const double j = spin_of(state).j();
  DickeVector out(state.size());
  for (int i = 0; i < state.size(); ++i)
    out[i] = state[i] * std::exp(Complex(0.0, -(i - j) * phi));
  return out;
}

/// One-axis twisting, a_m <- a_m e^{+i tau m^2}.
inline DickeVector oat(const DickeVector& state, double tau) {
  const double j = spin_of(state).j();
  DickeVector out(state.size());
  for (int i = 0; i < state.size(); ++i) {
    const double m = i - j;
    out[i] = state[i] * std::exp(Complex(0.0, tau * m * m));
  }
  return out;
}

inline DickeVector readout(const DickeVector& state_out, const ReadoutConfig& cfg) {
  const SpinLength spin = spin_of(state_out);
  const DenseOperator& pre = rot_x(spin, cfg.pulse_angle, cfg.pulse_sign_pre);
  const DenseOperator& post = rot_x(spin, cfg.pulse_angle, cfg.pulse_sign_post);
  return post * oat(pre * state_out, cfg.tau);
}

/// Closed form needs even integer J and mirror-symmetric amplitudes.
inline bool closed_form_applicable(const DickeVector& input, double tol = 1e-12) {
  const int n = static_cast<int>(input.size()) - 1;
  if (n < 2 || n % 4 != 0) return false;
  for (int i = 0; i < input.size(); ++i)
    if (std::abs(input[i] - input[input.size() - 1 - i]) > tol) return false;
  return true;
}

/// O(dim) readout at tau = pi/2 for even J, symmetric input:
/// amplitude at m = k becomes a_k [cos(k phi) + (-1)^{J-k} sin(k phi)] i^{(J-k)^2 mod 4}.
inline DickeVector readout_closed_form(const DickeVector& input, double phi) {
  if (!closed_form_applicable(input))
    throw std::invalid_argument("readout_closed_form: requires even J and symmetric amplitudes");
  const int dim = static_cast<int>(input.size());
  const double j = spin_of(input).j();
  DickeVector out(dim);
  for (int i = 0; i < dim; ++i) {
    const double k = i - j;
    const bool odd = (i % 2) != 0;  // parity of J - k since 2J is a multiple of 4
    const double sign = odd ? -1.0 : 1.0;
    const Complex phase = odd ? Complex(0.0, 1.0) : Complex(1.0, 0.0);
    out[i] = input[i] * (std::cos(k * phi) + sign * std::sin(k * phi)) * phase;
  }
  return out;
}

/// Exact collective-dephasing channel during twisting:
/// rho_mn <- rho_mn e^{+i (m^2 - n^2) tau} e^{-g tau (m - n)^2 / 2}.
inline DensityOperator dephasing_propagate(const DensityOperator& rho, double tau,
                                           const DephasingConfig& cfg) {
  if (cfg.gamma_ratio < 0.0) throw std::invalid_argument("dephasing_propagate: g must be >= 0");
  if (tau < 0.0) throw std::invalid_argument("dephasing_propagate: tau must be >= 0");
  if (rho.rows() != rho.cols()) throw std::invalid_argument("dephasing_propagate: square matrix required");
  const int dim = static_cast<int>(rho.rows());
  const double j = 0.5 * (dim - 1);
  DensityOperator out(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const double m = r - j;
    for (int c = 0; c < dim; ++c) {
      const double n = c - j;
      const double d = m - n;
      out(r, c) = rho(r, c) * std::exp(Complex(-0.5 * cfg.gamma_ratio * tau * d * d,
                                               (m * m - n * n) * tau));
    }
  }
  return out;
}

/// Density-operator readout: rho(0) built from the pulsed, phase-accumulated input,
/// dephased twisting, then the inverse pulse.
inline DensityOperator dephased_readout_from_state(const DickeVector& input, double phi, double tau,
                                                   const DephasingConfig& cfg) {
  const SpinLength spin = spin_of(input);
  const DenseOperator& pre = rot_x(spin, kHalfPi, +1);
  const DenseOperator& post = rot_x(spin, kHalfPi, -1);
  const DickeVector pulsed = pre * phase_accumulate(input, phi);
  const DensityOperator rho0 = pulsed * pulsed.adjoint();
  const DensityOperator rho_d = dephasing_propagate(rho0, tau, cfg);
  return post * rho_d * post.adjoint();
}

inline DensityOperator dephased_readout_pipeline(const CatSpec& cat, double phi, double tau,
                                                 const DephasingConfig& cfg) {
  return dephased_readout_from_state(cat_state(cat), phi, tau, cfg);
}

}  // namespace spincat
