#pragma once

#include <cmath>
#include <stdexcept>

#include "spincat/spin_core.hpp"

namespace spincat {

/// Identifies an input cat state: particle number, polar angle, optional azimuth.
struct CatSpec {
  int n_particles;
  double theta;
  double azimuth = 0.0;
};

enum class MbarMode { exact, approx };

namespace detail {

/// Spin-coherent amplitudes c_m(theta) = sqrt(binom(2J, J+m)) cos^{J+m}(theta/2) sin^{J-m}(theta/2),
/// accumulated in log space so large-N binomials cannot overflow.
inline Eigen::VectorXd scs_coefficients(const SpinLength& spin, double theta) {
  if (!(theta >= 0.0 && theta <= kPi)) throw std::invalid_argument("scs: theta outside [0, pi]");
  const int dim = spin.dim();
  const double j = spin.j();
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  const double log_fact = std::lgamma(2.0 * j + 1.0);
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim; ++i) {
    const double kc = i;            // J + m
    const double ks = dim - 1 - i;  // J - m
    if ((c <= 0.0 && kc > 0.0) || (s <= 0.0 && ks > 0.0)) {
      out[i] = 0.0;
      continue;
    }
    double logw = 0.5 * (log_fact - std::lgamma(kc + 1.0) - std::lgamma(ks + 1.0));
    if (kc > 0.0) logw += kc * std::log(c);
    if (ks > 0.0) logw += ks * std::log(s);
    out[i] = std::exp(logw);
  }
  out /= out.norm();
  return out;
}

}  // namespace detail

/// Spin coherent state |theta, azimuth>; amplitude phase convention e^{-i(J+m) azimuth}.
inline DickeVector scs(const SpinLength& spin, double theta, double azimuth = 0.0) {
  const Eigen::VectorXd c = detail::scs_coefficients(spin, theta);
  DickeVector state(spin.dim());
  for (int i = 0; i < spin.dim(); ++i)
    state[i] = c[i] * std::exp(Complex(0.0, -static_cast<double>(i) * azimuth));
  return state;
}

/// Equal superposition of |theta> and |pi - theta>; exact numerical normalization.
inline DickeVector msscs(const SpinLength& spin, double theta) {
  if (!(theta >= 0.0 && theta < kHalfPi))
    throw std::invalid_argument("msscs: theta must lie in [0, pi/2)");
  const Eigen::VectorXd c = detail::scs_coefficients(spin, theta);
  Eigen::VectorXd b = c + c.reverse().eval();
  b /= b.norm();
  return b.cast<Complex>();
}

/// Normalization factor N_C of the two-branch superposition; tends to 1/sqrt(2).
inline double msscs_normalization(const SpinLength& spin, double theta) {
  if (!(theta >= 0.0 && theta < kHalfPi))
    throw std::invalid_argument("msscs_normalization: theta must lie in [0, pi/2)");
  const Eigen::VectorXd c = detail::scs_coefficients(spin, theta);
  return 1.0 / (c + c.reverse().eval()).norm();
}

/// Branch overlap <theta|pi - theta> = sin(theta)^N.
inline double scs_overlap(const SpinLength& spin, double theta) {
  const double s = std::sin(theta);
  if (s <= 0.0) return 0.0;
  return std::exp(spin.n_particles * std::log(s));
}

inline DickeVector cat_state(const CatSpec& spec) {
  const SpinLength spin(spec.n_particles);
  DickeVector state = msscs(spin, spec.theta);
  if (spec.azimuth != 0.0) {
    for (int i = 0; i < spin.dim(); ++i)
      state[i] *= std::exp(Complex(0.0, -static_cast<double>(i) * spec.azimuth));
  }
  return state;
}

/// Largest polar angle at which the two branches still count as quasi-orthogonal.
inline double cat_threshold(const SpinLength& spin) {
  if (spin.n_particles < 4) throw std::invalid_argument("cat_threshold: requires N >= 4");
  const double j = spin.j();
  const double log_ratio = 2.0 * std::lgamma(j) - std::log(2.0) - std::lgamma(2.0 * j + 1.0);
  return std::asin(2.0 * std::exp(log_ratio / (2.0 * j)));
}

/// Peak location (in m) of a branch's amplitude lobe.
inline double mbar(const SpinLength& spin, double theta, MbarMode mode) {
  if (!(theta >= 0.0 && theta < kHalfPi)) throw std::invalid_argument("mbar: theta must lie in [0, pi/2)");
  const double t = std::tan(0.5 * theta);
  const double t2 = t * t;
  if (mode == MbarMode::approx) return 0.5 * spin.n_particles * (1.0 - t2) / (1.0 + t2);
  return spin.j() * (1.0 - t2) / (1.0 + t2) + 1.0 / (1.0 + t2);
}

/// Analytic precision prefactor C(theta) = 1 + 2 t^2 / (1 - t^2), t = tan(theta/2).
inline double c_coefficient(const SpinLength& /*spin*/, double theta) {
  if (!(theta >= 0.0 && theta < kHalfPi))
    throw std::invalid_argument("c_coefficient: theta must lie in [0, pi/2)");
  const double t = std::tan(0.5 * theta);
  const double t2 = t * t;
  if (1.0 - t2 <= 0.0) throw std::invalid_argument("c_coefficient: singular at theta = pi/2");
  return 1.0 + 2.0 * t2 / (1.0 - t2);
}

}  // namespace spincat
