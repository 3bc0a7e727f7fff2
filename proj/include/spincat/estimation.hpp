#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "spincat/evolution.hpp"
#include "spincat/spin_core.hpp"
#include "spincat/state_factory.hpp"

namespace spincat {

enum class PrecisionMethod { error_propagation, cfi_bound, qcrb };

struct PrecisionResult {
  double delta_phi = 0.0;
  PrecisionMethod method = PrecisionMethod::error_propagation;
  double phi = 0.0;
  double tau = 0.0;
  double sigma = 0.0;
  double gamma_ratio = 0.0;
  int mu = 1;
  bool divergent = false;
};

/// Gaussian blur of the measured population-difference distribution.
struct NoiseModel {
  double sigma = 0.0;
};

inline double qfi_jz(const DickeVector& state) { return 4.0 * variance_jz(state); }

inline double qcrb(double fisher, int mu) {
  if (!(fisher > 0.0)) throw std::invalid_argument("qcrb: fisher must be positive");
  if (mu < 1) throw std::invalid_argument("qcrb: mu must be positive");
  return 1.0 / std::sqrt(static_cast<double>(mu) * fisher);
}

/// Analytic bound C(theta)/N, valid only inside the cat regime.
inline double qcrb_analytic_cat(const CatSpec& spec) {
  const SpinLength spin(spec.n_particles);
  if (spin.n_particles < 40 || !(spec.theta <= cat_threshold(spin)))
    throw std::domain_error("qcrb_analytic_cat: outside the cat regime");
  return c_coefficient(spin, spec.theta) / spin.n_particles;
}

namespace detail {

inline Eigen::VectorXd clamp_and_renormalize(Eigen::VectorXd p) {
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] < -1e-14) throw std::runtime_error("probabilities: negative weight beyond tolerance");
    if (p[i] < 0.0) p[i] = 0.0;
  }
  const double total = p.sum();
  if (std::abs(total - 1.0) > 1e-10) throw std::runtime_error("probabilities: normalization drift");
  return p / total;
}

}  // namespace detail

inline Eigen::VectorXd probabilities(const DickeVector& state) {
  Eigen::VectorXd p(state.size());
  for (int i = 0; i < state.size(); ++i) p[i] = std::norm(state[i]);
  return detail::clamp_and_renormalize(std::move(p));
}

inline Eigen::VectorXd probabilities_rho(const DensityOperator& rho) {
  Eigen::VectorXd p(rho.rows());
  for (int i = 0; i < rho.rows(); ++i) p[i] = rho(i, i).real();
  return detail::clamp_and_renormalize(std::move(p));
}

namespace detail {

/// Column-stochastic Gaussian kernel over the truncated outcome range; cached per (dim, sigma).
inline const Eigen::MatrixXd& detection_kernel_cached(int dim, double sigma) {
  using Key = std::pair<int, std::uint64_t>;
  static std::mutex guard;
  static std::map<Key, std::unique_ptr<Eigen::MatrixXd>> cache;
  const Key key{dim, std::bit_cast<std::uint64_t>(sigma)};
  std::scoped_lock lock(guard);
  auto& slot = cache[key];
  if (!slot) {
    auto kernel = std::make_unique<Eigen::MatrixXd>(dim, dim);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int n = 0; n < dim; ++n) {
      double total = 0.0;
      for (int m = 0; m < dim; ++m) {
        const double d = m - n;
        (*kernel)(m, n) = std::exp(-d * d * inv);
        total += (*kernel)(m, n);
      }
      kernel->col(n) /= total;
    }
    slot = std::move(kernel);
  }
  return *slot;
}

}  // namespace detail

inline Eigen::MatrixXd detection_kernel(int dim, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("detection_kernel: sigma must be >= 0");
  if (sigma == 0.0) return Eigen::MatrixXd::Identity(dim, dim);
  return detail::detection_kernel_cached(dim, sigma);
}

/// Applies the kernel to any real weight vector; by linearity this works for both
/// probabilities and their phi derivatives.
inline Eigen::VectorXd apply_detection_noise(const Eigen::VectorXd& weights, const NoiseModel& noise) {
  if (noise.sigma < 0.0) throw std::invalid_argument("apply_detection_noise: sigma must be >= 0");
  if (noise.sigma == 0.0) return weights;
  return detail::detection_kernel_cached(static_cast<int>(weights.size()), noise.sigma) * weights;
}

struct DistributionWithDerivative {
  Eigen::VectorXd p;
  Eigen::VectorXd dp;
};

/// Final outcome distribution and its exact phi derivative for the pure readout path.
inline DistributionWithDerivative readout_distribution(const DickeVector& input, double phi,
                                                       const ReadoutConfig& cfg) {
  const double j = spin_of(input).j();
  const DickeVector accumulated = phase_accumulate(input, phi);
  DickeVector accumulated_deriv(input.size());
  for (int i = 0; i < input.size(); ++i)
    accumulated_deriv[i] = Complex(0.0, -(i - j)) * accumulated[i];

  const DickeVector psi = readout(accumulated, cfg);
  const DickeVector dpsi = readout(accumulated_deriv, cfg);

  DistributionWithDerivative out;
  out.p = probabilities(psi);
  out.dp.resize(input.size());
  for (int i = 0; i < input.size(); ++i)
    out.dp[i] = 2.0 * (std::conj(psi[i]) * dpsi[i]).real();
  return out;
}

inline Eigen::VectorXd derivative_distribution(const DickeVector& input, double phi,
                                               const ReadoutConfig& cfg) {
  return readout_distribution(input, phi, cfg).dp;
}

struct CfiResult {
  double value = 0.0;
  bool divergent = false;
};

inline CfiResult cfi(const Eigen::VectorXd& p, const Eigen::VectorXd& dp) {
  if (p.size() != dp.size()) throw std::invalid_argument("cfi: length mismatch");
  CfiResult out;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] < 1e-14) {
      if (std::abs(dp[i]) >= 1e-12) out.divergent = true;
      continue;
    }
    out.value += dp[i] * dp[i] / p[i];
  }
  return out;
}

namespace detail {

struct JzMoments {
  double mean = 0.0;
  double variance = 0.0;
  double slope = 0.0;
};

inline JzMoments weighted_jz_moments(const Eigen::VectorXd& p, const Eigen::VectorXd& dp) {
  const double j = 0.5 * (p.size() - 1);
  JzMoments mom;
  double second = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    const double m = i - j;
    mom.mean += m * p[i];
    second += m * m * p[i];
    mom.slope += m * dp[i];
  }
  mom.variance = std::max(second - mom.mean * mom.mean, 0.0);
  return mom;
}

inline PrecisionResult precision_from_moments(const JzMoments& mom, double phi, double tau,
                                              double sigma, double gamma_ratio, int mu) {
  PrecisionResult res;
  res.method = PrecisionMethod::error_propagation;
  res.phi = phi;
  res.tau = tau;
  res.sigma = sigma;
  res.gamma_ratio = gamma_ratio;
  res.mu = mu;
  if (std::abs(mom.slope) < 1e-12) {
    res.divergent = true;
    res.delta_phi = std::numeric_limits<double>::infinity();
  } else {
    res.delta_phi = std::sqrt(mom.variance) / (std::sqrt(static_cast<double>(mu)) * std::abs(mom.slope));
  }
  return res;
}

}  // namespace detail

/// Moment-based precision of the pure readout, optionally blurred by detection noise.
inline PrecisionResult error_propagation_precision(const DickeVector& input, double phi,
                                                   const ReadoutConfig& cfg, const NoiseModel& noise,
                                                   int mu = 1) {
  DistributionWithDerivative dist = readout_distribution(input, phi, cfg);
  if (noise.sigma > 0.0) {
    dist.p = apply_detection_noise(dist.p, noise);
    dist.dp = apply_detection_noise(dist.dp, noise);
  }
  return detail::precision_from_moments(detail::weighted_jz_moments(dist.p, dist.dp), phi, cfg.tau,
                                        noise.sigma, 0.0, mu);
}

namespace detail {

struct ReadoutJzFrame {
  DenseOperator a;   // Jz conjugated back through the final pulse
  DenseOperator a2;  // square of the above
};

inline const ReadoutJzFrame& readout_jz_frame(const SpinLength& spin) {
  static std::mutex guard;
  static std::map<int, std::unique_ptr<ReadoutJzFrame>> cache;
  std::scoped_lock lock(guard);
  auto& slot = cache[spin.n_particles];
  if (!slot) {
    const DenseOperator& post = rot_x(spin, kHalfPi, -1);
    const DenseOperator a = post.adjoint() * jz_diagonal(spin).asDiagonal().toDenseMatrix().cast<Complex>() * post;
    slot = std::make_unique<ReadoutJzFrame>(ReadoutJzFrame{a, a * a});
  }
  return *slot;
}

}  // namespace detail

/// Final distribution and derivative for the dephased (density-operator) readout path.
inline DistributionWithDerivative dephased_distribution(const DickeVector& input, double phi,
                                                        double tau, const DephasingConfig& cfg) {
  const SpinLength spin = spin_of(input);
  const int dim = spin.dim();
  const double j = spin.j();
  const DenseOperator& pre = rot_x(spin, kHalfPi, +1);
  const DenseOperator& post = rot_x(spin, kHalfPi, -1);

  const DickeVector accumulated = phase_accumulate(input, phi);
  DickeVector accumulated_deriv(dim);
  for (int i = 0; i < dim; ++i) accumulated_deriv[i] = Complex(0.0, -(i - j)) * accumulated[i];
  const DickeVector pulsed = pre * accumulated;
  const DickeVector pulsed_deriv = pre * accumulated_deriv;

  const DensityOperator rho0 = pulsed * pulsed.adjoint();
  const DensityOperator drho0 = pulsed_deriv * pulsed.adjoint() + pulsed * pulsed_deriv.adjoint();
  const DensityOperator rho_d = dephasing_propagate(rho0, tau, cfg);
  const DensityOperator drho_d = dephasing_propagate(drho0, tau, cfg);

  const DensityOperator m_rho = post * rho_d;
  const DensityOperator m_drho = post * drho_d;
  DistributionWithDerivative out;
  out.p.resize(dim);
  out.dp.resize(dim);
  for (int i = 0; i < dim; ++i) {
    out.p[i] = (m_rho.row(i) * post.row(i).adjoint()).value().real();
    out.dp[i] = (m_drho.row(i) * post.row(i).adjoint()).value().real();
  }
  out.p = detail::clamp_and_renormalize(std::move(out.p));
  return out;
}

/// Moment-based precision of the dephased readout. The noiseless branch evaluates
/// Jz moments as traces against the channel output, which keeps each tau point at
/// O(dim^2) cost.
inline PrecisionResult error_propagation_dephased(const DickeVector& input, double phi, double tau,
                                                  const DephasingConfig& cfg, const NoiseModel& noise,
                                                  int mu = 1) {
  if (noise.sigma > 0.0) {
    DistributionWithDerivative dist = dephased_distribution(input, phi, tau, cfg);
    dist.p = apply_detection_noise(dist.p, noise);
    dist.dp = apply_detection_noise(dist.dp, noise);
    PrecisionResult res = detail::precision_from_moments(detail::weighted_jz_moments(dist.p, dist.dp),
                                                         phi, tau, noise.sigma, cfg.gamma_ratio, mu);
    return res;
  }

  const SpinLength spin = spin_of(input);
  const int dim = spin.dim();
  const double j = spin.j();
  const detail::ReadoutJzFrame& frame = detail::readout_jz_frame(spin);
  const DenseOperator& pre = rot_x(spin, kHalfPi, +1);

  const DickeVector accumulated = phase_accumulate(input, phi);
  DickeVector accumulated_deriv(dim);
  for (int i = 0; i < dim; ++i) accumulated_deriv[i] = Complex(0.0, -(i - j)) * accumulated[i];
  const DickeVector pulsed = pre * accumulated;
  const DickeVector pulsed_deriv = pre * accumulated_deriv;

  Complex mean(0.0, 0.0), second(0.0, 0.0), slope(0.0, 0.0);
  for (int r = 0; r < dim; ++r) {
    const double m = r - j;
    for (int c = 0; c < dim; ++c) {
      const double n = c - j;
      const double d = m - n;
      const Complex env = std::exp(Complex(-0.5 * cfg.gamma_ratio * tau * d * d, (m * m - n * n) * tau));
      const Complex rho_rc = pulsed[r] * std::conj(pulsed[c]) * env;
      const Complex drho_rc = (pulsed_deriv[r] * std::conj(pulsed[c]) +
                               pulsed[r] * std::conj(pulsed_deriv[c])) * env;
      mean += frame.a(c, r) * rho_rc;
      second += frame.a2(c, r) * rho_rc;
      slope += frame.a(c, r) * drho_rc;
    }
  }

  detail::JzMoments mom;
  mom.mean = mean.real();
  mom.variance = std::max(second.real() - mom.mean * mom.mean, 0.0);
  mom.slope = slope.real();
  return detail::precision_from_moments(mom, phi, tau, 0.0, cfg.gamma_ratio, mu);
}

/// Analytic precision of the tau = pi/2 readout at phi = 0 or phi = pi/2,
/// for even-J symmetric inputs.
inline double precision_closed_form(const DickeVector& input, double phi) {
  if (!closed_form_applicable(input))
    throw std::invalid_argument("precision_closed_form: requires even J and symmetric amplitudes");
  const double j = spin_of(input).j();
  double s2 = 0.0, s2_alt = 0.0;
  for (int i = 0; i < input.size(); ++i) {
    const double k = i - j;
    const double w = k * k * std::norm(input[i]);
    s2 += w;
    s2_alt += ((i % 2) != 0 ? -1.0 : 1.0) * w;
  }
  if (std::abs(phi) < 1e-12) {
    const double denom = 2.0 * std::abs(s2_alt);
    if (denom < 1e-12) return std::numeric_limits<double>::infinity();
    return std::sqrt(s2) / denom;
  }
  if (std::abs(phi - kHalfPi) < 1e-12) return 1.0 / (2.0 * std::sqrt(s2));
  throw std::invalid_argument("precision_closed_form: phi must be 0 or pi/2");
}

}  // namespace spincat
