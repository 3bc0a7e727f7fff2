#pragma once

// Test-side reference implementations, kept deliberately independent of the
// library: brute-force matrix exponentials, an RK4 channel integrator, direct
// binomial state construction, and finite differences. Slow is fine here.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>

namespace oracles {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Scaling-and-squaring matrix exponential with a plain Taylor core.
inline Matrix expm(const Matrix& a) {
  const double norm = a.cwiseAbs().maxCoeff() * a.rows();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const Matrix b = a * scale;
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k < 64; ++k) {
    term = (term * b) / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

inline Eigen::MatrixXd jx_matrix(int n) {
  const int dim = n + 1;
  const double j = 0.5 * n;
  Eigen::MatrixXd jx = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i + 1 < dim; ++i) {
    const double m = i - j;
    const double v = 0.5 * std::sqrt(j * (j + 1.0) - m * (m + 1.0));
    jx(i + 1, i) = v;
    jx(i, i + 1) = v;
  }
  return jx;
}

inline Eigen::VectorXd jz_values(int n) {
  const int dim = n + 1;
  const double j = 0.5 * n;
  Eigen::VectorXd m(dim);
  for (int i = 0; i < dim; ++i) m[i] = i - j;
  return m;
}

/// Full readout pipeline where every factor is a brute-force matrix exponential:
/// exp(-i phi Jz), exp(+i (pi/2) Jx), exp(+i tau Jz^2), exp(-i (pi/2) Jx).
inline Vector expm_readout(const Vector& input, double phi, double tau) {
  const int n = static_cast<int>(input.size()) - 1;
  const Matrix jx = jx_matrix(n).cast<Complex>();
  const Eigen::VectorXd m = jz_values(n);
  Matrix jz = Matrix::Zero(n + 1, n + 1);
  Matrix jz2 = jz;
  for (int i = 0; i <= n; ++i) {
    jz(i, i) = m[i];
    jz2(i, i) = m[i] * m[i];
  }
  const double half_pi = 1.5707963267948966;
  const Matrix u_phase = expm(Complex(0.0, -phi) * jz);
  const Matrix u_pre = expm(Complex(0.0, half_pi) * jx);
  const Matrix u_oat = expm(Complex(0.0, tau) * jz2);
  const Matrix u_post = expm(Complex(0.0, -half_pi) * jx);
  return u_post * (u_oat * (u_pre * (u_phase * input)));
}

/// drho/dtau = i [Jz^2, rho] + g (Jz rho Jz - (Jz^2 rho + rho Jz^2) / 2),
/// integrated with classic fourth-order Runge-Kutta.
inline Matrix rk4_dephasing(const Matrix& rho0, double tau, double g, double step) {
  const int dim = static_cast<int>(rho0.rows());
  const int n = dim - 1;
  const Eigen::VectorXd m = jz_values(n);
  Matrix jz = Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) jz(i, i) = m[i];
  const Matrix jz2 = jz * jz;

  auto rhs = [&](const Matrix& rho) -> Matrix {
    return Complex(0.0, 1.0) * (jz2 * rho - rho * jz2) +
           g * (jz * rho * jz - 0.5 * (jz2 * rho + rho * jz2));
  };

  Matrix rho = rho0;
  double t = 0.0;
  while (t < tau - 1e-15) {
    const double h = std::min(step, tau - t);
    const Matrix k1 = rhs(rho);
    const Matrix k2 = rhs(rho + 0.5 * h * k1);
    const Matrix k3 = rhs(rho + 0.5 * h * k2);
    const Matrix k4 = rhs(rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return rho;
}

inline double binomial(int n, int k) {
  double out = 1.0;
  for (int i = 0; i < k; ++i) out = out * (n - i) / (i + 1);
  return out;
}

/// Direct small-N spin-coherent amplitudes, no log-space tricks.
inline Eigen::VectorXd scs_direct(int n, double theta) {
  const int dim = n + 1;
  Eigen::VectorXd c(dim);
  for (int i = 0; i < dim; ++i) {
    c[i] = std::sqrt(binomial(n, i)) * std::pow(std::cos(0.5 * theta), i) *
           std::pow(std::sin(0.5 * theta), n - i);
  }
  c /= c.norm();
  return c;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracles
