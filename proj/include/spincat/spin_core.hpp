#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace spincat {

using Complex = std::complex<double>;
using DickeVector = Eigen::VectorXcd;
using DenseOperator = Eigen::MatrixXcd;
using DensityOperator = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = kPi / 2.0;

/// Collective spin of N spin-1/2 particles: J = N/2, Dicke dimension N+1.
struct SpinLength {
  int n_particles;

  explicit SpinLength(int n) : n_particles(n) {
    if (n <= 0) throw std::invalid_argument("SpinLength: n_particles must be positive");
  }

  double j() const { return 0.5 * n_particles; }
  int dim() const { return n_particles + 1; }
};

inline SpinLength spin_of(const DickeVector& state) {
  if (state.size() < 2) throw std::invalid_argument("spin_of: state too short");
  return SpinLength(static_cast<int>(state.size()) - 1);
}

/// Jz eigenvalues m = -J..J, ascending, index i maps to m = i - J.
inline Eigen::VectorXd jz_diagonal(const SpinLength& spin) {
  const int dim = spin.dim();
  Eigen::VectorXd m(dim);
  for (int i = 0; i < dim; ++i) m[i] = i - spin.j();
  return m;
}

/// Tridiagonal Jx in the Dicke basis: <m+1|Jx|m> = sqrt(J(J+1) - m(m+1))/2.
inline Eigen::MatrixXd build_jx(const SpinLength& spin) {
  const int dim = spin.dim();
  const double j = spin.j();
  Eigen::MatrixXd jx = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i + 1 < dim; ++i) {
    const double m = i - j;
    const double v = 0.5 * std::sqrt(j * (j + 1.0) - m * (m + 1.0));
    jx(i + 1, i) = v;
    jx(i, i + 1) = v;
  }
  return jx;
}

namespace detail {

struct JxEigenSystem {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
};

inline const JxEigenSystem& jx_eigensystem(const SpinLength& spin) {
  static std::mutex guard;
  static std::map<int, std::unique_ptr<JxEigenSystem>> cache;
  std::scoped_lock lock(guard);
  auto& slot = cache[spin.n_particles];
  if (!slot) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(build_jx(spin));
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("jx_eigensystem: eigendecomposition failed");
    slot = std::make_unique<JxEigenSystem>(JxEigenSystem{solver.eigenvectors(), solver.eigenvalues()});
  }
  return *slot;
}

}  // namespace detail

/// exp(sign * i * angle * Jx) by spectral exponentiation; cached per (N, angle, sign).
inline const DenseOperator& rot_x(const SpinLength& spin, double angle, int sign) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("rot_x: sign must be +1 or -1");
  if (!std::isfinite(angle)) throw std::invalid_argument("rot_x: angle must be finite");

  using Key = std::tuple<int, std::uint64_t, int>;
  static std::mutex guard;
  static std::map<Key, std::unique_ptr<DenseOperator>> cache;

  const Key key{spin.n_particles, std::bit_cast<std::uint64_t>(angle), sign};
  std::scoped_lock lock(guard);
  auto& slot = cache[key];
  if (!slot) {
    const auto& es = detail::jx_eigensystem(spin);
    const int dim = spin.dim();
    Eigen::VectorXcd phases(dim);
    for (int i = 0; i < dim; ++i) phases[i] = std::exp(Complex(0.0, sign * angle * es.values[i]));
    slot = std::make_unique<DenseOperator>(es.vectors.cast<Complex>() * phases.asDiagonal() *
                                           es.vectors.transpose().cast<Complex>());
  }
  return *slot;
}

/// Matrix-vector application; deliberately does not renormalize.
inline DickeVector apply(const DenseOperator& op, const DickeVector& state) {
  if (op.cols() != state.size()) throw std::invalid_argument("apply: dimension mismatch");
  return op * state;
}

inline double expectation_jz(const DickeVector& state) {
  const SpinLength spin = spin_of(state);
  const double j = spin.j();
  double mean = 0.0;
  for (int i = 0; i < state.size(); ++i) mean += (i - j) * std::norm(state[i]);
  return mean;
}

inline double variance_jz(const DickeVector& state) {
  const SpinLength spin = spin_of(state);
  const double j = spin.j();
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < state.size(); ++i) {
    const double m = i - j;
    const double p = std::norm(state[i]);
    mean += m * p;
    second += m * m * p;
  }
  return std::max(second - mean * mean, 0.0);
}

}  // namespace spincat
