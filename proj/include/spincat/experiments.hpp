#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spincat/estimation.hpp"
#include "spincat/evolution.hpp"
#include "spincat/state_factory.hpp"

namespace spincat {

enum class PhiCenter { zero, half_pi };

inline double phi_center_value(PhiCenter center) {
  return center == PhiCenter::zero ? 0.0 : kHalfPi;
}

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

struct OptimizeResult {
  double tau_opt = 0.0;
  double delta_phi_min = 0.0;
};

/// One record of an in-memory sweep table; mirrors the CSV columns after the
/// experiment tag.
struct ScanRow {
  double theta = 0.0;
  long long n = 0;
  double phi = 0.0;
  double tau = 0.0;
  double sigma = 0.0;
  double gamma_ratio = 0.0;
  long long mu = 1;
  double delta_phi = 0.0;
  std::string method = "error-propagation";
  std::string flag = "ok";
};

/// Declarative sweep description assembled by the CLI layer.
struct SweepGrid {
  std::vector<double> theta_values;
  std::vector<int> n_values;
  std::vector<double> tau_grid;
  PhiCenter phi_center = PhiCenter::zero;
  std::vector<double> sigma_grid;
  std::vector<double> gamma_ratio_grid;
  int mu = 1;

  void validate() const {
    auto ascending = [](const auto& v) { return std::is_sorted(v.begin(), v.end()); };
    if (theta_values.empty() || !ascending(theta_values))
      throw std::invalid_argument("SweepGrid: theta grid must be nonempty and ascending");
    if (n_values.empty() || !ascending(n_values))
      throw std::invalid_argument("SweepGrid: n grid must be nonempty and ascending");
    for (int n : n_values)
      if (n <= 0 || n % 2 != 0) throw std::invalid_argument("SweepGrid: n values must be positive and even");
    if (!ascending(tau_grid) || !ascending(sigma_grid) || !ascending(gamma_ratio_grid))
      throw std::invalid_argument("SweepGrid: grids must be ascending");
    if (mu < 1) throw std::invalid_argument("SweepGrid: mu must be positive");
  }
};

/// Fixed worker pool over [0, count) with an atomic cursor; item index determines
/// where results land, so output ordering never depends on scheduling.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw > 0 ? static_cast<int>(hw) : 1;
  }
  threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_guard;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::scoped_lock lock(failure_guard);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Ordinary least squares on (ln x, ln y).
inline FitResult loglog_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw std::invalid_argument("loglog_fit: need at least two points");
  std::vector<double> lx, ly;
  lx.reserve(points.size());
  ly.reserve(points.size());
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("loglog_fit: values must be positive");
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const double n = static_cast<double>(points.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("loglog_fit: degenerate abscissa");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

/// Input state for a scan angle: the two-branch superposition below pi/2, the
/// single coherent state exactly at pi/2.
inline DickeVector input_state(const SpinLength& spin, double theta) {
  if (std::abs(theta - kHalfPi) < 1e-12) return scs(spin, kHalfPi);
  return msscs(spin, theta);
}

namespace detail {

inline PrecisionResult scan_point(const DickeVector& input, double phi, double tau,
                                  const NoiseModel& noise, const DephasingConfig& dephasing, int mu) {
  if (dephasing.gamma_ratio > 0.0)
    return error_propagation_dephased(input, phi, tau, dephasing, noise, mu);
  ReadoutConfig cfg;
  cfg.tau = tau;
  PrecisionResult res = error_propagation_precision(input, phi, cfg, noise, mu);
  res.gamma_ratio = 0.0;
  return res;
}

}  // namespace detail

inline constexpr int kCoarseTauPoints = 201;

inline std::vector<double> default_tau_grid(int points = kCoarseTauPoints) {
  if (points < 2) throw std::invalid_argument("default_tau_grid: need at least two points");
  std::vector<double> grid(points);
  for (int k = 1; k <= points; ++k) grid[k - 1] = kHalfPi * k / points;
  return grid;
}

/// Coarse global scan over tau in (0, pi/2], then golden-section refinement of the
/// best bracket down to 1e-6; ties resolve toward smaller tau and divergent points
/// never win.
inline OptimizeResult optimize_tau_objective(const std::function<PrecisionResult(double)>& objective) {
  const std::vector<double> grid = default_tau_grid();
  std::vector<double> values(grid.size());
  double best = std::numeric_limits<double>::infinity();
  double best_tau = -1.0;
  int best_index = -1;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const PrecisionResult r = objective(grid[k]);
    values[k] = r.divergent ? std::numeric_limits<double>::infinity() : r.delta_phi;
    if (values[k] < best) {
      best = values[k];
      best_tau = grid[k];
      best_index = static_cast<int>(k);
    }
  }
  if (best_index < 0) throw std::runtime_error("optimize_tau: divergent slope on the whole grid");

  double lo = best_index > 0 ? grid[best_index - 1] : 0.0;
  double hi = best_index + 1 < static_cast<int>(grid.size()) ? grid[best_index + 1] : kHalfPi;
  auto eval = [&](double tau) {
    const PrecisionResult r = objective(tau);
    const double v = r.divergent ? std::numeric_limits<double>::infinity() : r.delta_phi;
    if (v < best) {
      best = v;
      best_tau = tau;
    }
    return v;
  };
  constexpr double kGolden = 0.6180339887498949;
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = eval(x1);
  double f2 = eval(x2);
  while (hi - lo > 1e-6) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = eval(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = eval(x2);
    }
  }
  return OptimizeResult{best_tau, best};
}

inline OptimizeResult optimize_tau(const DickeVector& input, double phi, const NoiseModel& noise,
                                   const DephasingConfig& dephasing, int mu = 1) {
  return optimize_tau_objective(
      [&](double tau) { return detail::scan_point(input, phi, tau, noise, dephasing, mu); });
}

struct ScalingResult {
  std::vector<ScanRow> rows;
  FitResult fit;
};

/// Minimum precision versus particle number at one polar angle: optimized tau at
/// phi center 0, fixed tau = pi/2 at phi center pi/2.
inline ScalingResult scaling_scan(double theta, PhiCenter center, const std::vector<int>& n_grid,
                                  int threads = 1, int mu = 1) {
  ScalingResult out;
  out.rows.resize(n_grid.size());
  const double phi = phi_center_value(center);
  parallel_for(n_grid.size(), threads, [&](std::size_t i) {
    const SpinLength spin(n_grid[i]);
    const DickeVector state = input_state(spin, theta);
    ScanRow row;
    row.theta = theta;
    row.n = n_grid[i];
    row.phi = phi;
    row.mu = mu;
    if (center == PhiCenter::half_pi) {
      ReadoutConfig cfg;
      cfg.tau = kHalfPi;
      const PrecisionResult res = error_propagation_precision(state, phi, cfg, NoiseModel{}, mu);
      row.tau = kHalfPi;
      row.delta_phi = res.delta_phi;
      row.flag = res.divergent ? "divergent" : "ok";
    } else {
      const OptimizeResult opt = optimize_tau(state, phi, NoiseModel{}, DephasingConfig{}, mu);
      row.tau = opt.tau_opt;
      row.delta_phi = opt.delta_phi_min;
    }
    out.rows[i] = std::move(row);
  });
  std::vector<std::pair<double, double>> points;
  points.reserve(out.rows.size());
  for (const auto& row : out.rows) points.emplace_back(static_cast<double>(row.n), row.delta_phi);
  out.fit = loglog_fit(points);
  return out;
}

struct UltimateBoundResult {
  std::vector<ScanRow> rows;
  std::vector<std::pair<double, FitResult>> fits;  // per theta, in input order
};

/// Cramer-Rao bound versus N: the analytic cat bound inside the cat regime, the
/// exact Fisher-information bound for reference states outside it.
inline UltimateBoundResult ultimate_bound_scan(const std::vector<double>& thetas,
                                               const std::vector<int>& n_grid, int mu = 1) {
  UltimateBoundResult out;
  for (const double theta : thetas) {
    std::vector<std::pair<double, double>> points;
    points.reserve(n_grid.size());
    for (const int n : n_grid) {
      const SpinLength spin(n);
      ScanRow row;
      row.theta = theta;
      row.n = n;
      row.mu = mu;
      const bool analytic = theta < kHalfPi && n >= 40 && theta <= cat_threshold(spin);
      if (analytic) {
        row.delta_phi = qcrb_analytic_cat(CatSpec{n, theta}) / std::sqrt(static_cast<double>(mu));
        row.method = "qcrb-analytic";
      } else {
        row.delta_phi = qcrb(qfi_jz(input_state(spin, theta)), mu);
        row.method = "qcrb";
      }
      points.emplace_back(static_cast<double>(n), row.delta_phi);
      out.rows.push_back(std::move(row));
    }
    const FitResult fit = loglog_fit(points);
    out.fits.emplace_back(theta, fit);
    for (const auto& [name, value] :
         {std::pair<const char*, double>{"fit-slope", fit.slope},
          std::pair<const char*, double>{"fit-intercept", fit.intercept},
          std::pair<const char*, double>{"fit-r2", fit.r_squared}}) {
      ScanRow row;
      row.theta = theta;
      row.mu = mu;
      row.delta_phi = value;
      row.method = name;
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

/// Precision versus twisting strength for each (theta, g) pair, with optional
/// per-pair optimum rows appended.
inline std::vector<ScanRow> tau_scan(const std::vector<double>& thetas, int n, PhiCenter center,
                                     const std::vector<double>& gamma_grid,
                                     const std::vector<double>& tau_grid, int threads = 1,
                                     bool with_optima = true, int mu = 1) {
  const SpinLength spin(n);
  const double phi = phi_center_value(center);
  std::vector<DickeVector> states;
  states.reserve(thetas.size());
  for (const double theta : thetas) states.push_back(input_state(spin, theta));
  rot_x(spin, kHalfPi, +1);  // warm the shared caches before workers fan out
  rot_x(spin, kHalfPi, -1);

  const std::size_t per_theta = gamma_grid.size() * tau_grid.size();
  std::vector<ScanRow> rows(thetas.size() * per_theta);
  parallel_for(rows.size(), threads, [&](std::size_t idx) {
    const std::size_t ti = idx / per_theta;
    const std::size_t gi = (idx % per_theta) / tau_grid.size();
    const std::size_t ki = idx % tau_grid.size();
    const double tau = tau_grid[ki];
    const PrecisionResult res = detail::scan_point(states[ti], phi, tau, NoiseModel{},
                                                   DephasingConfig{gamma_grid[gi]}, mu);
    ScanRow row;
    row.theta = thetas[ti];
    row.n = n;
    row.phi = phi;
    row.tau = tau;
    row.gamma_ratio = gamma_grid[gi];
    row.mu = mu;
    row.delta_phi = res.delta_phi;
    row.flag = res.divergent ? "divergent" : "ok";
    rows[idx] = std::move(row);
  });

  if (with_optima) {
    std::vector<ScanRow> optima(thetas.size() * gamma_grid.size());
    parallel_for(optima.size(), threads, [&](std::size_t idx) {
      const std::size_t ti = idx / gamma_grid.size();
      const std::size_t gi = idx % gamma_grid.size();
      const OptimizeResult opt =
          optimize_tau(states[ti], phi, NoiseModel{}, DephasingConfig{gamma_grid[gi]}, mu);
      ScanRow row;
      row.theta = thetas[ti];
      row.n = n;
      row.phi = phi;
      row.tau = opt.tau_opt;
      row.gamma_ratio = gamma_grid[gi];
      row.mu = mu;
      row.delta_phi = opt.delta_phi_min;
      row.method = "tau-opt";
      optima[idx] = std::move(row);
    });
    rows.insert(rows.end(), std::make_move_iterator(optima.begin()),
                std::make_move_iterator(optima.end()));
  }
  return rows;
}

/// Precision versus detection noise; phi center 0 re-optimizes tau per sigma,
/// phi center pi/2 keeps tau = pi/2. Emits raw rows, then rows rescaled to the
/// normalized coordinates (sigma over the branch separation, delta over the
/// analytic bound).
inline std::vector<ScanRow> noise_scan(const std::vector<double>& thetas, int n, PhiCenter center,
                                       const std::vector<double>& sigma_grid, int threads = 1,
                                       int mu = 1) {
  const SpinLength spin(n);
  const double phi = phi_center_value(center);
  std::vector<DickeVector> states;
  states.reserve(thetas.size());
  for (const double theta : thetas) states.push_back(input_state(spin, theta));
  rot_x(spin, kHalfPi, +1);
  rot_x(spin, kHalfPi, -1);

  std::vector<ScanRow> raw(thetas.size() * sigma_grid.size());
  parallel_for(raw.size(), threads, [&](std::size_t idx) {
    const std::size_t ti = idx / sigma_grid.size();
    const std::size_t si = idx % sigma_grid.size();
    const double sigma = sigma_grid[si];
    ScanRow row;
    row.theta = thetas[ti];
    row.n = n;
    row.phi = phi;
    row.sigma = sigma;
    row.mu = mu;
    if (center == PhiCenter::half_pi) {
      ReadoutConfig cfg;
      cfg.tau = kHalfPi;
      const PrecisionResult res =
          error_propagation_precision(states[ti], phi, cfg, NoiseModel{sigma}, mu);
      row.tau = kHalfPi;
      row.delta_phi = res.delta_phi;
      row.flag = res.divergent ? "divergent" : "ok";
    } else {
      const OptimizeResult opt =
          optimize_tau(states[ti], phi, NoiseModel{sigma}, DephasingConfig{}, mu);
      row.tau = opt.tau_opt;
      row.delta_phi = opt.delta_phi_min;
    }
    raw[idx] = std::move(row);
  });

  std::vector<ScanRow> rows = raw;
  for (std::size_t ti = 0; ti < thetas.size(); ++ti) {
    const double mbar_approx = mbar(spin, thetas[ti], MbarMode::approx);
    for (std::size_t si = 0; si < sigma_grid.size(); ++si) {
      ScanRow row = raw[ti * sigma_grid.size() + si];
      row.sigma = row.sigma / mbar_approx;
      row.delta_phi = row.delta_phi * 2.0 * mbar_approx;
      row.method = "normalized";
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace spincat
