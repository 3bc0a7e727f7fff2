#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "spincat/estimation.hpp"
#include "spincat/evolution.hpp"
#include "spincat/experiments.hpp"
#include "spincat/io.hpp"
#include "spincat/spin_core.hpp"
#include "spincat/state_factory.hpp"
#include "spincat/verify.hpp"
#include "spincat/version.hpp"

namespace {

using nlohmann::json;
using namespace spincat;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerifyFailed = 3;

/// Accepts radians ("0.785") or pi fractions ("pi/8", "7pi/20", "2pi", "pi").
double parse_angle(const std::string& raw) {
  const std::string s = [&] {
    std::string t;
    for (char c : raw)
      if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
    return t;
  }();
  if (s.empty()) throw std::invalid_argument("empty angle");
  const std::size_t at = s.find("pi");
  std::size_t consumed = 0;
  if (at == std::string::npos) {
    const double value = std::stod(s, &consumed);
    if (consumed != s.size()) throw std::invalid_argument("trailing characters in angle: " + raw);
    return value;
  }
  double coeff = 1.0;
  if (at > 0) {
    coeff = std::stod(s.substr(0, at), &consumed);
    if (consumed != at) throw std::invalid_argument("bad coefficient in angle: " + raw);
  }
  double denom = 1.0;
  const std::size_t rest = at + 2;
  if (rest < s.size()) {
    if (s[rest] != '/') throw std::invalid_argument("expected '/' in angle: " + raw);
    const std::string d = s.substr(rest + 1);
    denom = std::stod(d, &consumed);
    if (consumed != d.size() || denom == 0.0) throw std::invalid_argument("bad denominator in angle: " + raw);
  }
  return coeff * kPi / denom;
}

/// "a:b:count" inclusive linspace, or a comma-separated list.
std::vector<double> parse_grid(const std::string& raw) {
  std::vector<double> out;
  if (raw.find(':') != std::string::npos) {
    double a = 0.0, b = 0.0;
    long count = 0;
    if (std::sscanf(raw.c_str(), "%lf:%lf:%ld", &a, &b, &count) != 3 || count < 1)
      throw std::invalid_argument("grid must be a:b:count, got " + raw);
    if (count == 1) {
      out.push_back(a);
      return out;
    }
    for (long k = 0; k < count; ++k) out.push_back(a + (b - a) * k / (count - 1));
    return out;
  }
  std::size_t pos = 0;
  while (pos < raw.size()) {
    const std::size_t comma = raw.find(',', pos);
    const std::string item = raw.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    out.push_back(std::stod(item));
    pos = comma == std::string::npos ? raw.size() : comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("empty grid: " + raw);
  return out;
}

std::vector<double> default_cat_thetas() { return {0.0, kPi / 8.0, kPi / 4.0, 7.0 * kPi / 20.0}; }

std::vector<int> default_n_grid() { return {40, 60, 100, 160, 250, 400, 630, 1000}; }

struct CommonOptions {
  std::vector<std::string> theta;
  int n = 100;
  std::vector<int> n_grid;
  std::string phi_center;  // empty means the subcommand default
  std::string tau_grid;
  std::string sigma_grid;
  std::vector<double> gamma_ratio;
  int mu = 1;
  std::string out;
  std::string format = "csv";
  std::string svg;
  int threads = 0;
  std::string config;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--theta", opt.theta, "polar angles, radians or pi fractions like 7pi/20")
      ->delimiter(',');
  cmd->add_option("--n", opt.n, "particle number (even)");
  cmd->add_option("--n-grid", opt.n_grid, "particle-number grid (even values)")->delimiter(',');
  cmd->add_option("--phi-center", opt.phi_center, "phase working point: zero | half-pi | both")
      ->check(CLI::IsMember({"zero", "half-pi", "both"}));
  cmd->add_option("--tau-grid", opt.tau_grid, "twisting grid as a:b:count or comma list");
  cmd->add_option("--sigma-grid", opt.sigma_grid, "detection-noise grid as a:b:count or comma list");
  cmd->add_option("--gamma-ratio", opt.gamma_ratio, "dephasing-to-twisting rate ratios g")
      ->delimiter(',');
  cmd->add_option("--mu", opt.mu, "number of independent trials")->check(CLI::PositiveNumber);
  cmd->add_option("--out", opt.out, "output data path");
  cmd->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--svg", opt.svg, "also write a polyline chart to this path");
  cmd->add_option("--threads", opt.threads, "worker cap, 0 = available parallelism");
  cmd->add_option("--config", opt.config, "JSON config file; flags take precedence");
}

/// Fills options the command line left untouched from a JSON document whose keys
/// mirror the long flag names.
void merge_config(CLI::App* cmd, CommonOptions& opt) {
  if (opt.config.empty()) return;
  std::ifstream stream(opt.config);
  if (!stream) throw std::runtime_error("cannot open config file " + opt.config);
  json doc = json::parse(stream);

  auto untouched = [&](const std::string& flag) { return cmd->count(flag) == 0; };
  if (doc.contains("theta") && untouched("--theta")) {
    opt.theta.clear();
    for (const auto& v : doc["theta"])
      opt.theta.push_back(v.is_string() ? v.get<std::string>() : format_number(v.get<double>()));
  }
  if (doc.contains("n") && untouched("--n")) opt.n = doc["n"].get<int>();
  if (doc.contains("n-grid") && untouched("--n-grid")) opt.n_grid = doc["n-grid"].get<std::vector<int>>();
  if (doc.contains("phi-center") && untouched("--phi-center"))
    opt.phi_center = doc["phi-center"].get<std::string>();
  if (doc.contains("tau-grid") && untouched("--tau-grid")) opt.tau_grid = doc["tau-grid"].get<std::string>();
  if (doc.contains("sigma-grid") && untouched("--sigma-grid"))
    opt.sigma_grid = doc["sigma-grid"].get<std::string>();
  if (doc.contains("gamma-ratio") && untouched("--gamma-ratio"))
    opt.gamma_ratio = doc["gamma-ratio"].get<std::vector<double>>();
  if (doc.contains("mu") && untouched("--mu")) opt.mu = doc["mu"].get<int>();
  if (doc.contains("out") && untouched("--out")) opt.out = doc["out"].get<std::string>();
  if (doc.contains("format") && untouched("--format")) opt.format = doc["format"].get<std::string>();
  if (doc.contains("svg") && untouched("--svg")) opt.svg = doc["svg"].get<std::string>();
  if (doc.contains("threads") && untouched("--threads")) opt.threads = doc["threads"].get<int>();
}

std::vector<double> resolve_thetas(const CommonOptions& opt, std::vector<double> fallback) {
  if (opt.theta.empty()) return fallback;
  std::vector<double> out;
  out.reserve(opt.theta.size());
  for (const auto& raw : opt.theta) out.push_back(parse_angle(raw));
  return out;
}

std::string resolve_center(CommonOptions& opt, const std::string& fallback, bool allow_both) {
  if (opt.phi_center.empty()) opt.phi_center = fallback;
  if (opt.phi_center == "both" && !allow_both)
    throw std::invalid_argument("phi-center both is only supported by the scaling subcommand");
  return opt.phi_center;
}

void validate_scan_inputs(const std::vector<double>& thetas, const std::vector<int>& n_values,
                          const std::vector<double>& sigmas, const std::vector<double>& gammas) {
  for (const double theta : thetas)
    if (!(theta >= 0.0 && theta <= kHalfPi))
      throw std::invalid_argument("theta must lie in [0, pi/2]");
  for (const int n : n_values)
    if (n <= 0 || n % 2 != 0) throw std::invalid_argument("n must be positive and even");
  for (const double s : sigmas)
    if (s < 0.0) throw std::invalid_argument("sigma must be >= 0");
  for (const double g : gammas)
    if (g < 0.0) throw std::invalid_argument("gamma-ratio must be >= 0");
}

std::string replace_extension(const std::string& path, const std::string& ext) {
  const std::size_t slash = path.find_last_of('/');
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ext;
  return path.substr(0, dot) + ext;
}

json effective_config(const CommonOptions& opt, const std::vector<double>& thetas) {
  json cfg;
  cfg["theta"] = thetas;
  cfg["n"] = opt.n;
  cfg["n-grid"] = opt.n_grid;
  cfg["phi-center"] = opt.phi_center;
  cfg["tau-grid"] = opt.tau_grid;
  cfg["sigma-grid"] = opt.sigma_grid;
  cfg["gamma-ratio"] = opt.gamma_ratio;
  cfg["mu"] = opt.mu;
  cfg["format"] = opt.format;
  cfg["threads"] = opt.threads;
  return cfg;
}

std::vector<SvgSeries> series_by_theta(const std::vector<ScanRow>& rows,
                                       const std::function<bool(const ScanRow&)>& select,
                                       const std::function<double(const ScanRow&)>& x_of) {
  std::vector<SvgSeries> series;
  for (const ScanRow& row : rows) {
    if (!select(row)) continue;
    const std::string label = "theta=" + format_number(row.theta) +
                              (row.gamma_ratio != 0.0 ? " g=" + format_number(row.gamma_ratio) : "");
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const SvgSeries& s) { return s.label == label; });
    if (it == series.end()) {
      series.push_back(SvgSeries{label, {}});
      it = std::prev(series.end());
    }
    it->points.emplace_back(x_of(row), row.delta_phi);
  }
  return series;
}

/// Runs a sweep and emits data, optional chart, and the run manifest. A manifest
/// is written even when the sweep itself throws, so every invocation leaves a
/// record behind.
int run_command(const std::string& experiment, const CommonOptions& opt,
                const std::vector<double>& thetas, json interpretation,
                const std::function<std::vector<ScanRow>()>& sweep,
                const std::function<std::vector<SvgSeries>(const std::vector<ScanRow>&)>& chart) {
  const auto started = std::chrono::steady_clock::now();
  const std::string default_name = experiment + (opt.format == "json" ? ".json" : ".csv");
  const std::string data_path = opt.out.empty() ? default_name : opt.out;
  const std::string manifest_path = replace_extension(data_path, ".manifest.json");

  auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 started)
        .count();
  };
  json manifest;
  manifest["subcommand"] = experiment;
  manifest["version"] = kVersion;
  manifest["parameters"] = effective_config(opt, thetas);
  manifest["interpretation"] = std::move(interpretation);

  std::vector<ScanRow> rows;
  try {
    rows = sweep();
  } catch (const std::exception& e) {
    manifest["error"] = e.what();
    manifest["duration_ms"] = elapsed_ms();
    manifest["outputs"] = json::array();
    write_text_file(manifest_path, manifest.dump(2) + "\n");
    throw;
  }

  const std::string payload =
      opt.format == "json" ? rows_to_json(experiment, rows) : rows_to_csv(experiment, rows);
  write_text_file(data_path, payload);
  std::vector<std::string> outputs{data_path};
  if (!opt.svg.empty()) {
    write_text_file(opt.svg, svg_plot(chart(rows), "x", "delta_phi", false, true));
    outputs.push_back(opt.svg);
  }
  manifest["duration_ms"] = elapsed_ms();
  manifest["outputs"] = outputs;
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  std::cout << experiment << ": " << rows.size() << " rows -> " << data_path << "\n";
  return kExitOk;
}

int cmd_ultimate_bound(CommonOptions& opt) {
  const std::vector<double> thetas = resolve_thetas(
      opt, {0.0, kPi / 8.0, 3.0 * kPi / 16.0, kPi / 4.0, 7.0 * kPi / 20.0, 15.0 * kPi / 32.0, kHalfPi});
  if (opt.n_grid.empty()) opt.n_grid = default_n_grid();
  validate_scan_inputs(thetas, opt.n_grid, {}, {});
  json interp;
  interp["bound"] = "analytic inside the cat regime, exact Fisher information outside";
  return run_command(
      "ultimate-bound", opt, thetas, interp,
      [&] { return ultimate_bound_scan(thetas, opt.n_grid, opt.mu).rows; },
      [](const std::vector<ScanRow>& rows) {
        return series_by_theta(
            rows, [](const ScanRow& r) { return r.method.rfind("fit-", 0) != 0; },
            [](const ScanRow& r) { return static_cast<double>(r.n); });
      });
}

int cmd_readout_scan(CommonOptions& opt) {
  const std::vector<double> thetas = resolve_thetas(opt, default_cat_thetas());
  validate_scan_inputs(thetas, {opt.n}, {}, {});
  const std::vector<double> taus =
      opt.tau_grid.empty() ? default_tau_grid() : parse_grid(opt.tau_grid);
  const PhiCenter center =
      resolve_center(opt, "zero", false) == "half-pi" ? PhiCenter::half_pi : PhiCenter::zero;
  json interp;
  interp["tau-opt-rows"] = "appended per theta after the scan rows";
  return run_command(
      "readout-scan", opt, thetas, interp,
      [&] { return tau_scan(thetas, opt.n, center, {0.0}, taus, opt.threads, true, opt.mu); },
      [](const std::vector<ScanRow>& rows) {
        return series_by_theta(rows, [](const ScanRow& r) { return r.method == "error-propagation"; },
                               [](const ScanRow& r) { return r.tau; });
      });
}

int cmd_scaling(CommonOptions& opt) {
  const std::vector<double> thetas = resolve_thetas(opt, default_cat_thetas());
  if (opt.n_grid.empty()) opt.n_grid = default_n_grid();
  validate_scan_inputs(thetas, opt.n_grid, {}, {});
  const std::string center_choice = resolve_center(opt, "both", true);
  std::vector<PhiCenter> centers;
  if (center_choice == "zero" || center_choice == "both") centers.push_back(PhiCenter::zero);
  if (center_choice == "half-pi" || center_choice == "both") centers.push_back(PhiCenter::half_pi);

  json interp;
  interp["phi-zero"] = "tau optimized per N";
  interp["phi-half-pi"] = "tau fixed at pi/2";
  return run_command(
      "scaling", opt, thetas, interp,
      [&] {
        std::vector<ScanRow> rows;
        for (const PhiCenter center : centers) {
          for (const double theta : thetas) {
            const ScalingResult result = scaling_scan(theta, center, opt.n_grid, opt.threads, opt.mu);
            rows.insert(rows.end(), result.rows.begin(), result.rows.end());
            for (const auto& [name, value] :
                 {std::pair<const char*, double>{"fit-slope", result.fit.slope},
                  std::pair<const char*, double>{"fit-intercept", result.fit.intercept},
                  std::pair<const char*, double>{"fit-r2", result.fit.r_squared}}) {
              ScanRow row;
              row.theta = theta;
              row.phi = phi_center_value(center);
              row.mu = opt.mu;
              row.delta_phi = value;
              row.method = name;
              rows.push_back(std::move(row));
            }
          }
        }
        return rows;
      },
      [](const std::vector<ScanRow>& rows) {
        return series_by_theta(rows, [](const ScanRow& r) { return r.method == "error-propagation"; },
                               [](const ScanRow& r) { return static_cast<double>(r.n); });
      });
}

int cmd_detection_noise(CommonOptions& opt) {
  const std::vector<double> thetas = resolve_thetas(opt, default_cat_thetas());
  const std::vector<double> sigmas =
      opt.sigma_grid.empty() ? parse_grid("0:25:26") : parse_grid(opt.sigma_grid);
  validate_scan_inputs(thetas, {opt.n}, sigmas, {});
  const PhiCenter center =
      resolve_center(opt, "zero", false) == "half-pi" ? PhiCenter::half_pi : PhiCenter::zero;
  json interp;
  interp["optimal-control-mode"] = center == PhiCenter::zero
                                       ? "reoptimize-tau-per-sigma@phi0"
                                       : "fixed-tau-half-pi@phi-half-pi";
  interp["normalized-rows"] = "sigma rescaled by the branch separation, delta by the analytic bound";
  return run_command(
      "detection-noise", opt, thetas, interp,
      [&] { return noise_scan(thetas, opt.n, center, sigmas, opt.threads, opt.mu); },
      [](const std::vector<ScanRow>& rows) {
        return series_by_theta(rows, [](const ScanRow& r) { return r.method == "error-propagation"; },
                               [](const ScanRow& r) { return r.sigma; });
      });
}

int cmd_dephasing(CommonOptions& opt) {
  const std::vector<double> thetas = resolve_thetas(opt, default_cat_thetas());
  const std::vector<double> gammas = opt.gamma_ratio.empty() ? std::vector<double>{0.0, 2.0, 6.0}
                                                             : opt.gamma_ratio;
  const std::vector<double> taus =
      opt.tau_grid.empty() ? default_tau_grid() : parse_grid(opt.tau_grid);
  validate_scan_inputs(thetas, {opt.n}, {}, gammas);
  const PhiCenter center =
      resolve_center(opt, "zero", false) == "half-pi" ? PhiCenter::half_pi : PhiCenter::zero;
  json interp;
  interp["dephasing"] = "acts during the twisting stage only";
  return run_command(
      "dephasing", opt, thetas, interp,
      [&] { return tau_scan(thetas, opt.n, center, gammas, taus, opt.threads, true, opt.mu); },
      [](const std::vector<ScanRow>& rows) {
        return series_by_theta(rows, [](const ScanRow& r) { return r.method == "error-propagation"; },
                               [](const ScanRow& r) { return r.tau; });
      });
}

int cmd_verify() {
  const int failures = run_verification(std::cout);
  if (failures > 0) {
    std::cout << failures << " verification check(s) failed\n";
    return kExitVerifyFailed;
  }
  std::cout << "all verification checks passed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collective-spin phase estimation with interaction-based readout"};
  app.require_subcommand(1);
  app.set_version_flag("--version", spincat::kVersion);

  CommonOptions ultimate, readout_opt, scaling, noise, dephasing;
  CLI::App* cmd_ub = app.add_subcommand("ultimate-bound", "Cramer-Rao bound versus particle number");
  add_common_flags(cmd_ub, ultimate);
  CLI::App* cmd_rs = app.add_subcommand("readout-scan", "precision versus twisting strength");
  add_common_flags(cmd_rs, readout_opt);
  CLI::App* cmd_sc = app.add_subcommand("scaling", "minimum precision versus particle number");
  add_common_flags(cmd_sc, scaling);
  CLI::App* cmd_dn = app.add_subcommand("detection-noise", "precision versus detection noise");
  add_common_flags(cmd_dn, noise);
  CLI::App* cmd_dp = app.add_subcommand("dephasing", "precision versus twisting under dephasing");
  add_common_flags(cmd_dp, dephasing);
  app.add_subcommand("verify", "run the self-check suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_ub->parsed()) {
      merge_config(cmd_ub, ultimate);
      return cmd_ultimate_bound(ultimate);
    }
    if (cmd_rs->parsed()) {
      merge_config(cmd_rs, readout_opt);
      return cmd_readout_scan(readout_opt);
    }
    if (cmd_sc->parsed()) {
      merge_config(cmd_sc, scaling);
      return cmd_scaling(scaling);
    }
    if (cmd_dn->parsed()) {
      merge_config(cmd_dn, noise);
      return cmd_detection_noise(noise);
    }
    if (cmd_dp->parsed()) {
      merge_config(cmd_dp, dephasing);
      return cmd_dephasing(dephasing);
    }
    return cmd_verify();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
