// Acceptance checks 1-10. Usage: optodtc_acceptance [--output DIR] [N ...]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

#include "optodtc/cli_io.hpp"
#include "optodtc/error.hpp"
#include "optodtc/model.hpp"
#include "optodtc/quantum.hpp"
#include "optodtc/spectrum.hpp"

using namespace optodtc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

fs::path g_output = "acceptance_out";
int g_workers = 1;

TaskResult run_preset(const std::string& name, const Json& overrides = Json::object()) {
  RunConfig cfg = load_preset(name, overrides);
  cfg.output = (g_output / name).string();
  cfg.workers = g_workers;
  ExecuteOptions opt;
  opt.quiet = true;
  TaskResult r = execute(cfg, opt);
  if (r.exit_code != exit_ok) {
    throw std::runtime_error(name + " exited with " + std::to_string(r.exit_code) + ": " +
                             r.message);
  }
  return r;
}

double get(const Json& j, const char* key) { return j.at(key).get<double>(); }

Verdict closed_form() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    ModelParams p;
    p.delta = 0.5 + 200.0 * u(rng);
    p.drive = cplx{1e4 * u(rng), 1e3 * (u(rng) - 0.5)};
    p.kappa = 0.1 + 50.0 * u(rng);
    p.n_phonon = 1.0 + 1e3 * u(rng);
    p.j_coupling = 0.1 + 3.0 * u(rng);
    p = p.with_coupling(critical_coupling(p) * 2.0 * u(rng));
    const double lhs = critical_coupling_dicke(dicke_params(p), p.kappa);
    const double rhs = 2.0 * critical_coupling(p) * classical_amplitude(p).modulus *
                       std::sqrt(p.n_phonon);
    worst = std::max(worst, std::abs(lhs - rhs) / rhs);
  }
  return {worst <= 1e-12, "max relative mismatch " + num(worst) + " over 100 sets"};
}

Verdict transition() {
  const Json s = run_preset("fig3").summary;
  const double below = get(s, "max_abs_delta_n_over_n_below_gc");
  const double dn = get(s, "max_rel_err_delta_n_above_1p1_gc");
  const double d = get(s, "max_rel_err_d_sq_above_1p1_gc");
  const bool ok = s["failed_points"] == 0 && below < 1e-3 && dn < 0.01 && d < 0.01;
  return {ok, "|dN|/N below g_c " + num(below) + ", rel err dN " + num(dn) + ", |d|^2 " + num(d)};
}

Verdict full_vs_effective() {
  const Json s = run_preset("fig2").summary;
  std::vector<double> dev;
  for (const Json& row : s["comparison"]) {
    if (row["status"] != "ok") return {false, "comparison run failed"};
    dev.push_back(get(row, "relative_deviation"));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < dev.size(); ++i) monotone = monotone && dev[i] < dev[i - 1];
  std::string list;
  for (double v : dev) list += (list.empty() ? "" : ", ") + num(v, 3);
  return {monotone && dev.back() < 0.05,
          "deviations [" + list + "] (monotone " + (monotone ? "yes" : "no") + ", last < 0.05 " +
              (dev.back() < 0.05 ? "yes" : "no") + ")"};
}

Verdict period_doubling() {
  const Json a = run_preset("fig4").summary;
  const double amp = get(a, "mean_abs_delta_n_over_n");
  const double target = get(a, "steady_delta_n_bar_over_n");
  const bool alternates = a["alternating_pairs"] == a["pairs"] && a["pairs"] == 50;
  const bool amp_ok = std::abs(amp - target) / target < 0.10;
  const Json b = run_preset("fig5").summary;
  const double ratio = get(b, "fourier_peak") / get(b, "fourier_max_off_peak");
  return {alternates && amp_ok && ratio >= 10.0,
          "50/50 alternating " + std::string(alternates ? "yes" : "no") + ", mean |dN|/N " +
              num(amp) + " vs " + num(target) + ", |S(0.5)| / off-peak " + num(ratio, 3)};
}

Verdict rigidity() {
  const Json s = run_preset("fig6b").summary;
  const Json& r = s["regions"];
  const auto count = [&](const char* region, const char* what) {
    return r.contains(region) ? r[region][what].get<long>() : 0L;
  };
  const long between = count("between", "points"), between_dtc = count("between", "dtc");
  const long below = count("below_gc2", "points"), below_dtc = count("below_gc2", "dtc");
  const long above_dtc = count("above_gc1", "dtc");
  const bool ok = s["failed_points"] == 0 && between > 0 && between_dtc == between &&
                  below_dtc == 0 && above_dtc >= 1;
  return {ok, "region (3) " + std::to_string(between_dtc) + "/" + std::to_string(between) +
                  " DTC, g < g_c2 " + std::to_string(below_dtc) + "/" + std::to_string(below) +
                  " DTC, g > g_c1 " + std::to_string(above_dtc) + " DTC"};
}

Verdict quantum_lifetimes() {
  RunConfig cfg = load_preset("fig8");
  cfg.output = (g_output / "fig8").string();
  cfg.workers = g_workers;
  ExecuteOptions opt;
  opt.quiet = true;
  const TaskResult r = execute(cfg, opt);
  std::map<int, double> life;
  std::string detail;
  bool alternating = true;
  for (const Json& run : r.summary.value("runs", Json::array())) {
    const int n = run["n_phonon"].get<int>();
    if (run["status"] != "ok") {
      detail += "N=" + std::to_string(n) + " failed: " + run.value("message", "") + "; ";
      alternating = false;
      continue;
    }
    life[n] = get(run, "lifetime");
    const auto& x = run["stroboscopic_jx_over_n"];
    // period-2T response over the first periods
    for (std::size_t k = 1; k < std::min<std::size_t>(x.size(), 6); ++k) {
      alternating = alternating && x[k].get<double>() * x[k - 1].get<double>() < 0.0;
    }
    detail += "T_" + std::to_string(n) + " = " + num(life[n]) + " (D=" +
              std::to_string(run["dimension"].get<int>()) + ", " +
              std::to_string(run["alternations"].get<long>()) + " sign changes); ";
  }
  const bool grows = life.count(10) && life.count(24) && life[24] > life[10];
  return {r.exit_code == exit_ok && alternating && grows,
          detail + (grows ? "T_24 > T_10" : "T_24 > T_10 not shown")};
}

Verdict lindblad_oracle() {
  const HilbertSpec spec{5, 5};
  const double delta = 5.0, j = 1.0, g = 0.03, a = 8.0, rate = 2.4, t = 5.0;
  const OperatorSet ops = build_operators(spec);
  const DenseMatrix L = vectorized_lindbladian(build_hamiltonian(ops, delta, j, g, a), ops.d, rate);
  const QuantumState s0 = initial_state(spec, cplx{0.3, -0.1}, cplx{1.0, 0.3}, cplx{0.5, 0.0});
  const int D = spec.dimension();
  const DenseMatrix rho0 = s0.rho;
  const Eigen::VectorXcd v1 =
      (L * t).exp() * Eigen::Map<const Eigen::VectorXcd>(rho0.data(), D * D);
  const DenseMatrix expected = Eigen::Map<const DenseMatrix>(v1.data(), D, D);
  const EffectiveLindblad lind(spec, delta, j, g, a, rate);
  const QuantumState s1 = lind.evolve(s0, t, StepControl{1e-12, 1e-12});
  const double err = (DenseMatrix(s1.rho) - expected).cwiseAbs().maxCoeff();
  return {err <= 1e-8, "dimension " + std::to_string(D) + ", max |rho - expm(L t) rho0| = " +
                           num(err) + " at t = 5/J"};
}

Verdict damped_lifetime_check() {
  const Json s = run_preset("fig9").summary;
  const double life_err = get(s, "lifetime_relative_error");
  const double env = get(s, "envelope_max_relative_deviation");
  return {life_err < 0.10 && env < 0.05,
          "last alternation at t = " + num(get(s, "last_alternating_time")) + " vs T0 = " +
              num(get(s, "lifetime_t0")) + " (rel " + num(life_err, 3) +
              "), envelope deviation " + num(env, 3)};
}

Verdict spectrum_feasibility() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> m0d(2, 12), md(-4, 4);
  std::uniform_real_distribution<double> td(0.2, 0.95), ld(0.5, 3.0);
  int n = 0, bad = 0;
  double worst_res = 0.0, worst_first = 0.0, worst_mixed = 0.0, worst_anti = 0.0;
  while (n < 50) {
    const double T = td(rng), L = ld(rng);
    const int m0 = m0d(rng), m1 = md(rng), m2 = md(rng);
    Equilibrium e;
    try {
      e = equilibrium_positions(m0, m1, m2, T, L);
    } catch (const InvalidArgument&) {
      continue;
    }
    if (e.x1 < -0.99 * L || e.x2 > 0.99 * L || e.x2 - e.x1 < 0.01 * L) continue;
    ++n;
    SpectrumProblem p;
    p.half_length = L;
    p.transmission = T;
    p.x1 = e.x1;
    p.x2 = e.x2;
    const double res = std::abs(spectrum_residual(e.k, p));
    const CouplingDerivatives d = coupling_derivatives(p, e.k);
    const double first = std::max(std::abs(d.dk_dx1), std::abs(d.dk_dx2)) / e.k;
    const double mixed = std::abs(d.d2k_dx1dx2) * L / e.k;
    const double anti = std::abs(d.d2k_dx1 + d.d2k_dx2) / std::abs(d.d2k_dx1);
    worst_res = std::max(worst_res, res);
    worst_first = std::max(worst_first, first);
    worst_mixed = std::max(worst_mixed, mixed);
    worst_anti = std::max(worst_anti, anti);
    if (!(res < 1e-12 && first < 1e-6 && mixed < 1e-4 && anti < 1e-4)) ++bad;
  }
  const Json s = run_preset("figA2").summary;
  const double fit = std::max(get(s, "fit_curvature_error_x1"), get(s, "fit_curvature_error_x2"));
  const double sym = get(s, "fit_antisymmetry");
  const bool ok = bad == 0 && fit < 0.01 && sym < 0.01;
  return {ok, std::to_string(50 - bad) + "/50 sets: residual " + num(worst_res, 2) +
                  ", |k'|/k " + num(worst_first, 2) + ", |k_12| L/k " + num(worst_mixed, 2) +
                  ", k_11 + k_22 " + num(worst_anti, 2) + "; surface fit curvature error " +
                  num(fit, 2) + ", a11 + a22 " + num(sym, 2)};
}

Verdict invariants() {
  RunConfig cfg = parse_config(Json{{"task", "validate"}});
  cfg.output = (g_output / "validate").string();
  cfg.workers = g_workers;
  ExecuteOptions opt;
  opt.quiet = true;
  const TaskResult r = execute(cfg, opt);
  long passed = 0, total = 0;
  std::string failed;
  for (const Json& c : r.summary["checks"]) {
    ++total;
    if (c["passed"] == true) ++passed;
    else failed += " " + c["check"].get<std::string>();
  }
  return {r.exit_code == exit_ok,
          std::to_string(passed) + "/" + std::to_string(total) + " checks" +
              (failed.empty() ? "" : ", failed:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"closed-form dicke mapping", closed_form},
      {"phase transition sweep", transition},
      {"full vs effective convergence", full_vs_effective},
      {"period doubling", period_doubling},
      {"rigidity", rigidity},
      {"quantum lifetime growth", quantum_lifetimes},
      {"lindblad oracle", lindblad_oracle},
      {"damped lifetime", damped_lifetime_check},
      {"spectrum feasibility", spectrum_feasibility},
      {"invariant suites", invariants},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--output" && i + 1 < argc) {
      g_output = argv[++i];
    } else {
      const int n = std::atoi(a.c_str());
      if (n < 1 || n > static_cast<int>(criteria.size())) {
        std::cerr << "usage: optodtc_acceptance [--output DIR] [1-10 ...]\n";
        return exit_config_error;
      }
      selected.push_back(n);
    }
  }
  if (selected.empty()) {
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);
  }
  try {
    g_workers = resolve_workers(std::nullopt,
                                static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return exit_config_error;
  }

  bool all = true;
  for (int n : selected) {
    const auto& [name, check] = criteria[n - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %-30s %8.1f s  %s\n", n, v.pass ? "PASS" : "FAIL", name, secs,
                v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? exit_ok : exit_validation_failure;
}
