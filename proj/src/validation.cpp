#include "optodtc/validation.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "optodtc/cli_io.hpp"
#include "optodtc/dtc.hpp"
#include "optodtc/meanfield.hpp"
#include "optodtc/model.hpp"
#include "optodtc/quantum.hpp"
#include "optodtc/spectrum.hpp"

namespace optodtc {

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << std::scientific << v;
  return s.str();
}

Outcome bound(double value, double limit, const std::string& what) {
  return {value <= limit, what + " = " + sci(value) + " (limit " + sci(limit) + ")"};
}

ModelParams small_model() {
  ModelParams p;
  p.delta = 20.0;
  p.drive = 2000.0;
  p.kappa = 10.0;
  p.n_phonon = 200.0;
  return p.with_coupling(1.2 * critical_coupling(p));
}

Outcome dicke_mapping() {
  ModelParams p = small_model();
  p = p.with_coupling(critical_coupling(p));
  const DickeParams d = dicke_params(p);
  const double lc = critical_coupling_dicke(d, p.kappa);
  return bound(std::abs(d.lambda - lc) / lc, 1e-12, "|lambda(g_c) - lambda_c| / lambda_c");
}

Outcome steady_fixed_point() {
  const ModelParams p = small_model();
  const MeanFieldState s = broken_symmetry_state(p, p.g(), Branch::plus);
  const MeanFieldState r = effective_rhs(s, p);
  return bound(std::abs(r.cav) / (p.delta * std::abs(s.cav)), 1e-10,
               "|d'| / (Delta |d|) at the stationary state");
}

MeanFieldState evolve_effective(const ModelParams& p, const MeanFieldState& s0, double t,
                                double tol) {
  IntegrationControls c;
  c.step.abs_tol = tol;
  c.step.rel_tol = tol;
  c.sample_step = t;
  return integrate(make_effective_rhs(p), s0, {0.0, t}, c).states.back();
}

Outcome number_conservation() {
  const ModelParams p = small_model();
  const MeanFieldState s0 = symmetric_initial_state(10.0, cplx{-1e-3, 0.0});
  const MeanFieldState s1 = evolve_effective(p, s0, 20.0, 1e-10);
  return bound(std::abs(s1.total_n() - s0.total_n()) / s0.total_n(), 1e-8,
               "relative drift of |b1|^2 + |b2|^2");
}

Outcome z2_equivariance() {
  const ModelParams p = small_model();
  const auto mirror = [](const MeanFieldState& s) {
    MeanFieldState m = s;
    m.b1 = s.b2;
    m.b2 = s.b1;
    m.cav = -s.cav;
    return m;
  };
  const MeanFieldState s0{cplx{9.0, 1.0}, cplx{10.0, -0.5}, cplx{0.3, -0.2}};
  const MeanFieldState a = mirror(evolve_effective(p, s0, 5.0, 1e-11));
  const MeanFieldState b = evolve_effective(p, mirror(s0), 5.0, 1e-11);
  const double err = std::abs(a.b1 - b.b1) + std::abs(a.b2 - b.b2) + std::abs(a.cav - b.cav);
  return bound(err / std::sqrt(s0.total_n()), 1e-7, "mirror commutator");
}

Outcome self_convergence() {
  const ModelParams p = small_model();
  const MeanFieldState s0 = symmetric_initial_state(10.0, cplx{-1e-3, 0.0});
  const double coarse = evolve_effective(p, s0, 10.0, 1e-7).delta_n();
  const double fine = evolve_effective(p, s0, 10.0, 1e-11).delta_n();
  return bound(std::abs(coarse - fine) / p.n_phonon, 1e-4, "|dN(tol 1e-7) - dN(tol 1e-11)| / N");
}

Outcome schedule_alpha() {
  const PulseSchedule s = build_schedule(100.0, 50.0, 1e4, 10.0, 1.2, 100.0);
  const double err = std::abs(s.alpha_phase1() - s.alpha_phase2()) / std::abs(s.alpha_phase2());
  return bound(err, 1e-13, "|alpha1 - alpha2| / |alpha2|");
}

Outcome sweep_determinism(int workers) {
  PhaseDiagramSetup st;
  st.axes = DiagramAxes::detunings;
  st.base.delta = 20.0;
  st.base.drive = 2000.0;
  st.base.kappa = 15.0;
  st.base.g1 = st.base.g2 = 2e-3;
  st.t1_mode = FlipTimeMode::fixed;
  st.t1 = 1.9;
  st.t2 = 20.0;
  st.n_periods = 6;
  st.criteria.discard = 1;
  st.criteria.window = 0;
  st.axis1 = {20.0, 60.0};
  st.axis2 = {6.0, 14.0};
  const auto a = phase_diagram(st, 1);
  const int many = std::max(3, workers);
  const auto b = phase_diagram(st, many);
  bool same = a.size() == b.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) {
    same = a[i].status == b[i].status && a[i].verdict.is_dtc == b[i].verdict.is_dtc &&
           a[i].verdict.mean_amplitude == b[i].verdict.mean_amplitude &&
           a[i].verdict.alternation_fraction == b[i].verdict.alternation_fraction;
  }
  const std::string pair = "1 and " + std::to_string(many) + " workers";
  return {same, same ? "identical grids for " + pair : "grids differ between " + pair};
}

Outcome quantum_physicality() {
  ModelParams p;
  p.delta = 5.0;
  p.drive = 300.0;
  p.kappa = 1.2;
  p.n_phonon = 4.0;
  p = p.with_coupling(1.5 * critical_coupling(p));
  const MeanFieldState mf = broken_symmetry_state(p, p.g(), Branch::plus);
  const HilbertSpec spec{4, default_fock_cutoff(std::norm(mf.cav))};
  const PulseSchedule s = build_schedule(20.0, p.delta, p.drive, p.kappa, 0.9, 1.0);
  QuantumControls c;
  c.sample_step = 0.0;
  const QuantumRun r = run_quantum_protocol(spec, s, p, 2, initial_state(spec, mf), c);
  const StateDiagnostics d = diagnose(r.final_state);
  const double worst = std::max({std::abs(d.trace_error), d.hermiticity_error,
                                 std::max(0.0, -d.min_eigenvalue)});
  return bound(worst, 1e-7, "max(trace error, hermiticity error, -lambda_min)");
}

Outcome lindblad_expm_oracle() {
  const HilbertSpec spec{2, 6};
  const double delta = 3.0, j = 1.0, g = 0.05, a = 4.0, rate = 1.5, t = 0.7;
  const OperatorSet ops = build_operators(spec);
  const DenseMatrix h = build_hamiltonian(ops, delta, j, g, a);
  const DenseMatrix L = vectorized_lindbladian(h, ops.d, rate);
  const QuantumState s0 = initial_state(spec, cplx{0.2, 0.1}, cplx{1.0, 0.0}, cplx{0.6, 0.3});
  const int D = spec.dimension();
  const DenseMatrix rho0 = s0.rho;
  const Eigen::VectorXcd v0 = Eigen::Map<const Eigen::VectorXcd>(rho0.data(), D * D);
  const DenseMatrix prop = (L * t).exp();
  const Eigen::VectorXcd v1 = prop * v0;
  const DenseMatrix expected = Eigen::Map<const DenseMatrix>(v1.data(), D, D);
  const EffectiveLindblad lind(spec, delta, j, g, a, rate);
  const QuantumState s1 = lind.evolve(s0, t, StepControl{1e-12, 1e-12});
  const double err = (DenseMatrix(s1.rho) - expected).norm();
  return bound(err, 1e-8, "||rho_stencil - expm(L t) rho0||_F");
}

Outcome spectrum_equilibrium() {
  const Equilibrium e = equilibrium_positions(7, -1, 1, 0.85, 1.0);
  SpectrumProblem prob;
  prob.half_length = 1.0;
  prob.transmission = 0.85;
  prob.x1 = e.x1;
  prob.x2 = e.x2;
  const double res = std::abs(spectrum_residual(e.k, prob));
  const double k = track_root(prob, e.k);
  return bound(std::max(res, std::abs(k - e.k) / e.k), 1e-10,
               "residual and root offset at the analytic equilibrium");
}

Outcome preset_round_trip() {
  std::size_t bad = 0;
  std::string first_bad;
  for (const std::string& name : preset_names()) {
    const RunConfig a = load_preset(name);
    Json doc = {{"task", std::string(task_name(a.task))}, {"parameters", a.parameters}};
    const RunConfig b = parse_config(doc);
    if (b.parameters != a.parameters) {
      ++bad;
      if (first_bad.empty()) first_bad = name;
    }
  }
  if (bad == 0) return {true, std::to_string(preset_names().size()) + " presets re-parse unchanged"};
  return {false, std::to_string(bad) + " presets change on re-parse, first " + first_bad};
}

struct Entry {
  const char* module;
  const char* name;
  std::function<Outcome()> check;
};

}  // namespace

std::vector<ValidationCheck> run_validation_suite(int workers) {
  const std::vector<Entry> entries = {
      {"model_core", "dicke mapping at g_c", dicke_mapping},
      {"model_core", "stationary state is a fixed point", steady_fixed_point},
      {"meanfield", "phonon number conservation", number_conservation},
      {"meanfield", "Z2 equivariance", z2_equivariance},
      {"meanfield", "integrator self-convergence", self_convergence},
      {"dtc", "schedule keeps alpha fixed", schedule_alpha},
      {"dtc", "sweep independent of workers", [workers] { return sweep_determinism(workers); }},
      {"quantum", "trace, hermiticity, positivity", quantum_physicality},
      {"quantum", "stencil evolution vs expm", lindblad_expm_oracle},
      {"spectrum", "analytic equilibrium is a root", spectrum_equilibrium},
      {"cli_io", "preset round trip", preset_round_trip},
  };
  std::vector<ValidationCheck> out;
  for (const Entry& e : entries) {
    ValidationCheck c{e.module, e.name, false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Outcome o = e.check();
      c.passed = o.passed;
      c.detail = o.detail;
    } catch (const std::exception& ex) {
      c.detail = std::string("threw: ") + ex.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(c));
  }
  return out;
}

bool all_passed(const std::vector<ValidationCheck>& checks) {
  for (const ValidationCheck& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

std::string format_validation_table(const std::vector<ValidationCheck>& checks) {
  std::ostringstream s;
  for (const ValidationCheck& c : checks) {
    s << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(11) << c.module
      << std::setw(36) << c.name << std::right << std::fixed << std::setprecision(2)
      << std::setw(7) << c.seconds << " s  " << c.detail << '\n';
  }
  std::size_t passed = 0;
  for (const ValidationCheck& c : checks) passed += c.passed ? 1 : 0;
  s << passed << '/' << checks.size() << " checks passed";
  return s.str();
}

}  // namespace optodtc
