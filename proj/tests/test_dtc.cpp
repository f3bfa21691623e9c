#include <cmath>
#include <numbers>

#include <doctest.h>

#include "optodtc/dtc.hpp"
#include "optodtc/error.hpp"

using namespace optodtc;
using doctest::Approx;

namespace {

// strong-drive protocol: delta1 100, delta2 50, A2 1e4, kappa 10, N 200
ModelParams strong(double ratio = 1.2) {
  ModelParams p;
  p.delta = 50.0;
  p.drive = 1e4;
  p.kappa = 10.0;
  p.n_phonon = 200.0;
  return p.with_coupling(ratio * critical_coupling(p));
}

StroboscopicRecord alternating(double amp, std::size_t n) {
  StroboscopicRecord r;
  r.n_reference = 1.0;
  for (std::size_t k = 0; k <= n; ++k) {
    r.k.push_back(static_cast<long>(k));
    r.delta_n.push_back(k % 2 ? -amp : amp);
  }
  return r;
}

}  // namespace

TEST_CASE("schedule keeps the classical amplitude") {
  const PulseSchedule s = build_schedule(100.0, 50.0, 1e4, 10.0, 1.196, 100.0);
  CHECK(std::abs(s.phase1.drive) == Approx(19709.427654336857).epsilon(1e-13));
  CHECK(std::abs(s.alpha_phase1() - s.alpha_phase2()) < 1e-12 * std::abs(s.alpha_phase2()));
  CHECK(s.period() == Approx(101.196));
  CHECK_THROWS_AS(build_schedule(100.0, 50.0, 1e4, 10.0, -1.0, 100.0), InvalidArgument);
  CHECK_THROWS_AS(build_schedule(-100.0, 50.0, 1e4, 10.0, 1.0, 100.0), InvalidArgument);
}

TEST_CASE("phase lookup uses left-closed intervals") {
  const PulseSchedule s = build_schedule(100.0, 50.0, 1e4, 10.0, 1.0, 3.0);
  CHECK(params_at(s, 0.0).delta == 100.0);
  CHECK(params_at(s, 0.999).delta == 100.0);
  CHECK(params_at(s, 1.0).delta == 50.0);
  CHECK(params_at(s, 3.999).delta == 50.0);
  CHECK(params_at(s, 4.0).delta == 100.0);
  CHECK(params_at(s, 5.5).delta == 50.0);
  CHECK_THROWS_AS(params_at(s, -0.1), InvalidArgument);
  const ModelParams m = with_phase(strong(), s.phase1);
  CHECK(m.delta == 100.0);
  CHECK(m.drive == s.phase1.drive);
}

TEST_CASE("flipping time of the strong-drive protocol") {
  const ModelParams p = strong();
  const PulseSchedule probe = build_schedule(100.0, 50.0, 1e4, 10.0, 1.0, 100.0);
  const SteadyState s = steady_state(p, p.g(), Branch::plus);
  const FlipResult f = find_flipping_time(p, 100.0, probe.phase1.drive, s, 20.0);
  CHECK(f.t1 == Approx(1.196).epsilon(0.01));
  CHECK(f.min_value < 0.0);
}

TEST_CASE("period doubling and its absence") {
  const ModelParams p = strong();
  const PulseSchedule s = build_schedule(100.0, 50.0, 1e4, 10.0, 1.196, 100.0);
  const MeanFieldState init = broken_symmetry_state(p, p.g(), Branch::plus);
  const ProtocolResult r = run_protocol(s, p, 8, init);
  REQUIRE(r.record.size() == 9);
  const std::vector<bool> alt = r.record.alternation_flags();
  CHECK_FALSE(alt[0]);
  for (std::size_t k = 1; k < alt.size(); ++k) CHECK(alt[k]);
  CHECK(r.record.n_reference == 200.0);

  DtcCriteria c;
  c.discard = 0;
  c.window = 0;
  CHECK(classify_dtc(r.record, c).is_dtc);

  const ModelParams weak = strong(0.5);
  const ProtocolResult w = run_protocol(s, weak, 8, broken_symmetry_state(p, p.g(), Branch::plus));
  CHECK(std::abs(w.record.delta_n.back()) / 200.0 < 1e-3);
  c.discard = 2;
  CHECK_FALSE(classify_dtc(w.record, c).is_dtc);
}

TEST_CASE("classification") {
  DtcCriteria c;
  c.discard = 0;
  c.window = 0;
  const DtcVerdict v = classify_dtc(alternating(0.36, 50), c);
  CHECK(v.is_dtc);
  CHECK(v.mean_amplitude == Approx(0.36));
  CHECK(v.alternation_fraction == 1.0);
  CHECK_FALSE(classify_dtc(alternating(0.01, 50), c).is_dtc);
  StroboscopicRecord flat = alternating(0.3, 50);
  for (double& x : flat.delta_n) x = std::abs(x);
  CHECK_FALSE(classify_dtc(flat, c).is_dtc);
  c.discard = 60;
  CHECK_THROWS_AS(classify_dtc(alternating(0.3, 50), c), InvalidArgument);
}

TEST_CASE("fourier spectrum of an alternating record") {
  const StroboscopicRecord r = alternating(0.36, 100);
  const std::vector<cplx> s = fourier_spectrum(r, 100, {0.0, 0.25, 0.5, 0.51});
  CHECK(std::abs(s[2]) == Approx(0.36));
  CHECK(std::abs(s[0]) < 1e-14);
  CHECK(std::abs(s[1]) < 1e-14);
  CHECK(std::abs(s[3]) < std::abs(s[2]));
  CHECK_THROWS_AS(fourier_spectrum(r, 101, {0.5}), InvalidArgument);
}

TEST_CASE("last alternating period") {
  StroboscopicRecord r = alternating(0.2, 20);
  CHECK(last_alternating_period(r, 1e-3) == 20);
  r.delta_n[15] = 1e-5;
  for (std::size_t k = 16; k < r.size(); ++k) r.delta_n[k] = 1e-5 * (k % 2 ? -1 : 1);
  CHECK(last_alternating_period(r, 1e-3) == 14);
  for (double& x : r.delta_n) x = std::abs(x);
  CHECK(last_alternating_period(r, 1e-3) == -1);
}

TEST_CASE("damped lifetime and envelope") {
  CHECK(damped_lifetime(1e-3, 1.7, 1.0) == Approx(530.62825106217040).epsilon(1e-14));
  CHECK(damped_lifetime(1e-3, 0.9, 1.0) == 0.0);
  CHECK_THROWS_AS(damped_lifetime(0.0, 1.7, 1.0), InvalidArgument);

  ModelParams p;
  p.delta = 20.0;
  p.drive = 2000.0;
  p.kappa = 10.0;
  p.gamma = 1e-3;
  p.n_phonon = 200.0;
  const double gc0 = critical_coupling(p);
  p = p.with_coupling(1.7 * gc0);
  const DampedEnvelope e0 = damped_envelope(0.0, p, p.g(), 200.0);
  CHECK(e0.g_c2 == Approx(gc0));
  CHECK(e0.delta_n_bar == Approx(steady_state(p, p.g(), Branch::plus).delta_n_bar));
  const double t0 = damped_lifetime(p.gamma, p.g(), gc0);
  CHECK(damped_envelope(1.01 * t0, p, p.g(), 200.0).delta_n_bar == 0.0);
  CHECK(damped_envelope(0.5 * t0, p, p.g(), 200.0).g_c2 == Approx(gc0 * std::exp(0.5 * p.gamma * t0)));
}

TEST_CASE("damped protocol follows the adiabatic envelope") {
  ModelParams p;
  p.delta = 20.0;
  p.drive = 2000.0;
  p.kappa = 10.0;
  p.gamma = 1e-3;
  p.n_phonon = 200.0;
  p = p.with_coupling(1.7 * critical_coupling(p));
  const PulseSchedule s = build_schedule(80.0, 20.0, 2000.0, 10.0, 0.97, 6.0);
  const double t0 = damped_lifetime(p.gamma, p.g(), critical_coupling(p));
  const long k = std::lround(0.5 * t0 / s.period());
  const ProtocolResult r = run_protocol(s, p, k, broken_symmetry_state(p, p.g(), Branch::plus));
  const double t = static_cast<double>(k) * s.period();
  const double env = damped_envelope(t, p, p.g(), p.n_phonon).delta_n_bar;
  CHECK(std::abs(std::abs(r.record.delta_n.back()) - env) / env < 0.05);
}

TEST_CASE("phase diagram matches single points and isolates failures") {
  PhaseDiagramSetup st;
  st.base = strong();
  st.delta1 = 100.0;
  st.t1_mode = FlipTimeMode::fixed;
  st.t1 = 1.196;
  st.t2 = 30.0;
  st.n_periods = 6;
  st.criteria.discard = 1;
  st.criteria.window = 0;
  st.axes = DiagramAxes::detunings;
  st.axis1 = {100.0, -5.0};
  st.axis2 = {50.0};
  const std::vector<PhasePoint> pts = phase_diagram(st, 2);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].status == PointStatus::ok);
  CHECK(pts[1].status == PointStatus::failed);
  CHECK_FALSE(pts[1].message.empty());
  const PhasePoint direct = phase_point(st, 100.0, 50.0);
  CHECK(direct.verdict.mean_amplitude == pts[0].verdict.mean_amplitude);
  CHECK(direct.verdict.is_dtc == pts[0].verdict.is_dtc);
  CHECK(pts[0].g_c2 == Approx(critical_coupling(st.base)));

  st.axis1 = {};
  CHECK_THROWS_AS(phase_diagram(st, 1), InvalidArgument);
}
