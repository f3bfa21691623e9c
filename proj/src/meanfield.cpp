#include "optodtc/meanfield.hpp"

#include <cmath>
#include <numbers>

#include "optodtc/error.hpp"

namespace optodtc {

namespace {

constexpr cplx kI{0.0, 1.0};

}  // namespace

EffectiveModel EffectiveModel::from(const ModelParams& p,
                                    std::optional<std::pair<double, double>> g_override) {
  const auto amp = classical_amplitude(p);
  EffectiveModel m{p.delta, p.kappa, amp.modulus, p.g1, p.g2, p.j_coupling, p.gamma};
  if (g_override) {
    m.g1 = g_override->first;
    m.g2 = g_override->second;
  }
  return m;
}

void EffectiveModel::operator()(const MeanFieldVector& y, MeanFieldVector& dydt) const {
  const cplx b1 = y(0), b2 = y(1), d = y(2);
  const double x = 2.0 * d.real();
  const double c1 = 2.0 * g1 * alpha_mod * x;
  const double c2 = 2.0 * g2 * alpha_mod * x;
  // i y' = F  =>  y' = -i F
  const cplx f1 = c1 * b1 - 2.0 * j_coupling * b2 - kI * gamma * b1;
  const cplx f2 = -c2 * b2 - 2.0 * j_coupling * b1 - kI * gamma * b2;
  const cplx f3 = delta * d + 2.0 * alpha_mod * (g1 * std::norm(b1) - g2 * std::norm(b2)) -
                  kI * kappa * d;
  dydt(0) = -kI * f1;
  dydt(1) = -kI * f2;
  dydt(2) = -kI * f3;
}

FullModel FullModel::from(const ModelParams& p) {
  const auto freqs = membrane_frequencies(p);
  const double a2 = std::norm(classical_amplitude(p).value);
  return {p.delta, p.drive, p.kappa, p.g1, p.g2, p.j_coupling,
          freqs.omega1, freqs.omega2, p.gamma, a2};
}

void FullModel::operator()(const MeanFieldVector& y, MeanFieldVector& dydt) const {
  const cplx b1 = y(0), b2 = y(1), a = y(2);
  const double x1 = 2.0 * b1.real();
  const double x2 = 2.0 * b2.real();
  const double photons = std::norm(a);
  const double spring = 2.0 * j_coupling * (x1 - x2);
  const cplx fa = delta * a + (g1 * x1 * x1 - g2 * x2 * x2) * a + drive - kI * kappa * a;
  const cplx f1 = omega1 * b1 + 2.0 * g1 * photons * x1 + spring - kI * gamma * b1;
  const cplx f2 = omega2 * b2 - 2.0 * g2 * photons * x2 - spring - kI * gamma * b2;
  dydt(0) = -kI * f1;
  dydt(1) = -kI * f2;
  dydt(2) = -kI * fa;
}

MeanFieldState effective_rhs(const MeanFieldState& state, const ModelParams& params,
                             std::optional<std::pair<double, double>> g_override) {
  MeanFieldVector out;
  EffectiveModel::from(params, g_override)(state.vector(), out);
  return MeanFieldState::from_vector(out);
}

MeanFieldState full_rhs(const MeanFieldState& state, const ModelParams& params) {
  MeanFieldVector out;
  FullModel::from(params)(state.vector(), out);
  return MeanFieldState::from_vector(out);
}

MeanFieldRhs make_effective_rhs(const ModelParams& params,
                                std::optional<std::pair<double, double>> g_override) {
  return [m = EffectiveModel::from(params, g_override)](
             double, const MeanFieldVector& y, MeanFieldVector& dydt) { m(y, dydt); };
}

MeanFieldRhs make_full_rhs(const ModelParams& params) {
  return [m = FullModel::from(params)](double, const MeanFieldVector& y,
                                       MeanFieldVector& dydt) { m(y, dydt); };
}

void IntegrationControls::validate() const {
  step.validate();
  require(sample_step > 0.0, "sample_step must be positive");
}

IntegrationControls full_model_controls(const ModelParams& params) {
  IntegrationControls c;
  c.step.max_step = 2.0 * std::numbers::pi / (50.0 * params.omega_m);
  return c;
}

ObservableSample Trajectory::observables(std::size_t i) const {
  const MeanFieldState& s = states.at(i);
  return {s.delta_n(), s.total_n(), std::norm(s.cav - cavity_reference), s.cav.real(),
          s.cav.imag()};
}

void Trajectory::append(const Trajectory& other) {
  std::size_t first = 0;
  if (!times.empty() && !other.times.empty() && other.times.front() <= times.back()) first = 1;
  for (std::size_t i = first; i < other.size(); ++i) {
    times.push_back(other.times[i]);
    states.push_back(other.states[i]);
  }
}

Trajectory integrate(const MeanFieldRhs& rhs, const MeanFieldState& initial,
                     std::pair<double, double> t_span, const IntegrationControls& controls,
                     cplx cavity_reference) {
  controls.validate();
  const auto [t0, t1] = t_span;
  require(t1 > t0, "integration interval must be non-empty");
  Trajectory traj;
  traj.cavity_reference = cavity_reference;

  DormandPrince5<MeanFieldVector> solver(rhs, controls.step);
  solver.reset(t0, initial.vector());
  traj.times.push_back(t0);
  traj.states.push_back(initial);

  const double dt = controls.sample_step;
  long next = 1;
  auto next_time = [&] { return t0 + static_cast<double>(next) * dt; };
  solver.advance(t1, [&](const DormandPrince5<MeanFieldVector>& s) {
    while (next_time() <= s.time() && next_time() < t1 - 1e-9 * dt) {
      traj.times.push_back(next_time());
      traj.states.push_back(MeanFieldState::from_vector(s.dense(next_time())));
      ++next;
    }
  });
  traj.times.push_back(t1);
  traj.states.push_back(MeanFieldState::from_vector(solver.state()));
  return traj;
}

MeanFieldState broken_symmetry_state(const ModelParams& params, double g, Branch branch) {
  const SteadyState ss = steady_state(params, g, branch);
  const double alpha_mod = classical_amplitude(params).modulus;
  const cplx d = ss.cavity();
  const double y = 2.0 * d.real();
  const double omega = normal_mode_frequency(y, g, alpha_mod, params.j_coupling);
  const ModeAmplitudes m =
      mode_amplitudes(d, omega, g, alpha_mod, params.j_coupling, params.n_phonon);
  const double b1 = std::sqrt(m.beta1_sq);
  // beta2 = (omega + 2 g |alpha| y) beta1 / (2J)
  const double b2 = (omega + 2.0 * g * alpha_mod * y) / (2.0 * params.j_coupling) * b1;
  return {cplx{b1, 0.0}, cplx{b2, 0.0}, d};
}

MeanFieldState symmetric_initial_state(cplx b0, cplx cavity) { return {b0, b0, cavity}; }

}  // namespace optodtc
