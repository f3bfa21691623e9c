#include "optodtc/dtc.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "optodtc/error.hpp"
#include "optodtc/sweep.hpp"

namespace optodtc {

namespace {

constexpr cplx kI{0.0, 1.0};

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

cplx PulseSchedule::alpha_phase1() const { return phase1.drive / (kI * kappa - phase1.delta); }
cplx PulseSchedule::alpha_phase2() const { return phase2.drive / (kI * kappa - phase2.delta); }

void PulseSchedule::validate() const {
  require(std::isfinite(phase1.delta) && std::isfinite(phase2.delta), "detunings must be finite");
  require(phase1.duration > 0.0 && phase2.duration > 0.0, "pulse durations must be positive");
  require(phase1.delta > 0.0 && phase2.delta > 0.0, "detunings must be positive");
  require(kappa >= 0.0, "kappa must be non-negative");
  const cplx a1 = alpha_phase1(), a2 = alpha_phase2();
  require(std::abs(a1 - a2) <= 1e-9 * std::max(1.0, std::abs(a2)),
          "pulse phases do not share the same classical amplitude");
}

PulseSchedule build_schedule(double delta1, double delta2, cplx drive2, double kappa, double t1,
                             double t2) {
  require(kappa >= 0.0, "kappa must be non-negative");
  require(delta1 > 0.0 && delta2 > 0.0, "detunings must be positive");
  require(t1 > 0.0 && t2 > 0.0, "pulse durations must be positive");
  const cplx drive1 = drive2 * (kI * kappa - delta1) / (kI * kappa - delta2);
  PulseSchedule s{{delta1, drive1, t1}, {delta2, drive2, t2}, kappa};
  s.validate();
  return s;
}

const PulsePhase& params_at(const PulseSchedule& schedule, double t) {
  require(t >= 0.0, "time must be non-negative");
  const double period = schedule.period();
  const double local = t - std::floor(t / period) * period;
  return local < schedule.phase1.duration ? schedule.phase1 : schedule.phase2;
}

ModelParams with_phase(const ModelParams& params, const PulsePhase& phase) {
  ModelParams p = params;
  p.delta = phase.delta;
  p.drive = phase.drive;
  return p;
}

FlipResult find_flipping_time(const ModelParams& params, double delta1, cplx drive1,
                              const MeanFieldState& initial, Branch branch,
                              double search_horizon, const FlipSearchControls& controls) {
  require(search_horizon > 0.0, "search horizon must be positive");
  require(controls.sample_step > 0.0, "sample_step must be positive");
  ModelParams p = params;
  p.delta = delta1;
  p.drive = drive1;
  p.validate();

  const double s = sign_of(branch);
  const double dt = controls.sample_step;
  DormandPrince5<MeanFieldVector> solver(make_effective_rhs(p), controls.step);
  solver.reset(0.0, initial.vector());

  double y0 = s * initial.delta_n();
  double y1 = y0;
  long count = 1;
  long next = 1;
  std::optional<FlipResult> found;

  solver.advance(search_horizon, [&](const DormandPrince5<MeanFieldVector>& st) {
    while (static_cast<double>(next) * dt <= st.time()) {
      const double t = static_cast<double>(next) * dt;
      const double y2 = s * MeanFieldState::from_vector(st.dense(t)).delta_n();
      if (count >= 2 && y1 < y0 && y1 <= y2) {
        const double curv = y0 - 2.0 * y1 + y2;
        double shift = 0.0, vmin = y1;
        if (curv > 0.0) {
          shift = 0.5 * (y0 - y2) / curv;
          vmin = y1 - (y0 - y2) * (y0 - y2) / (8.0 * curv);
        }
        found = FlipResult{t - dt + shift * dt, vmin};
        return false;
      }
      y0 = y1;
      y1 = y2;
      ++count;
      ++next;
    }
    return true;
  });
  if (!found) {
    std::ostringstream msg;
    msg << "no local minimum of the phonon imbalance within t < " << search_horizon;
    throw NumericalFailure(msg.str(), solver.time());
  }
  return *found;
}

FlipResult find_flipping_time(const ModelParams& params, double delta1, cplx drive1,
                              const SteadyState& initial, double search_horizon,
                              const FlipSearchControls& controls) {
  const MeanFieldState state = broken_symmetry_state(params, params.g(), initial.branch);
  return find_flipping_time(params, delta1, drive1, state, initial.branch, search_horizon,
                            controls);
}

std::vector<bool> StroboscopicRecord::alternation_flags() const {
  std::vector<bool> flags(delta_n.size(), false);
  for (std::size_t i = 1; i < delta_n.size(); ++i) {
    flags[i] = sign(delta_n[i]) * sign(delta_n[i - 1]) < 0.0;
  }
  return flags;
}

long last_alternating_period(const StroboscopicRecord& record, double amplitude_floor) {
  require(amplitude_floor >= 0.0, "amplitude floor must be non-negative");
  const double floor_abs = amplitude_floor * record.n_reference;
  long last = -1;
  for (std::size_t i = 1; i < record.size(); ++i) {
    const double a = record.delta_n[i - 1], b = record.delta_n[i];
    if (sign(a) * sign(b) < 0.0 && std::abs(a) > floor_abs && std::abs(b) > floor_abs) {
      last = record.k[i];
    }
  }
  return last;
}

ProtocolResult run_protocol(const PulseSchedule& schedule, const ModelParams& params,
                            long n_periods, const MeanFieldState& initial,
                            const ProtocolControls& controls) {
  schedule.validate();
  require(n_periods >= 1, "n_periods must be at least 1");
  require(controls.sample_step >= 0.0, "sample_step must be non-negative");
  const ModelParams p1 = with_phase(params, schedule.phase1);
  const ModelParams p2 = with_phase(params, schedule.phase2);
  p1.validate();
  p2.validate();
  const MeanFieldRhs rhs1 = make_effective_rhs(p1);
  const MeanFieldRhs rhs2 = make_effective_rhs(p2);

  ProtocolResult out;
  out.record.n_reference = params.n_phonon;
  out.record.k.push_back(0);
  out.record.delta_n.push_back(initial.delta_n());

  const bool dense = controls.sample_step > 0.0;
  if (dense) {
    out.trajectory.times.push_back(0.0);
    out.trajectory.states.push_back(initial);
  }
  const double period = schedule.period();
  const double dt = controls.sample_step;
  long next_sample = 1;

  DormandPrince5<MeanFieldVector> solver1(rhs1, controls.step);
  DormandPrince5<MeanFieldVector> solver2(rhs2, controls.step);
  auto recorder = [&](const DormandPrince5<MeanFieldVector>& st) {
    while (static_cast<double>(next_sample) * dt < st.time()) {
      const double t = static_cast<double>(next_sample) * dt;
      out.trajectory.times.push_back(t);
      out.trajectory.states.push_back(MeanFieldState::from_vector(st.dense(t)));
      ++next_sample;
    }
  };

  MeanFieldVector y = initial.vector();
  for (long k = 0; k < n_periods; ++k) {
    const double t0 = static_cast<double>(k) * period;
    const double t_switch = t0 + schedule.phase1.duration;
    const double t_end = static_cast<double>(k + 1) * period;

    solver1.reset(t0, y);
    if (dense) solver1.advance(t_switch, recorder); else solver1.advance(t_switch);
    y = solver1.state();

    solver2.reset(t_switch, y);
    if (dense) solver2.advance(t_end, recorder); else solver2.advance(t_end);
    y = solver2.state();

    const MeanFieldState s = MeanFieldState::from_vector(y);
    out.record.k.push_back(k + 1);
    out.record.delta_n.push_back(s.delta_n());
    if (dense) {
      if (std::abs(static_cast<double>(next_sample) * dt - t_end) <= 1e-9 * dt) ++next_sample;
      out.trajectory.times.push_back(t_end);
      out.trajectory.states.push_back(s);
    }
  }
  return out;
}

std::vector<cplx> fourier_spectrum(const StroboscopicRecord& record, std::size_t n,
                                   const std::vector<double>& theta_grid) {
  require(n >= 1, "spectrum needs at least one period");
  require(record.n_reference > 0.0, "record reference N must be positive");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < record.size(); ++i) {
    if (record.k[i] >= 1) idx.push_back(i);
  }
  require(idx.size() >= n, "record is shorter than the requested number of periods");
  idx.erase(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n));

  std::vector<cplx> out;
  out.reserve(theta_grid.size());
  const double two_pi = 2.0 * std::numbers::pi;
  for (double theta : theta_grid) {
    cplx acc{0.0, 0.0};
    for (std::size_t i : idx) {
      // reduce k*theta mod 1 before the exponential to keep the phase accurate
      const double arg = static_cast<double>(record.k[i]) * theta;
      const double frac = arg - std::floor(arg);
      acc += (record.delta_n[i] / record.n_reference) * std::polar(1.0, two_pi * frac);
    }
    out.push_back(acc / static_cast<double>(n));
  }
  return out;
}

DtcVerdict classify_dtc(const StroboscopicRecord& record, const DtcCriteria& criteria) {
  require(criteria.amplitude_threshold >= 0.0, "amplitude threshold must be non-negative");
  require(record.n_reference > 0.0, "record reference N must be positive");
  require(record.size() >= criteria.discard + 2,
          "record too short for the requested number of discarded periods");
  const std::size_t begin = criteria.discard;
  std::size_t end = record.size();
  if (criteria.window > 0) end = std::min(end, begin + criteria.window);
  require(end - begin >= 2, "classification window needs at least two periods");

  DtcVerdict v;
  double amp = 0.0;
  for (std::size_t i = begin; i < end; ++i) amp += std::abs(record.delta_n[i]);
  v.mean_amplitude = amp / static_cast<double>(end - begin) / record.n_reference;

  std::size_t alternating = 0;
  for (std::size_t i = begin + 1; i < end; ++i) {
    if (sign(record.delta_n[i]) * sign(record.delta_n[i - 1]) < 0.0) ++alternating;
  }
  v.alternation_fraction = static_cast<double>(alternating) / static_cast<double>(end - begin - 1);
  v.is_dtc = alternating == end - begin - 1 && v.mean_amplitude >= criteria.amplitude_threshold;
  return v;
}

PhasePoint phase_point(const PhaseDiagramSetup& setup, double axis1, double axis2) {
  PhasePoint pt;
  pt.axis1 = axis1;
  pt.axis2 = axis2;

  ModelParams p2 = setup.base;
  double delta1 = setup.delta1;
  const double g_ref = setup.base.g1;
  if (setup.axes == DiagramAxes::detunings) {
    delta1 = axis1;
    p2.delta = axis2;
  } else {
    p2.g1 = axis1;
    p2.g2 = axis2;
  }

  try {
    p2.validate();
    const PulseSchedule probe = build_schedule(delta1, p2.delta, p2.drive, p2.kappa, 1.0,
                                               setup.t2);
    const double alpha_sq = std::norm(classical_amplitude(p2).value);
    pt.g_c1 = critical_coupling(delta1, p2.kappa, alpha_sq, p2.n_phonon, p2.j_coupling);
    pt.g_c2 = critical_coupling(p2.delta, p2.kappa, alpha_sq, p2.n_phonon, p2.j_coupling);

    // Below threshold there is no ordered state to start from; use the
    // ordered state of a coupling slightly above g_c2 instead.
    const ModelParams ref = p2.with_coupling(g_ref);
    const double g_init = g_ref > pt.g_c2 ? g_ref : 1.2 * pt.g_c2;
    const MeanFieldState initial = broken_symmetry_state(ref, g_init, Branch::plus);

    double t1 = setup.t1;
    if (setup.t1_mode == FlipTimeMode::automatic) {
      FlipSearchControls fc;
      fc.step = setup.step;
      t1 = find_flipping_time(p2, delta1, probe.phase1.drive, initial, Branch::plus,
                              setup.flip_search_horizon, fc)
               .t1;
    }
    pt.t1_used = t1;
    const PulseSchedule schedule =
        build_schedule(delta1, p2.delta, p2.drive, p2.kappa, t1, setup.t2);
    ProtocolControls pc;
    pc.step = setup.step;
    const ProtocolResult res = run_protocol(schedule, p2, setup.n_periods, initial, pc);
    pt.verdict = classify_dtc(res.record, setup.criteria);
  } catch (const std::exception& e) {
    pt.status = PointStatus::failed;
    pt.message = e.what();
  }
  return pt;
}

std::vector<PhasePoint> phase_diagram(const PhaseDiagramSetup& setup, int workers) {
  require(!setup.axis1.empty() && !setup.axis2.empty(), "phase diagram axes must be non-empty");
  require(setup.n_periods >= 1, "n_periods must be at least 1");
  require(setup.t2 > 0.0, "t2 must be positive");
  if (setup.t1_mode == FlipTimeMode::fixed) require(setup.t1 > 0.0, "t1 must be positive");
  setup.step.validate();

  std::vector<std::pair<double, double>> grid;
  grid.reserve(setup.axis1.size() * setup.axis2.size());
  for (double a : setup.axis1) {
    for (double b : setup.axis2) grid.emplace_back(a, b);
  }
  auto outcomes = sweep(
      grid, [&](const std::pair<double, double>& ab) { return phase_point(setup, ab.first, ab.second); },
      workers);
  std::vector<PhasePoint> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (outcomes[i].ok()) {
      out.push_back(*outcomes[i].value);
    } else {
      PhasePoint pt;
      pt.axis1 = grid[i].first;
      pt.axis2 = grid[i].second;
      pt.status = PointStatus::failed;
      pt.message = outcomes[i].error;
      out.push_back(pt);
    }
  }
  return out;
}

double damped_lifetime(double gamma, double g, double gc2_initial) {
  require(gamma > 0.0, "gamma must be positive");
  require(gc2_initial > 0.0, "initial critical coupling must be positive");
  require(g >= 0.0, "coupling must be non-negative");
  if (g <= gc2_initial) return 0.0;
  return std::log(g / gc2_initial) / gamma;
}

DampedEnvelope damped_envelope(double t, const ModelParams& params, double g, double n0) {
  require(t >= 0.0, "time must be non-negative");
  require(n0 > 0.0, "initial phonon number must be positive");
  require(params.gamma >= 0.0, "gamma must be non-negative");
  const ClassicalAmplitude amp = classical_amplitude(params);
  const double gc0 = critical_coupling(params.delta, params.kappa, amp.modulus * amp.modulus, n0,
                                       params.j_coupling);
  DampedEnvelope env{{0.0, 0.0}, 0.0, gc0 * std::exp(params.gamma * t)};
  const double n_t = n0 * std::exp(-2.0 * params.gamma * t);
  if (g <= env.g_c2) return env;
  const double r = env.g_c2 / g;
  const double root = std::sqrt(1.0 - r * r * r * r);
  env.d_bar = 2.0 * g * amp.modulus * n_t / cplx(params.delta, -params.kappa) * root;
  env.delta_n_bar = 0.5 * n_t * root;
  return env;
}

}  // namespace optodtc
