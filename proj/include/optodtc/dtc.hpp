#pragma once

// Period-doubling protocol: two-phase pulse schedule in (detuning, drive) that
// keeps the classical cavity amplitude fixed, flipping-time search,
// stroboscopic analysis, DTC classification and phase diagrams.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "optodtc/meanfield.hpp"
#include "optodtc/model.hpp"

namespace optodtc {

struct PulsePhase {
  double delta;
  cplx drive;
  double duration;
};

/// {(Delta1, A1, t1), (Delta2, A2, t2)}; A1 / (i kappa - Delta1) == A2 / (i kappa - Delta2).
struct PulseSchedule {
  PulsePhase phase1;
  PulsePhase phase2;
  double kappa;

  double period() const { return phase1.duration + phase2.duration; }
  /// alpha seen in phase 1 and phase 2.
  cplx alpha_phase1() const;
  cplx alpha_phase2() const;
  void validate() const;
};

PulseSchedule build_schedule(double delta1, double delta2, cplx drive2, double kappa,
                             double t1, double t2);

/// Phase active at time t >= 0: phase 1 on [kT, kT + t1), phase 2 on [kT + t1, (k+1)T).
const PulsePhase& params_at(const PulseSchedule& schedule, double t);

/// Copy of params with the detuning and drive of one pulse phase.
ModelParams with_phase(const ModelParams& params, const PulsePhase& phase);

struct FlipResult {
  double t1;
  double min_value;  ///< branch * dN at the refined minimum
};

struct FlipSearchControls {
  StepControl step;
  double sample_step = 0.01;
};

/// First local minimum of branch * dN(t) while evolving the effective model
/// with (Delta1, A1) from `initial`; refined by a parabola through the three
/// bracketing samples.
FlipResult find_flipping_time(const ModelParams& params, double delta1, cplx drive1,
                              const MeanFieldState& initial, Branch branch,
                              double search_horizon, const FlipSearchControls& controls = {});
FlipResult find_flipping_time(const ModelParams& params, double delta1, cplx drive1,
                              const SteadyState& initial, double search_horizon,
                              const FlipSearchControls& controls = {});

struct StroboscopicRecord {
  std::vector<long> k;
  std::vector<double> delta_n;  ///< dN at t = kT
  double n_reference = 1.0;     ///< N used to normalise dN(k) / N

  std::size_t size() const { return k.size(); }
  /// sign(dN(k)) != sign(dN(k-1)); the first entry has no predecessor and is false.
  std::vector<bool> alternation_flags() const;
};

/// Largest k whose sample alternates in sign with k-1 while both |dN|/N exceed
/// amplitude_floor; -1 when there is none.
long last_alternating_period(const StroboscopicRecord& record, double amplitude_floor = 1e-3);

struct ProtocolControls {
  StepControl step;
  double sample_step = 0.0;  ///< 0 disables dense trajectory recording
};

struct ProtocolResult {
  Trajectory trajectory;
  StroboscopicRecord record;
};

/// Evolve the effective model under the pulse schedule for n_periods; the
/// integrator restarts at every phase switch. record.k runs 0..n_periods.
ProtocolResult run_protocol(const PulseSchedule& schedule, const ModelParams& params,
                            long n_periods, const MeanFieldState& initial,
                            const ProtocolControls& controls = {});

/// S(theta) = (1/n) sum_{k=1..n} (dN(k)/N) exp(i 2 pi k theta), using the last
/// n entries with k >= 1 of the record.
std::vector<cplx> fourier_spectrum(const StroboscopicRecord& record, std::size_t n,
                                   const std::vector<double>& theta_grid);

struct DtcCriteria {
  std::size_t discard = 10;
  std::size_t window = 40;  ///< 0 uses everything after the discarded periods
  double amplitude_threshold = 0.05;
};

struct DtcVerdict {
  bool is_dtc = false;
  double mean_amplitude = 0.0;       ///< mean |dN(k)| / N over the window
  double alternation_fraction = 0.0;  ///< fraction of consecutive pairs with opposite signs
};

DtcVerdict classify_dtc(const StroboscopicRecord& record, const DtcCriteria& criteria = {});

enum class DiagramAxes { detunings, couplings };
enum class FlipTimeMode { fixed, automatic };

struct PhaseDiagramSetup {
  DiagramAxes axes = DiagramAxes::detunings;
  /// Base parameters: delta/drive are those of phase 2; g1/g2 the reference couplings.
  ModelParams base;
  double delta1 = 100.0;
  double t1 = 1.0;  ///< used when t1_mode == fixed
  double t2 = 100.0;
  FlipTimeMode t1_mode = FlipTimeMode::automatic;
  double flip_search_horizon = 20.0;
  long n_periods = 50;
  DtcCriteria criteria;
  StepControl step;
  /// Axis values: (Delta1, Delta2) or (g1, g2) in absolute units.
  std::vector<double> axis1;
  std::vector<double> axis2;
};

enum class PointStatus { ok, failed };

struct PhasePoint {
  double axis1 = 0.0;
  double axis2 = 0.0;
  PointStatus status = PointStatus::ok;
  DtcVerdict verdict;
  double g_c1 = 0.0;
  double g_c2 = 0.0;
  double t1_used = 0.0;
  std::string message;
};

/// Row-major over (axis1 outer, axis2 inner). Per-point failures are recorded,
/// never thrown.
std::vector<PhasePoint> phase_diagram(const PhaseDiagramSetup& setup, int workers = 1);

/// Evaluate one grid point of a phase diagram.
PhasePoint phase_point(const PhaseDiagramSetup& setup, double axis1, double axis2);

/// T0 = ln(g / g_c2(0)) / gamma; zero when g <= g_c2(0).
double damped_lifetime(double gamma, double g, double gc2_initial);

struct DampedEnvelope {
  cplx d_bar;
  double delta_n_bar;
  double g_c2;
};

/// Adiabatic order parameters with N(t) = n0 exp(-2 gamma t) under fixed
/// phase-2 drive (params.delta, params.drive).
DampedEnvelope damped_envelope(double t, const ModelParams& params, double g, double n0);

}  // namespace optodtc
