#pragma once

// Typed run plans built from a validated parameter document.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "optodtc/cli_io.hpp"
#include "optodtc/dtc.hpp"
#include "optodtc/meanfield.hpp"
#include "optodtc/model.hpp"
#include "optodtc/quantum.hpp"
#include "optodtc/spectrum.hpp"

namespace optodtc::detail {

enum class InitialKind { symmetric, broken };

struct InitialSpec {
  InitialKind kind = InitialKind::symmetric;
  Branch branch = Branch::plus;
  cplx b0{10.0, 0.0};
  double symmetry_seed = -1e-6;
  std::optional<cplx> cavity;
};

struct SteadyPlan {
  ModelParams model;
};

struct DynamicsPlan {
  bool full = false;
  ModelParams model;
  InitialSpec initial;
  StepControl step;
  bool default_max_step = true;
  double sample_step = 0.05;
  double t_final = 80.0;
  std::vector<double> omega_m_over_nj;  ///< comparison runs; empty for a single run
  double average_fraction = 0.2;
};

struct TransitionPlan {
  bool full = false;
  ModelParams model;  ///< without coupling
  std::vector<double> g_over_gc;
  InitialSpec initial;
  StepControl step;
  bool default_max_step = true;
  double t_final = 80.0;
};

struct ScheduleSpec {
  double delta1 = 100.0;
  std::optional<double> t1;  ///< empty: first minimum of branch * dN
  double t2 = 100.0;
  double flip_search_horizon = 20.0;
};

struct DtcPlan {
  ModelParams model;  ///< phase-2 detuning and drive
  ScheduleSpec schedule;
  InitialSpec initial;
  long n_periods = 50;
  DtcCriteria criteria;
  std::size_t fourier_periods = 0;  ///< 0: all periods
  std::size_t fourier_bins = 1001;
  StepControl step;
  double sample_step = 0.0;
  double envelope_floor = 1e-3;
};

struct DiagramPlan {
  PhaseDiagramSetup setup;
  bool relative_couplings = true;  ///< couplings axes in units of the base g
  double g_reference = 0.0;
  std::vector<double> axis1_input;
  std::vector<double> axis2_input;
};

struct QuantumSpec {
  std::optional<int> fock_cutoff;
  int headroom = 10;
  QuantumControls controls;
};

struct QuantumPlan {
  ModelParams model;
  ScheduleSpec schedule;
  long n_periods = 4;
  QuantumSpec quantum;
};

struct LifetimePlan {
  ModelParams model;  ///< n_phonon replaced per run
  ScheduleSpec schedule;
  QuantumSpec quantum;
  std::vector<int> n_values;
  std::vector<long> periods;
  double coupling_over_gc2 = 1.5;
  double floor = 1e-3;
  std::size_t min_alternations = 10;
  std::size_t first = 1;
};

struct GeometrySpec {
  SpectrumProblem problem;
  std::optional<Equilibrium> equilibrium;
  std::optional<int> m0, m1, m2;
};

struct SpectrumSolvePlan {
  GeometrySpec geometry;
  double k_lo = 0.0;
  double k_hi = 0.0;
  RootControls roots;
  double derivative_step = 0.0;
  std::vector<double> slice_dx;  ///< single-membrane displacements; empty disables
};

struct SpectrumScanPlan {
  GeometrySpec geometry;
  std::optional<double> branch_seed;
  std::vector<double> dx1;
  std::vector<double> dx2;
  double fit_radius = 1e-3;
  double derivative_step = 0.0;
};

struct ValidatePlan {};

using Plan = std::variant<SteadyPlan, DynamicsPlan, TransitionPlan, DtcPlan, DiagramPlan,
                          QuantumPlan, LifetimePlan, SpectrumSolvePlan, SpectrumScanPlan,
                          ValidatePlan>;

/// Builds the plan and fills `resolved` with every parameter actually used.
/// Throws ConfigError.
Plan build_plan(Task task, const Json& parameters, Json& resolved);

/// Mean-field initial state for the effective (full = false) or full model.
MeanFieldState make_initial(const InitialSpec& spec, const ModelParams& model, bool full);

}  // namespace optodtc::detail
