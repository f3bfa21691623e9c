#pragma once

// Mean-field equations of motion for the effective (Dicke-mapped) model and
// the full two-membrane optomechanical model, plus trajectory recording.

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "optodtc/integrator.hpp"
#include "optodtc/model.hpp"

namespace optodtc {

using MeanFieldVector = Eigen::Matrix<cplx, 3, 1>;

/// Membrane amplitudes (b1, b2) and the cavity amplitude: the displaced mode d
/// for the effective model, the drive-frame amplitude a for the full model.
struct MeanFieldState {
  cplx b1{0.0, 0.0};
  cplx b2{0.0, 0.0};
  cplx cav{0.0, 0.0};

  MeanFieldVector vector() const { return {b1, b2, cav}; }
  static MeanFieldState from_vector(const MeanFieldVector& v) { return {v(0), v(1), v(2)}; }

  /// (|b1|^2 - |b2|^2) / 2
  double delta_n() const { return 0.5 * (std::norm(b1) - std::norm(b2)); }
  double total_n() const { return std::norm(b1) + std::norm(b2); }
};

using MeanFieldRhs =
    std::function<void(double t, const MeanFieldVector& y, MeanFieldVector& dydt)>;

/// Coefficients of the effective equations, precomputed from ModelParams.
struct EffectiveModel {
  double delta;
  double kappa;
  double alpha_mod;
  double g1;
  double g2;
  double j_coupling;
  double gamma;

  static EffectiveModel from(const ModelParams& p,
                             std::optional<std::pair<double, double>> g_override = {});
  void operator()(const MeanFieldVector& y, MeanFieldVector& dydt) const;
};

/// Coefficients of the full-model equations in the drive frame (cavity) and
/// lab frame (membranes).
struct FullModel {
  double delta;
  cplx drive;
  double kappa;
  double g1;
  double g2;
  double j_coupling;
  double omega1;
  double omega2;
  double gamma;
  double alpha_sq;

  static FullModel from(const ModelParams& p);
  void operator()(const MeanFieldVector& y, MeanFieldVector& dydt) const;
};

/// d/dt of (b1, b2, d):
///   i b1' =  2 g1 |alpha| (d + d*) b1 - 2J b2 - i gamma b1
///   i b2' = -2 g2 |alpha| (d + d*) b2 - 2J b1 - i gamma b2
///   i d'  = Delta d + 2 |alpha| (g1 |b1|^2 - g2 |b2|^2) - i kappa d
MeanFieldState effective_rhs(const MeanFieldState& state, const ModelParams& params,
                             std::optional<std::pair<double, double>> g_override = {});

/// d/dt of (b1, b2, a) for the full model with frequency-matched omega1, omega2.
MeanFieldState full_rhs(const MeanFieldState& state, const ModelParams& params);

MeanFieldRhs make_effective_rhs(const ModelParams& params,
                                std::optional<std::pair<double, double>> g_override = {});
MeanFieldRhs make_full_rhs(const ModelParams& params);

struct IntegrationControls {
  StepControl step;
  double sample_step = 0.01;

  void validate() const;
};

/// Default full-model controls: the step is capped at 2 pi / (50 omega_m).
IntegrationControls full_model_controls(const ModelParams& params);

struct ObservableSample {
  double delta_n;
  double total_n;
  double cavity_displacement_sq;  ///< |cav - reference|^2
  double re_cav;
  double im_cav;
};

/// Uniformly sampled mean-field time series.
struct Trajectory {
  std::vector<double> times;
  std::vector<MeanFieldState> states;
  /// alpha for full-model trajectories, 0 for the effective model.
  cplx cavity_reference{0.0, 0.0};

  std::size_t size() const { return times.size(); }
  ObservableSample observables(std::size_t i) const;
  void append(const Trajectory& other);
};

/// Adaptive integration from t_span.first to t_span.second with samples every
/// controls.sample_step (the end point is always recorded).
Trajectory integrate(const MeanFieldRhs& rhs, const MeanFieldState& initial,
                     std::pair<double, double> t_span, const IntegrationControls& controls,
                     cplx cavity_reference = {0.0, 0.0});

/// Broken-symmetry mean-field state of the effective model: cavity at the
/// stationary value and membranes on the normal mode rotating at the
/// effective frequency (real b1 > 0 at t = 0).
MeanFieldState broken_symmetry_state(const ModelParams& params, double g, Branch branch);

/// Initial condition b1 = b2 = b0 with cavity at alpha (full model) or at a
/// small symmetry-breaking seed (effective model).
MeanFieldState symmetric_initial_state(cplx b0, cplx cavity);

}  // namespace optodtc
