#pragma once

// Lindblad master equation for the effective Hamiltonian
//   H = Delta d^dag d + 4J Jz + 4 g |alpha| (d + d^dag) Jx
// on a truncated cavity Fock space (x) spin-N/2, with cavity decay at rate Gamma.
//
// Basis ordering: index = n * (N + 1) + s, cavity level n = 0..n_max outer,
// spin index s = m + j (Jz eigenvalue m = -j..j) inner.

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "optodtc/dtc.hpp"
#include "optodtc/integrator.hpp"
#include "optodtc/model.hpp"

namespace optodtc {

using DenseMatrix = Eigen::MatrixXcd;
using DensityMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct HilbertSpec {
  int n_phonon = 10;    ///< N, spin j = N / 2
  int fock_cutoff = 20;  ///< n_max
  std::size_t max_dimension = 20000;

  int spin_dim() const { return n_phonon + 1; }
  int cavity_dim() const { return fock_cutoff + 1; }
  int dimension() const { return spin_dim() * cavity_dim(); }
  void validate() const;
};

struct OperatorSet {
  DenseMatrix d;
  DenseMatrix d_dag;
  DenseMatrix jx;
  DenseMatrix jy;
  DenseMatrix jz;
  DenseMatrix n_cav;
};

OperatorSet build_operators(const HilbertSpec& spec);

DenseMatrix build_hamiltonian(const OperatorSet& ops, double delta, double j_coupling, double g,
                              double alpha_mod);
DenseMatrix build_hamiltonian(const HilbertSpec& spec, double delta, double j_coupling, double g,
                              double alpha_mod);

struct QuantumState {
  DensityMatrix rho;
  double time = 0.0;
};

/// d rho / dt = -i [H, rho] + rate (d rho d^dag - {d^dag d, rho} / 2).
DenseMatrix lindblad_rhs(const DenseMatrix& rho, const DenseMatrix& h, const DenseMatrix& d,
                         double rate);

/// Column-stacking superoperator L with vec(d rho / dt) = L vec(rho).
DenseMatrix vectorized_lindbladian(const DenseMatrix& h, const DenseMatrix& d, double rate);

/// Generic dense evolution over `duration` with adaptive Dormand-Prince;
/// the result is re-symmetrised.
QuantumState lindblad_step(const QuantumState& state, const DenseMatrix& h, const DenseMatrix& d,
                           double rate, double duration, const StepControl& control = {});

/// Evolution under the effective Hamiltonian with constant (Delta, g |alpha|)
/// using banded operator application in the interaction picture of
/// Delta n + 4J Jz. Equivalent to lindblad_step with build_hamiltonian.
class EffectiveLindblad {
 public:
  EffectiveLindblad(const HilbertSpec& spec, double delta, double j_coupling, double g,
                    double alpha_mod, double rate);

  /// Evolve `state` by `duration`, calling on_sample(state) at every
  /// multiple of sample_step strictly inside the interval (0 disables).
  template <class OnSample>
  QuantumState evolve(const QuantumState& state, double duration, const StepControl& control,
                      double sample_step, OnSample&& on_sample) const;
  QuantumState evolve(const QuantumState& state, double duration,
                      const StepControl& control = {}) const;

  /// d rho_I / d tau in the interaction picture at local time tau.
  void interaction_rhs(double tau, const DensityMatrix& rho, DensityMatrix& out) const;
  /// rho_S = U0(tau) rho_I U0(tau)^dag, and its inverse.
  void to_schrodinger(double tau, DensityMatrix& rho) const;
  void to_interaction(double tau, DensityMatrix& rho) const;
  /// Step cap keeping the generator inside the stable part of the
  /// Dormand-Prince region near the imaginary axis; evolve applies it.
  double max_stable_step() const;

 private:
  QuantumState evolve_impl(const QuantumState& state, double duration, const StepControl& control,
                           double sample_step,
                           const std::function<void(const QuantumState&)>& on_sample) const;

  int ns_, nc_;
  double delta_, jc_, coupling_, rate_;
  std::vector<double> jplus_;  ///< <s+1| J+ |s>
  std::vector<double> sqrt_n_;
  std::vector<double> energy_;  ///< diagonal of Delta n + 4J Jz
  double spectral_bound_ = 0.0;
  std::array<std::vector<double>, 4> hop_;  ///< H_I couplings to (n+-1, s+-1)
  std::vector<double> damp_;  ///< -rate n / 2
  std::vector<double> jump_;  ///< sqrt(n + 1) below the cutoff
};

template <class OnSample>
QuantumState EffectiveLindblad::evolve(const QuantumState& state, double duration,
                                       const StepControl& control, double sample_step,
                                       OnSample&& on_sample) const {
  return evolve_impl(state, duration, control, sample_step,
                     [&](const QuantumState& s) { on_sample(s); });
}

struct Observables {
  double time = 0.0;
  cplx d{0.0, 0.0};
  double photons = 0.0;
  double jx = 0.0;
  double jy = 0.0;
  double jz = 0.0;
  double purity = 0.0;
  double trace = 0.0;
};

Observables measure(const HilbertSpec& spec, const QuantumState& state);

struct StateDiagnostics {
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
  double top_level_population = 0.0;  ///< population of the last Fock level
};

/// Trace, Hermiticity and (optionally, O(D^3)) the smallest eigenvalue.
StateDiagnostics diagnose(const QuantumState& state, bool eigenvalues = true);

/// Mass of a coherent state with mean photon number mean_photons beyond n_max.
double coherent_tail(double mean_photons, int n_max);

/// Smallest n_max with coherent_tail < 1e-8, plus `headroom` levels.
int default_fock_cutoff(double mean_photons, int headroom = 10);

/// Coherent cavity state |cavity> (x) spin coherent state along the mean-field
/// spin vector of (b1, b2) from the Schwinger relations
/// Jx = (|b1|^2 - |b2|^2) / 2, Jy = Im(b1* b2), Jz = -Re(b1* b2).
QuantumState initial_state(const HilbertSpec& spec, cplx cavity, cplx b1, cplx b2,
                           double tail_tolerance = 1e-8);
QuantumState initial_state(const HilbertSpec& spec, const MeanFieldState& mean_field,
                           double tail_tolerance = 1e-8);

struct QuantumControls {
  StepControl step{1e-9, 1e-8};
  double sample_step = 0.05;  ///< 0 records stroboscopic samples only
  double rate_factor = 2.0;   ///< Gamma = rate_factor * kappa
  bool check_positivity = true;
  double positivity_tolerance = 1e-7;
};

struct QuantumRun {
  std::vector<Observables> samples;
  std::vector<Observables> stroboscopic;  ///< t = kT, k = 0..n_periods
  std::vector<StateDiagnostics> diagnostics;  ///< at stroboscopic times
  std::vector<std::string> warnings;
  QuantumState final_state;
};

/// Evolve the broken-symmetry initial state through n_periods of the pulse
/// schedule (|alpha| fixed, Delta switching between the phases).
QuantumRun run_quantum_protocol(const HilbertSpec& spec, const PulseSchedule& schedule,
                                const ModelParams& params, long n_periods,
                                const QuantumState& initial, const QuantumControls& controls = {});

struct LifetimeFit {
  double lifetime = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
  std::size_t alternations = 0;
};

/// Log-linear least squares of |x_k| against t_k over the window starting at
/// `first` and ending before the first |x_k| <= floor; lifetime = -1 / slope.
/// The whole series must show at least min_alternations sign changes.
LifetimeFit extract_lifetime(const std::vector<double>& times, const std::vector<double>& values,
                             double floor = 1e-3, std::size_t min_alternations = 10,
                             std::size_t first = 0);

}  // namespace optodtc
