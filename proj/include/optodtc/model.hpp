#pragma once

// Parameter types and closed-form results of the two-membrane optomechanical
// model and its open-Dicke mapping. Frequencies and rates are in units of the
// membrane coupling J (J = 1 in all presets), times in units of 1/J.

#include <complex>

namespace optodtc {

using cplx = std::complex<double>;

/// Physical parameters of the full / effective model. Derived quantities
/// (alpha, omega_1, omega_2, g_c) are computed on demand, never stored.
struct ModelParams {
  double delta = 20.0;         ///< cavity detuning omega_c - omega_D (> 0)
  cplx drive = 2000.0;         ///< drive amplitude A; complex to carry a phase
  double kappa = 10.0;         ///< cavity decay
  double g1 = 0.0;             ///< second-order coupling of membrane 1
  double g2 = 0.0;             ///< second-order coupling of membrane 2 (enters with a minus sign)
  double j_coupling = 1.0;     ///< direct membrane-membrane coupling J
  double omega_m = 1.0e4;      ///< matched effective mechanical frequency
  double gamma = 0.0;          ///< membrane decay
  double n_phonon = 200.0;     ///< total phonon number N (continuous in mean field)

  /// Throws InvalidArgument naming the first violated constraint.
  void validate() const;

  bool symmetric() const { return g1 == g2; }

  /// The common coupling g of the symmetric case; throws when g1 != g2.
  double g() const;

  /// Copy with both couplings set to g.
  ModelParams with_coupling(double g) const;
};

struct ClassicalAmplitude {
  cplx value;
  double modulus;
  double phase;
};

/// alpha = A / (i kappa - Delta).
ClassicalAmplitude classical_amplitude(cplx drive, double delta, double kappa);
ClassicalAmplitude classical_amplitude(const ModelParams& p);

/// A = sqrt(2 P_L kappa / omega_c).
double amplitude_from_power(double power, double kappa, double omega_c);

struct MembraneFrequencies {
  double omega1;
  double omega2;
};

/// Bare membrane frequencies that bring both dressed frequencies to omega_m:
/// omega1 = omega_m - 2J - 2 g1 |alpha|^2, omega2 = omega_m - 2J + 2 g2 |alpha|^2.
MembraneFrequencies membrane_frequencies(const ModelParams& p);

/// Open Dicke model parameters: H = omega0 c^dag c + omegaz Jz + 2 lambda/sqrt(Na) (c + c^dag) Jx.
struct DickeParams {
  double omega0;
  double omegaz;
  double lambda;
  double n_atoms;
};

DickeParams dicke_params(const ModelParams& p);

/// lambda_c = sqrt((omega0^2 + kappa^2) omegaz / (4 omega0)).
double critical_coupling_dicke(const DickeParams& dicke, double kappa);

/// g_c = sqrt((Delta^2 + kappa^2) J / (4 |alpha|^2 N Delta)).
double critical_coupling(const ModelParams& p);
double critical_coupling(double delta, double kappa, double alpha_sq, double n_phonon,
                         double j_coupling);

enum class Branch : int { plus = 1, minus = -1 };

inline double sign_of(Branch b) { return static_cast<double>(static_cast<int>(b)); }

/// One of the two broken-symmetry stationary states.
///
/// d_bar and delta_n_bar carry the branch sign: the state labelled `plus` has
/// phonon imbalance +|dN| and cavity at alpha - |d_bar|, i.e. the mean-field
/// amplitude of the displaced cavity mode is `cavity() == -d_bar`.
struct SteadyState {
  cplx d_bar{0.0, 0.0};
  double delta_n_bar = 0.0;
  Branch branch = Branch::plus;

  cplx cavity() const { return -d_bar; }
};

/// Stationary order parameters for symmetric coupling g.
SteadyState steady_state(const ModelParams& p, double g, Branch branch);

/// Rotating-frame frequency of the membrane normal mode:
/// 2J for g <= g_c, 2J g^2 / g_c^2 above threshold.
double effective_frequency(double g, double g_c, double j_coupling);

/// Normal-mode frequency for a given cavity quadrature sum y = d + d*:
/// omega = sqrt(4 g^2 |alpha|^2 y^2 + 4 J^2) (positive root).
double normal_mode_frequency(double displacement_sum, double g, double alpha_mod,
                             double j_coupling);

struct ModeAmplitudes {
  double beta1_sq;
  double beta2_sq;
};

/// Stationary membrane populations for cavity amplitude d rotating at omega.
/// The pair always sums to N.
ModeAmplitudes mode_amplitudes(cplx d, double omega, const ModelParams& p);
ModeAmplitudes mode_amplitudes(cplx d, double omega, double g, double alpha_mod,
                               double j_coupling, double n_phonon);

/// Effective potential of the cavity quadrature x = (d + d*)/sqrt(2) after
/// adiabatic elimination of the membranes:
/// V(x) = (Delta^2 + kappa^2) x^2 / 2 - 2 Delta N sqrt(J^2 + 2 |alpha|^2 g^2 x^2).
double effective_potential(double x, const ModelParams& p, double g);
double effective_potential_derivative(double x, const ModelParams& p, double g);

}  // namespace optodtc
