#include "optodtc/model.hpp"

#include <cmath>
#include <string>

#include "optodtc/error.hpp"

namespace optodtc {

namespace {

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void ModelParams::validate() const {
  require(finite(delta), "delta must be finite");
  require(finite(drive.real()) && finite(drive.imag()), "drive must be finite");
  require(finite(kappa) && kappa >= 0.0, "kappa must be >= 0");
  require(finite(gamma) && gamma >= 0.0, "gamma must be >= 0");
  require(finite(j_coupling) && j_coupling > 0.0, "j_coupling must be positive");
  require(finite(n_phonon) && n_phonon > 0.0, "n_phonon must be positive");
  require(finite(omega_m) && omega_m > 0.0, "omega_m must be positive");
  require(finite(g1) && finite(g2), "couplings must be finite");
  require(!(delta == 0.0 && kappa == 0.0), "delta and kappa cannot both vanish");
  membrane_frequencies(*this);
}

double ModelParams::g() const {
  require(symmetric(), "closed forms need symmetric couplings g1 == g2; "
                       "use the mean-field simulator for asymmetric couplings");
  return g1;
}

ModelParams ModelParams::with_coupling(double g) const {
  ModelParams copy = *this;
  copy.g1 = g;
  copy.g2 = g;
  return copy;
}

ClassicalAmplitude classical_amplitude(cplx drive, double delta, double kappa) {
  const cplx denom{-delta, kappa};
  require(denom != cplx{0.0, 0.0}, "classical amplitude undefined for kappa = delta = 0");
  const cplx alpha = drive / denom;
  return {alpha, std::abs(alpha), std::arg(alpha)};
}

ClassicalAmplitude classical_amplitude(const ModelParams& p) {
  return classical_amplitude(p.drive, p.delta, p.kappa);
}

double amplitude_from_power(double power, double kappa, double omega_c) {
  require(power >= 0.0, "laser power must be non-negative");
  require(kappa > 0.0, "kappa must be positive");
  require(omega_c > 0.0, "omega_c must be positive");
  return std::sqrt(2.0 * power * kappa / omega_c);
}

MembraneFrequencies membrane_frequencies(const ModelParams& p) {
  const double a2 = std::norm(classical_amplitude(p).value);
  const double base = p.omega_m - 2.0 * p.j_coupling;
  MembraneFrequencies f{base - 2.0 * p.g1 * a2, base + 2.0 * p.g2 * a2};
  require(f.omega1 > 0.0 && f.omega2 > 0.0,
          "frequency matching gives a non-positive bare membrane frequency (omega1 = " +
              std::to_string(f.omega1) + ", omega2 = " + std::to_string(f.omega2) + ")");
  return f;
}

DickeParams dicke_params(const ModelParams& p) {
  const double g = p.g();
  const double a = classical_amplitude(p).modulus;
  return {p.delta, 4.0 * p.j_coupling, 2.0 * g * a * std::sqrt(p.n_phonon), p.n_phonon};
}

double critical_coupling_dicke(const DickeParams& dicke, double kappa) {
  require(dicke.omega0 > 0.0, "omega0 must be positive");
  require(dicke.omegaz > 0.0, "omegaz must be positive");
  return std::sqrt((dicke.omega0 * dicke.omega0 + kappa * kappa) * dicke.omegaz /
                   (4.0 * dicke.omega0));
}

double critical_coupling(double delta, double kappa, double alpha_sq, double n_phonon,
                         double j_coupling) {
  require(delta > 0.0, "critical coupling needs a positive detuning");
  require(alpha_sq > 0.0, "critical coupling needs a nonzero classical amplitude");
  require(n_phonon > 0.0, "critical coupling needs a positive phonon number");
  return std::sqrt((delta * delta + kappa * kappa) * j_coupling /
                   (4.0 * alpha_sq * n_phonon * delta));
}

double critical_coupling(const ModelParams& p) {
  return critical_coupling(p.delta, p.kappa, std::norm(classical_amplitude(p).value),
                           p.n_phonon, p.j_coupling);
}

SteadyState steady_state(const ModelParams& p, double g, Branch branch) {
  require(p.delta > 0.0, "steady state needs a positive detuning");
  const double gc = critical_coupling(p);
  SteadyState s;
  s.branch = branch;
  if (!(g > gc)) return s;
  const double r = gc / g;
  const double root = std::sqrt(1.0 - r * r * r * r);
  const double a = classical_amplitude(p).modulus;
  const double sgn = sign_of(branch);
  s.d_bar = sgn * 2.0 * g * a * p.n_phonon / cplx{p.delta, -p.kappa} * root;
  s.delta_n_bar = sgn * 0.5 * p.n_phonon * root;
  return s;
}

double effective_frequency(double g, double g_c, double j_coupling) {
  if (g > g_c) return 2.0 * j_coupling * (g * g) / (g_c * g_c);
  return 2.0 * j_coupling;
}

double normal_mode_frequency(double displacement_sum, double g, double alpha_mod,
                             double j_coupling) {
  const double c = 2.0 * g * alpha_mod * displacement_sum;
  return std::sqrt(c * c + 4.0 * j_coupling * j_coupling);
}

ModeAmplitudes mode_amplitudes(cplx d, double omega, double g, double alpha_mod,
                               double j_coupling, double n_phonon) {
  const double shifted = 2.0 * g * alpha_mod * 2.0 * d.real() + omega;
  const double jj = 4.0 * j_coupling * j_coupling;
  const double denom = jj + shifted * shifted;
  require(denom > 0.0, "degenerate mode-amplitude denominator");
  const double b1 = jj * n_phonon / denom;
  // b2 from the complement so that the pair sums to N exactly in floating point
  return {b1, n_phonon - b1};
}

ModeAmplitudes mode_amplitudes(cplx d, double omega, const ModelParams& p) {
  return mode_amplitudes(d, omega, p.g(), classical_amplitude(p).modulus, p.j_coupling,
                         p.n_phonon);
}

double effective_potential(double x, const ModelParams& p, double g) {
  const double a2 = std::norm(classical_amplitude(p).value);
  const double stiff = p.delta * p.delta + p.kappa * p.kappa;
  const double jj = p.j_coupling * p.j_coupling;
  return 0.5 * stiff * x * x -
         2.0 * p.delta * p.n_phonon * std::sqrt(jj + 2.0 * a2 * g * g * x * x);
}

double effective_potential_derivative(double x, const ModelParams& p, double g) {
  const double a2 = std::norm(classical_amplitude(p).value);
  const double stiff = p.delta * p.delta + p.kappa * p.kappa;
  const double jj = p.j_coupling * p.j_coupling;
  return stiff * x -
         4.0 * p.delta * p.n_phonon * a2 * g * g * x / std::sqrt(jj + 2.0 * a2 * g * g * x * x);
}

}  // namespace optodtc
