#pragma once

// Optical spectrum of a cavity of length 2L holding two identical membranes
// of transmission T at x1 < x2: the transcendental mode condition, root
// finding with branch tracking, the analytic equilibrium family and
// finite-difference optomechanical couplings.

#include <cstddef>
#include <string>
#include <vector>

namespace optodtc {

struct SpectrumProblem {
  double half_length = 1.0;  ///< L
  double transmission = 0.85;
  double x1 = -0.5;
  double x2 = 0.5;

  /// phi = arccos sqrt(T).
  double phi() const;
  void validate() const;
  SpectrumProblem displaced(double dx1, double dx2) const;
};

/// sin(2kL + 2phi) + sin(2kL + 2k(x1 - x2)) sin^2 phi
///   - 2 sin phi cos(k(x1 - x2) - phi) cos(k(x1 + x2)).
double spectrum_residual(double k, const SpectrumProblem& prob);

struct RootControls {
  double grid_step = 0.0;    ///< 0 selects pi / (40 L)
  double tolerance = 1e-12;  ///< target |residual|
  double tangential_tolerance = 1e-9;
};

struct RootScan {
  std::vector<double> roots;       ///< sorted, |residual| < tolerance
  std::vector<double> tangential;  ///< touching zeros without a sign change
};

/// All roots in [k_lo, k_hi] from a sign-change scan, refined by bisection
/// and a bracketed secant polish.
RootScan solve_k(const SpectrumProblem& prob, double k_lo, double k_hi,
                 const RootControls& controls = {});

/// Root on the branch through k_guess: the nearest root within
/// max_shift (default pi / (4L)). Throws NumericalFailure on a branch jump.
double track_root(const SpectrumProblem& prob, double k_guess, double max_shift = 0.0,
                  const RootControls& controls = {});

struct Equilibrium {
  double k;
  double x1;
  double x2;
};

/// k = ((2 m0 + 1) pi / 2 - phi) / L, x1 = m1 pi / k, x2 = (m2 pi + pi / 2 - phi) / k.
Equilibrium equilibrium_positions(int m0, int m1, int m2, double transmission,
                                  double half_length);

struct CouplingDerivatives {
  double k0;
  double dk_dx1;
  double dk_dx2;
  double d2k_dx1;
  double d2k_dx2;
  double d2k_dx1dx2;
};

/// Central differences of the implicit k(x1, x2) on the branch through k0,
/// Richardson-extrapolated from steps h and h / 2 (h = 0 selects 5e-5 L).
CouplingDerivatives coupling_derivatives(const SpectrumProblem& prob, double k0, double h = 0.0);

struct SpectrumSurface {
  std::vector<double> dx1;  ///< rows
  std::vector<double> dx2;  ///< columns
  double k0 = 0.0;
  std::vector<double> dk;    ///< row-major k - k0
  std::vector<bool> valid;   ///< false where the branch could not be followed
  std::vector<std::string> messages;

  double at(std::size_t i, std::size_t j) const { return dk[i * dx2.size() + j]; }
  bool ok(std::size_t i, std::size_t j) const { return valid[i * dx2.size() + j]; }
};

/// Branch-tracked Delta k over displacements (dx1, dx2) from the base
/// geometry. The column nearest dx2 = 0 is followed outward from dx1 = 0
/// first, then every row outward from that column; rows run in parallel.
SpectrumSurface spectrum_scan(const SpectrumProblem& base, const std::vector<double>& dx1,
                              const std::vector<double>& dx2, double branch_seed,
                              int workers = 1);

/// Least-squares Delta k = b1 dx1 + b2 dx2 + a11 dx1^2 + a22 dx2^2 + a12 dx1 dx2.
struct SurfaceFit {
  double b1 = 0.0, b2 = 0.0;
  double a11 = 0.0, a22 = 0.0, a12 = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

SurfaceFit fit_quadratic_surface(const SpectrumSurface& surface);

}  // namespace optodtc
