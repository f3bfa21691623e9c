#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "optodtc/error.hpp"
#include "optodtc/spectrum.hpp"

using namespace optodtc;
using doctest::Approx;

namespace {

SpectrumProblem at(const Equilibrium& e, double transmission, double half_length = 1.0) {
  SpectrumProblem p;
  p.half_length = half_length;
  p.transmission = transmission;
  p.x1 = e.x1;
  p.x2 = e.x2;
  return p;
}

}  // namespace

TEST_CASE("equilibrium positions") {
  const Equilibrium e = equilibrium_positions(7, -1, 1, 0.85, 1.0);
  CHECK(e.k == Approx(23.164245486831377511).epsilon(1e-14));
  CHECK(e.x1 == Approx(-0.13562249007314978644).epsilon(1e-13));
  CHECK(e.x2 == Approx(0.18626505956110128138).epsilon(1e-13));
  CHECK(std::abs(spectrum_residual(e.k, at(e, 0.85))) < 1e-12);
  CHECK(std::abs(spectrum_residual(e.k + 1e-3, at(e, 0.85))) > 1e-6);
  CHECK_THROWS_AS(equilibrium_positions(7, 3, 1, 0.85, 1.0), InvalidArgument);
  CHECK_THROWS_AS(equilibrium_positions(-3, 0, 1, 0.85, 1.0), InvalidArgument);
}

TEST_CASE("random equilibria are roots with vanishing linear couplings") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> m0d(2, 12), md(-4, 4);
  std::uniform_real_distribution<double> td(0.2, 0.95), ld(0.5, 3.0);
  int accepted = 0;
  while (accepted < 50) {
    const int m0 = m0d(rng), m1 = md(rng), m2 = md(rng);
    const double T = td(rng), L = ld(rng);
    Equilibrium e;
    try {
      e = equilibrium_positions(m0, m1, m2, T, L);
    } catch (const InvalidArgument&) {
      continue;
    }
    const double margin = 0.01 * L;
    if (e.x1 < -L + margin || e.x2 > L - margin || e.x2 - e.x1 < margin) continue;
    ++accepted;
    const SpectrumProblem prob = at(e, T, L);
    CHECK(std::abs(spectrum_residual(e.k, prob)) < 1e-12);
    const CouplingDerivatives d = coupling_derivatives(prob, e.k);
    CHECK(std::abs(d.dk_dx1) < 1e-6 * e.k);
    CHECK(std::abs(d.dk_dx2) < 1e-6 * e.k);
    CHECK(std::abs(d.d2k_dx1dx2) < 1e-4 * e.k / L);
    CHECK(std::abs(d.d2k_dx1 + d.d2k_dx2) < 1e-4 * std::abs(d.d2k_dx1));
  }
}

TEST_CASE("three branches in the plotted window") {
  SpectrumProblem p;
  p.x1 = -0.296;
  p.x2 = 0.407;
  const RootScan r = solve_k(p, 20.0, 26.0);
  CHECK(r.roots.size() == 3);
  for (double k : r.roots) CHECK(std::abs(spectrum_residual(k, p)) < 1e-12);
  for (std::size_t i = 1; i < r.roots.size(); ++i) CHECK(r.roots[i] > r.roots[i - 1]);
  CHECK_THROWS_AS(solve_k(p, 26.0, 20.0), InvalidArgument);
}

TEST_CASE("branch tracking is continuous") {
  const Equilibrium e = equilibrium_positions(7, -1, 1, 0.85, 1.0);
  const SpectrumProblem p = at(e, 0.85);
  const double k0 = track_root(p, e.k);
  const double k1 = track_root(p.displaced(1e-6, 0.0), k0);
  CHECK(std::abs(k1 - k0) < 1e-6);
  CHECK(std::abs(track_root(p, e.k + 0.01) - k0) < 1e-12);
}

TEST_CASE("slices have opposite curvature") {
  const Equilibrium e = equilibrium_positions(7, -1, 1, 0.85, 1.0);
  const SpectrumProblem p = at(e, 0.85);
  const double h = 0.01;
  const double k0 = track_root(p, e.k);
  const double a = track_root(p.displaced(-h, 0.0), k0), b = track_root(p.displaced(h, 0.0), k0);
  const double c = track_root(p.displaced(0.0, -h), k0), d = track_root(p.displaced(0.0, h), k0);
  CHECK(a > k0);
  CHECK(b > k0);
  CHECK(c < k0);
  CHECK(d < k0);
}

TEST_CASE("surface is a saddle in the displacements") {
  const Equilibrium e = equilibrium_positions(7, -1, 1, 0.85, 1.0);
  const SpectrumProblem p = at(e, 0.85);
  std::vector<double> grid;
  for (int i = -4; i <= 4; ++i) grid.push_back(2.5e-4 * i);
  const SpectrumSurface s1 = spectrum_scan(p, grid, grid, e.k, 1);
  const SpectrumSurface s3 = spectrum_scan(p, grid, grid, e.k, 3);
  CHECK(s1.dk == s3.dk);
  for (bool v : s1.valid) CHECK(v);
  const SurfaceFit f = fit_quadratic_surface(s1);
  const CouplingDerivatives d = coupling_derivatives(p, s1.k0);
  CHECK(2.0 * f.a11 == Approx(d.d2k_dx1).epsilon(0.01));
  CHECK(2.0 * f.a22 == Approx(d.d2k_dx2).epsilon(0.01));
  CHECK(std::abs(f.a12) < 1e-3 * std::abs(f.a11));
  CHECK(f.points == 81);
}

TEST_CASE("invalid geometry") {
  SpectrumProblem p;
  p.x1 = 0.5;
  p.x2 = 0.2;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = SpectrumProblem{};
  p.transmission = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}
