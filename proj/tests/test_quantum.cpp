#include <cmath>
#include <numbers>

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "optodtc/error.hpp"
#include "optodtc/quantum.hpp"

using namespace optodtc;
using doctest::Approx;

namespace {

DenseMatrix parity(const HilbertSpec& spec) {
  const int D = spec.dimension();
  DenseMatrix p = DenseMatrix::Zero(D, D);
  for (int n = 0; n <= spec.fock_cutoff; ++n) {
    for (int s = 0; s < spec.spin_dim(); ++s) {
      p(n * spec.spin_dim() + s, n * spec.spin_dim() + s) = (n + s) % 2 ? -1.0 : 1.0;
    }
  }
  return p;
}

Eigen::VectorXcd vec(const DenseMatrix& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

ModelParams weak_drive(int n) {
  ModelParams p;
  p.delta = 5.0;
  p.drive = 300.0;
  p.kappa = 1.2;
  p.omega_m = 1500.0;
  p.n_phonon = n;
  return p.with_coupling(1.5 * critical_coupling(p));
}

}  // namespace

TEST_CASE("operators") {
  const HilbertSpec spec{4, 6};
  const OperatorSet ops = build_operators(spec);
  CHECK(spec.dimension() == 35);
  CHECK((ops.d_dag - ops.d.adjoint()).norm() == 0.0);
  // [Jx, Jy] = i Jz
  CHECK((ops.jx * ops.jy - ops.jy * ops.jx - cplx{0, 1} * ops.jz).norm() < 1e-12);
  // J^2 = j (j + 1)
  const DenseMatrix j2 = ops.jx * ops.jx + ops.jy * ops.jy + ops.jz * ops.jz;
  CHECK((j2 - 6.0 * DenseMatrix::Identity(35, 35)).norm() < 1e-12);
  CHECK((ops.n_cav - ops.d_dag * ops.d).norm() < 1e-12);
}

TEST_CASE("hamiltonian is hermitian and parity symmetric") {
  const HilbertSpec spec{5, 7};
  const DenseMatrix h = build_hamiltonian(spec, 5.0, 1.0, 0.3, 2.0);
  CHECK((h - h.adjoint()).norm() < 1e-12);
  const DenseMatrix p = parity(spec);
  CHECK((p * h * p.adjoint() - h).norm() < 1e-10);
}

TEST_CASE("vectorised generator agrees with the rhs") {
  const HilbertSpec spec{2, 6};
  const OperatorSet ops = build_operators(spec);
  const DenseMatrix h = build_hamiltonian(ops, 3.0, 1.0, 0.2, 1.5);
  const DenseMatrix L = vectorized_lindbladian(h, ops.d, 0.7);
  const QuantumState s = initial_state(spec, cplx{0.3, 0.1}, 1.0, cplx{0.5, 0.5});
  const DenseMatrix rho = s.rho;
  CHECK((L * vec(rho) - vec(lindblad_rhs(rho, h, ops.d, 0.7))).norm() < 1e-12);
}

TEST_CASE("cavity decay without hamiltonian") {
  const HilbertSpec spec{3, 10};
  const OperatorSet ops = build_operators(spec);
  const double rate = 2.4;
  const QuantumState s0 = initial_state(spec, cplx{0.8, -0.4}, 1.0, 0.0);
  const DenseMatrix zero = DenseMatrix::Zero(spec.dimension(), spec.dimension());
  const QuantumState s1 = lindblad_step(s0, zero, ops.d, rate, 1.5, StepControl{1e-12, 1e-12});
  const cplx d0 = measure(spec, s0).d, d1 = measure(spec, s1).d;
  CHECK(std::abs(d1 - d0 * std::exp(-0.5 * rate * 1.5)) < 1e-9);
}

TEST_CASE("stencil evolution matches the exponential of the generator") {
  const HilbertSpec spec{5, 5};
  REQUIRE(spec.dimension() == 36);
  const double delta = 5.0, j = 1.0, g = 0.02, a = 10.0, rate = 2.4, t = 5.0;
  const OperatorSet ops = build_operators(spec);
  const DenseMatrix L = vectorized_lindbladian(build_hamiltonian(ops, delta, j, g, a), ops.d, rate);
  const QuantumState s0 = initial_state(spec, cplx{0.2, 0.1}, cplx{1.0, 0.2}, cplx{0.4, 0.0});
  const Eigen::VectorXcd v1 = (L * t).exp() * vec(DenseMatrix(s0.rho));
  const DenseMatrix expected = Eigen::Map<const DenseMatrix>(v1.data(), 36, 36);
  const EffectiveLindblad lind(spec, delta, j, g, a, rate);
  const QuantumState s1 = lind.evolve(s0, t, StepControl{1e-12, 1e-12});
  CHECK((DenseMatrix(s1.rho) - expected).norm() < 1e-8);
  CHECK(s1.time == Approx(t));

  const QuantumState dense = lindblad_step(s0, build_hamiltonian(ops, delta, j, g, a), ops.d, rate,
                                           t, StepControl{1e-12, 1e-12});
  CHECK((DenseMatrix(dense.rho) - expected).norm() < 1e-8);
}

TEST_CASE("interaction picture round trip") {
  const HilbertSpec spec{3, 6};
  const EffectiveLindblad lind(spec, 5.0, 1.0, 0.05, 3.0, 1.0);
  const QuantumState s = initial_state(spec, cplx{0.3, 0.0}, 1.0, cplx{0.2, 0.7});
  DensityMatrix r = s.rho;
  lind.to_interaction(0.37, r);
  lind.to_schrodinger(0.37, r);
  CHECK((r - s.rho).norm() < 1e-13);
  CHECK(lind.max_stable_step() > 0.0);
}

TEST_CASE("coherent tails and the automatic cutoff") {
  CHECK(coherent_tail(0.0, 0) == Approx(0.0));
  CHECK(coherent_tail(1.0, 0) == Approx(1.0 - std::exp(-1.0)));
  CHECK(coherent_tail(1.0, 1) == Approx(1.0 - 2.0 * std::exp(-1.0)));
  const int n = default_fock_cutoff(4.0, 0);
  CHECK(coherent_tail(4.0, n) < 1e-8);
  CHECK(coherent_tail(4.0, n - 1) >= 1e-8);
  CHECK(default_fock_cutoff(4.0, 10) == n + 10);
}

TEST_CASE("initial state follows the mean field") {
  const ModelParams p = weak_drive(10);
  const MeanFieldState mf = broken_symmetry_state(p, p.g(), Branch::plus);
  const HilbertSpec spec{10, default_fock_cutoff(std::norm(mf.cav))};
  const QuantumState s = initial_state(spec, mf);
  const Observables o = measure(spec, s);
  CHECK(o.trace == Approx(1.0).epsilon(1e-12));
  CHECK(o.purity == Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(o.d - mf.cav) < 1e-6);
  CHECK(std::abs(o.jx / 10.0 - mf.delta_n() / 10.0) < 1.0 / 10.0);
  CHECK(o.jx * mf.delta_n() > 0.0);
  const HilbertSpec tiny{10, 2};
  CHECK_THROWS_AS(initial_state(tiny, mf), InvalidArgument);
}

TEST_CASE("protocol keeps the state physical and alternates") {
  const ModelParams p = weak_drive(4);
  const MeanFieldState mf = broken_symmetry_state(p, p.g(), Branch::plus);
  const HilbertSpec spec{4, default_fock_cutoff(std::norm(mf.cav))};
  const PulseSchedule s = build_schedule(20.0, p.delta, p.drive, p.kappa, 0.956, 5.0);
  QuantumControls c;
  c.sample_step = 0.5;
  const QuantumRun r = run_quantum_protocol(spec, s, p, 3, initial_state(spec, mf), c);
  REQUIRE(r.stroboscopic.size() == 4);
  REQUIRE(r.diagnostics.size() == 4);
  for (const StateDiagnostics& d : r.diagnostics) {
    CHECK(std::abs(d.trace_error) < 1e-8);
    CHECK(d.hermiticity_error < 1e-10);
    CHECK(d.min_eigenvalue > -1e-7);
  }
  CHECK(r.stroboscopic[0].jx > 0.0);
  CHECK(r.stroboscopic[1].jx < 0.0);
  CHECK(r.stroboscopic[2].jx > 0.0);
  CHECK(r.samples.size() > 10);
  CHECK(r.stroboscopic[3].time == Approx(3.0 * s.period()));
}

TEST_CASE("lifetime extraction") {
  std::vector<double> t, x;
  for (int k = 0; k <= 30; ++k) {
    t.push_back(2.0 * k);
    x.push_back((k % 2 ? -0.4 : 0.4) * std::exp(-t.back() / 17.0));
  }
  const LifetimeFit f = extract_lifetime(t, x, 1e-3, 10, 1);
  CHECK(f.lifetime == Approx(17.0).epsilon(1e-10));
  CHECK(f.alternations == 30);
  CHECK(f.points >= 3);

  // window stops at the floor
  const LifetimeFit g = extract_lifetime(t, x, 0.05, 10, 0);
  CHECK(g.points == 18);

  std::vector<double> flat(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) flat[i] = std::abs(x[i]);
  CHECK_THROWS_AS(extract_lifetime(t, flat, 1e-3, 10, 0), NumericalFailure);
  CHECK_THROWS_AS(extract_lifetime(t, x, 0.5, 10, 0), NumericalFailure);
}

TEST_CASE("hilbert space limits") {
  HilbertSpec spec{10, 20};
  CHECK_NOTHROW(spec.validate());
  spec.max_dimension = 100;
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  CHECK_THROWS_AS(HilbertSpec({0, 5}).validate(), InvalidArgument);
}
