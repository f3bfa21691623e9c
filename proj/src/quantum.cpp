#include "optodtc/quantum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "optodtc/error.hpp"

namespace optodtc {

namespace {

// x += c p on interleaved complex rows, written out so it vectorises
inline void row_axpy(cplx* x, cplx c, const cplx* p, Eigen::Index n) {
  double* __restrict xd = reinterpret_cast<double*>(x);
  const double* __restrict pd = reinterpret_cast<const double*>(p);
  const double cr = c.real(), ci = c.imag();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double pr = pd[2 * j], pi = pd[2 * j + 1];
    xd[2 * j] += cr * pr - ci * pi;
    xd[2 * j + 1] += cr * pi + ci * pr;
  }
}

constexpr cplx kI{0.0, 1.0};

void symmetrize(DensityMatrix& rho) {
  DensityMatrix h = 0.5 * (rho + rho.adjoint());
  rho.swap(h);
}

// <s+1| J+ |s> for spin j = n/2, s = m + j.
std::vector<double> raising_elements(int n) {
  const double j = 0.5 * n;
  std::vector<double> out(static_cast<std::size_t>(std::max(n, 0)));
  for (int s = 0; s < n; ++s) {
    const double m = s - j;
    out[static_cast<std::size_t>(s)] = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  }
  return out;
}

// x = (d0 + d[j]) p
inline void row_scale(cplx* x, double d0, const double* d, const cplx* p, Eigen::Index n) {
  double* __restrict xd = reinterpret_cast<double*>(x);
  const double* __restrict pd = reinterpret_cast<const double*>(p);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double f = d0 + d[j];
    xd[2 * j] = f * pd[2 * j];
    xd[2 * j + 1] = f * pd[2 * j + 1];
  }
}

// x += c w[j] p[j]
inline void row_stencil(cplx* x, cplx c, const double* w, const cplx* p, Eigen::Index n) {
  double* __restrict xd = reinterpret_cast<double*>(x);
  const double* __restrict pd = reinterpret_cast<const double*>(p);
  const double cr = c.real(), ci = c.imag();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double pr = w[j] * pd[2 * j], pi = w[j] * pd[2 * j + 1];
    xd[2 * j] += cr * pr - ci * pi;
    xd[2 * j + 1] += cr * pi + ci * pr;
  }
}

}  // namespace

void HilbertSpec::validate() const {
  require(n_phonon >= 1, "n_phonon must be at least 1");
  require(fock_cutoff >= 1, "fock_cutoff must be at least 1");
  require(static_cast<std::size_t>(dimension()) <= max_dimension,
          "Hilbert-space dimension " + std::to_string(dimension()) + " exceeds the limit " +
              std::to_string(max_dimension));
}

OperatorSet build_operators(const HilbertSpec& spec) {
  spec.validate();
  const int ns = spec.spin_dim(), nc = spec.cavity_dim(), dim = spec.dimension();
  const double j = 0.5 * spec.n_phonon;
  const std::vector<double> jp = raising_elements(spec.n_phonon);

  OperatorSet ops;
  ops.d = DenseMatrix::Zero(dim, dim);
  ops.jx = DenseMatrix::Zero(dim, dim);
  ops.jy = DenseMatrix::Zero(dim, dim);
  ops.jz = DenseMatrix::Zero(dim, dim);
  ops.n_cav = DenseMatrix::Zero(dim, dim);
  for (int n = 0; n < nc; ++n) {
    for (int s = 0; s < ns; ++s) {
      const int r = n * ns + s;
      if (n + 1 < nc) ops.d(r, r + ns) = std::sqrt(static_cast<double>(n + 1));
      ops.n_cav(r, r) = n;
      ops.jz(r, r) = s - j;
      if (s + 1 < ns) {
        const double e = jp[static_cast<std::size_t>(s)];
        // J+ |s> = e |s+1>
        ops.jx(r + 1, r) = 0.5 * e;
        ops.jx(r, r + 1) = 0.5 * e;
        ops.jy(r + 1, r) = -0.5 * kI * e;
        ops.jy(r, r + 1) = 0.5 * kI * e;
      }
    }
  }
  ops.d_dag = ops.d.adjoint();
  return ops;
}

DenseMatrix build_hamiltonian(const OperatorSet& ops, double delta, double j_coupling, double g,
                              double alpha_mod) {
  return delta * ops.n_cav + 4.0 * j_coupling * ops.jz +
         4.0 * g * alpha_mod * (ops.d + ops.d_dag) * ops.jx;
}

DenseMatrix build_hamiltonian(const HilbertSpec& spec, double delta, double j_coupling, double g,
                              double alpha_mod) {
  return build_hamiltonian(build_operators(spec), delta, j_coupling, g, alpha_mod);
}

DenseMatrix lindblad_rhs(const DenseMatrix& rho, const DenseMatrix& h, const DenseMatrix& d,
                         double rate) {
  const DenseMatrix n = d.adjoint() * d;
  return -kI * (h * rho - rho * h) +
         rate * (d * rho * d.adjoint() - 0.5 * (n * rho + rho * n));
}

DenseMatrix vectorized_lindbladian(const DenseMatrix& h, const DenseMatrix& d, double rate) {
  const Eigen::Index dim = h.rows();
  const DenseMatrix id = DenseMatrix::Identity(dim, dim);
  const DenseMatrix n = d.adjoint() * d;
  auto kron = [](const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        out.block(i * b.rows(), k * b.cols(), b.rows(), b.cols()) = a(i, k) * b;
      }
    }
    return out;
  };
  // vec(A X B) = (B^T (x) A) vec(X)
  return -kI * (kron(id, h) - kron(h.transpose(), id)) +
         rate * (kron(d.conjugate(), d) - 0.5 * kron(id, n) - 0.5 * kron(n.transpose(), id));
}

QuantumState lindblad_step(const QuantumState& state, const DenseMatrix& h, const DenseMatrix& d,
                           double rate, double duration, const StepControl& control) {
  require(duration >= 0.0, "duration must be non-negative");
  require(rate >= 0.0, "decay rate must be non-negative");
  require(h.rows() == state.rho.rows() && d.rows() == state.rho.rows(),
          "operator and state dimensions differ");
  const DenseMatrix n = d.adjoint() * d;
  const DenseMatrix d_dag = d.adjoint();
  auto rhs = [&](double, const DenseMatrix& rho, DenseMatrix& out) {
    out.noalias() = -kI * (h * rho);
    out.noalias() += kI * (rho * h);
    out.noalias() -= 0.5 * rate * (n * rho);
    out.noalias() -= 0.5 * rate * (rho * n);
    out.noalias() += rate * (d * rho * d_dag);
  };
  DormandPrince5<DenseMatrix> solver(rhs, control);
  solver.reset(state.time, DenseMatrix(state.rho));
  solver.advance(state.time + duration);
  QuantumState out{DensityMatrix(solver.state()), state.time + duration};
  symmetrize(out.rho);
  return out;
}

EffectiveLindblad::EffectiveLindblad(const HilbertSpec& spec, double delta, double j_coupling,
                                     double g, double alpha_mod, double rate)
    : ns_(spec.spin_dim()),
      nc_(spec.cavity_dim()),
      delta_(delta),
      jc_(j_coupling),
      coupling_(2.0 * g * alpha_mod),
      rate_(rate) {
  spec.validate();
  require(std::isfinite(delta) && std::isfinite(g) && std::isfinite(alpha_mod),
          "Hamiltonian parameters must be finite");
  require(rate >= 0.0, "decay rate must be non-negative");
  jplus_ = raising_elements(spec.n_phonon);
  sqrt_n_.resize(static_cast<std::size_t>(nc_ + 1));
  for (int n = 0; n <= nc_; ++n) sqrt_n_[static_cast<std::size_t>(n)] = std::sqrt(double(n));
  const double j = 0.5 * spec.n_phonon;
  energy_.resize(static_cast<std::size_t>(ns_ * nc_));
  for (int n = 0; n < nc_; ++n) {
    for (int s = 0; s < ns_; ++s) {
      energy_[static_cast<std::size_t>(n * ns_ + s)] = delta_ * n + 4.0 * jc_ * (s - j);
    }
  }
  const std::size_t dim = static_cast<std::size_t>(ns_ * nc_);
  for (auto& h : hop_) h.assign(dim, 0.0);
  damp_.resize(dim);
  jump_.resize(dim);
  for (int n = 0; n < nc_; ++n) {
    for (int s = 0; s < ns_; ++s) {
      const std::size_t r = static_cast<std::size_t>(n * ns_ + s);
      const double up_s = s + 1 < ns_ ? jplus_[std::size_t(s)] : 0.0;
      const double down_s = s > 0 ? jplus_[std::size_t(s - 1)] : 0.0;
      const double cav_up = n + 1 < nc_ ? sqrt_n_[std::size_t(n + 1)] : 0.0;
      const double cav_down = sqrt_n_[std::size_t(n)];
      hop_[0][r] = cav_up * up_s;      // (n+1, s+1)
      hop_[1][r] = cav_up * down_s;    // (n+1, s-1)
      hop_[2][r] = cav_down * up_s;    // (n-1, s+1)
      hop_[3][r] = cav_down * down_s;  // (n-1, s-1)
      damp_[r] = -0.5 * rate_ * n;
      jump_[r] = cav_up;
    }
  }
  // |spec(L_I)| <= 2 |H_I| + rate n_max with |H_I| = 2c max|eig(d + d^dag)| j
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(nc_, nc_);
  for (int n = 0; n + 1 < nc_; ++n) x(n, n + 1) = x(n + 1, n) = sqrt_n_[std::size_t(n + 1)];
  const double x_max =
      nc_ > 1 ? Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(x, Eigen::EigenvaluesOnly)
                    .eigenvalues()
                    .cwiseAbs()
                    .maxCoeff()
              : 0.0;
  spectral_bound_ = 4.0 * std::abs(coupling_) * x_max * j + rate_ * (nc_ - 1);
}

double EffectiveLindblad::max_stable_step() const {
  return spectral_bound_ > 0.0 ? 3.0 / spectral_bound_ : std::numeric_limits<double>::infinity();
}

void EffectiveLindblad::interaction_rhs(double tau, const DensityMatrix& rho,
                                        DensityMatrix& out) const {
  const Eigen::Index dim = static_cast<Eigen::Index>(ns_) * nc_;
  const Eigen::Index ns = ns_;
  out.resize(dim, dim);
  // H_I = c (d e^{-i Delta tau} + d^dag e^{i Delta tau}) (x) (J+ e^{i 4J tau} + J- e^{-i 4J tau})
  // H_I(r + shift_k, r) = phase_k hop_k[r]
  const cplx down = std::polar(1.0, -delta_ * tau);
  const cplx up = std::conj(down);
  const cplx raise = std::polar(1.0, 4.0 * jc_ * tau);
  const cplx lower = std::conj(raise);
  const std::array<cplx, 4> phase{up * raise, up * lower, down * raise, down * lower};
  const std::array<Eigen::Index, 4> shift{ns + 1, ns - 1, -ns + 1, -ns - 1};
  std::array<cplx, 4> right;  // +i phase_k, applied along the row
  for (int k = 0; k < 4; ++k) right[std::size_t(k)] = kI * coupling_ * phase[std::size_t(k)];

  for (Eigen::Index r = 0; r < dim; ++r) {
    cplx* xr = out.data() + r * dim;
    const cplx* own = rho.data() + r * dim;
    row_scale(xr, damp_[std::size_t(r)], damp_.data(), own, dim);
    for (int k = 0; k < 4; ++k) {
      const std::size_t kk = std::size_t(k);
      const Eigen::Index sh = shift[kk];
      // -i H rho: row r picks up rows r + shift with H(r, r + shift) = conj(phase) hop[r]
      const double w = hop_[kk][std::size_t(r)];
      if (w != 0.0) row_axpy(xr, -kI * coupling_ * std::conj(phase[kk]) * w, own + sh * dim, dim);
      // +i rho H: column c picks up column c + shift with weight phase hop[c]
      const Eigen::Index c0 = std::max<Eigen::Index>(0, -sh), c1 = std::min(dim, dim - sh);
      row_stencil(xr + c0, right[kk], hop_[kk].data() + c0, own + c0 + sh, c1 - c0);
    }
    if (rate_ != 0.0 && r + ns < dim) {
      const double f = rate_ * sqrt_n_[std::size_t(r / ns + 1)];
      row_stencil(xr, cplx(f, 0.0), jump_.data(), own + ns * dim + ns, dim - ns);
    }
  }
}

void EffectiveLindblad::to_schrodinger(double tau, DensityMatrix& rho) const {
  const Eigen::Index dim = rho.rows();
  Eigen::VectorXcd u(dim);
  for (Eigen::Index r = 0; r < dim; ++r) u(r) = std::polar(1.0, -energy_[std::size_t(r)] * tau);
  rho = u.asDiagonal() * rho * u.conjugate().asDiagonal();
}

void EffectiveLindblad::to_interaction(double tau, DensityMatrix& rho) const {
  to_schrodinger(-tau, rho);
}

QuantumState EffectiveLindblad::evolve(const QuantumState& state, double duration,
                                       const StepControl& control) const {
  return evolve_impl(state, duration, control, 0.0, [](const QuantumState&) {});
}

QuantumState EffectiveLindblad::evolve_impl(
    const QuantumState& state, double duration, const StepControl& control, double sample_step,
    const std::function<void(const QuantumState&)>& on_sample) const {
  require(duration >= 0.0, "duration must be non-negative");
  require(sample_step >= 0.0, "sample_step must be non-negative");
  const Eigen::Index dim = static_cast<Eigen::Index>(ns_) * nc_;
  require(state.rho.rows() == dim && state.rho.cols() == dim,
          "state dimension does not match the Hilbert space");
  if (duration == 0.0) return state;

  StepControl capped = control;
  capped.max_step = std::min(control.max_step, max_stable_step());
  DormandPrince5<DensityMatrix> solver(
      [this](double tau, const DensityMatrix& r, DensityMatrix& o) { interaction_rhs(tau, r, o); },
      capped);
  solver.reset(0.0, state.rho);
  const double t0 = state.time;

  if (sample_step > 0.0) {
    const double dt = sample_step;
    long k = static_cast<long>(std::floor(t0 / dt)) + 1;
    while (static_cast<double>(k) * dt <= t0 + 1e-9 * dt) ++k;
    const double t_last = t0 + duration - 1e-9 * dt;
    solver.advance(duration, [&](const DormandPrince5<DensityMatrix>& st) {
      while (static_cast<double>(k) * dt < t_last &&
             static_cast<double>(k) * dt - t0 <= st.time()) {
        const double t = static_cast<double>(k) * dt;
        QuantumState sample{st.dense(t - t0), t};
        to_schrodinger(t - t0, sample.rho);
        on_sample(sample);
        ++k;
      }
    });
  } else {
    solver.advance(duration);
  }
  QuantumState out{solver.state(), t0 + duration};
  to_schrodinger(duration, out.rho);
  symmetrize(out.rho);
  return out;
}

Observables measure(const HilbertSpec& spec, const QuantumState& state) {
  const int ns = spec.spin_dim(), nc = spec.cavity_dim();
  const Eigen::Index dim = spec.dimension();
  require(state.rho.rows() == dim, "state dimension does not match the Hilbert space");
  const std::vector<double> jp = raising_elements(spec.n_phonon);
  const double j = 0.5 * spec.n_phonon;
  const DensityMatrix& rho = state.rho;

  Observables o;
  o.time = state.time;
  cplx jplus{0.0, 0.0};
  for (int n = 0; n < nc; ++n) {
    for (int s = 0; s < ns; ++s) {
      const Eigen::Index r = static_cast<Eigen::Index>(n) * ns + s;
      const double p = rho(r, r).real();
      o.trace += p;
      o.photons += n * p;
      o.jz += (s - j) * p;
      if (n + 1 < nc) o.d += std::sqrt(double(n + 1)) * rho(r + ns, r);
      if (s + 1 < ns) jplus += jp[std::size_t(s)] * rho(r, r + 1);
    }
  }
  o.jx = jplus.real();
  o.jy = jplus.imag();
  o.purity = rho.cwiseAbs2().sum();
  return o;
}

StateDiagnostics diagnose(const QuantumState& state, bool eigenvalues) {
  StateDiagnostics diag;
  const DensityMatrix& rho = state.rho;
  diag.trace_error = std::abs(rho.trace() - cplx{1.0, 0.0});
  diag.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (eigenvalues) {
    const DenseMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(herm, Eigen::EigenvaluesOnly);
    diag.min_eigenvalue = es.eigenvalues().minCoeff();
  }
  return diag;
}

double coherent_tail(double mean_photons, int n_max) {
  require(mean_photons >= 0.0, "mean photon number must be non-negative");
  require(n_max >= 0, "n_max must be non-negative");
  if (mean_photons == 0.0) return 0.0;
  double sum = 0.0;
  const double lmu = std::log(mean_photons);
  for (int n = n_max + 1;; ++n) {
    const double term = std::exp(-mean_photons + n * lmu - std::lgamma(n + 1.0));
    sum += term;
    if (n > mean_photons && term <= 1e-18 * sum) break;
    if (n > n_max + 100000) break;
  }
  return sum;
}

int default_fock_cutoff(double mean_photons, int headroom) {
  require(headroom >= 0, "headroom must be non-negative");
  int n = 1;
  while (coherent_tail(mean_photons, n) >= 1e-8) ++n;
  return n + headroom;
}

QuantumState initial_state(const HilbertSpec& spec, cplx cavity, cplx b1, cplx b2,
                           double tail_tolerance) {
  spec.validate();
  const double tail = coherent_tail(std::norm(cavity), spec.fock_cutoff);
  if (tail >= tail_tolerance) {
    std::ostringstream msg;
    msg << "fock_cutoff " << spec.fock_cutoff << " too small for |d|^2 = " << std::norm(cavity)
        << " (tail mass " << tail << "); use at least "
        << default_fock_cutoff(std::norm(cavity), 0);
    throw InvalidArgument(msg.str());
  }
  const double jx = 0.5 * (std::norm(b1) - std::norm(b2));
  const double jy = (std::conj(b1) * b2).imag();
  const double jz = -(std::conj(b1) * b2).real();
  const double len = std::sqrt(jx * jx + jy * jy + jz * jz);
  require(len > 0.0, "mean-field spin vector vanishes");
  const double theta = std::acos(std::clamp(jz / len, -1.0, 1.0));
  const double phi = std::atan2(jy, jx);

  const int ns = spec.spin_dim(), nc = spec.cavity_dim(), n_spin = spec.n_phonon;
  Eigen::VectorXcd spin(ns);
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  for (int k = 0; k < ns; ++k) {
    const double logbin =
        std::lgamma(n_spin + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_spin - k + 1.0);
    const double mag = std::exp(0.5 * logbin) * std::pow(c, k) * std::pow(s, n_spin - k);
    spin(k) = std::polar(mag, (n_spin - k) * phi);
  }
  Eigen::VectorXcd cav(nc);
  cav(0) = std::exp(-0.5 * std::norm(cavity));
  for (int n = 1; n < nc; ++n) cav(n) = cav(n - 1) * cavity / std::sqrt(double(n));

  Eigen::VectorXcd psi(spec.dimension());
  for (int n = 0; n < nc; ++n) psi.segment(n * ns, ns) = cav(n) * spin;
  psi.normalize();
  return {DensityMatrix(psi * psi.adjoint()), 0.0};
}

QuantumState initial_state(const HilbertSpec& spec, const MeanFieldState& mean_field,
                           double tail_tolerance) {
  return initial_state(spec, mean_field.cav, mean_field.b1, mean_field.b2, tail_tolerance);
}

QuantumRun run_quantum_protocol(const HilbertSpec& spec, const PulseSchedule& schedule,
                                const ModelParams& params, long n_periods,
                                const QuantumState& initial, const QuantumControls& controls) {
  spec.validate();
  schedule.validate();
  require(n_periods >= 1, "n_periods must be at least 1");
  require(controls.rate_factor >= 0.0, "rate_factor must be non-negative");
  require(initial.rho.rows() == spec.dimension(),
          "initial state dimension does not match the Hilbert space");
  const double g = params.g();
  const double alpha_mod = std::abs(schedule.alpha_phase2());
  const double rate = controls.rate_factor * schedule.kappa;
  const EffectiveLindblad phase1(spec, schedule.phase1.delta, params.j_coupling, g, alpha_mod,
                                 rate);
  const EffectiveLindblad phase2(spec, schedule.phase2.delta, params.j_coupling, g, alpha_mod,
                                 rate);

  QuantumRun run;
  QuantumState st = initial;
  st.time = 0.0;
  auto record = [&](const QuantumState& s) { run.samples.push_back(measure(spec, s)); };
  auto stroboscopic = [&](const QuantumState& s) {
    run.stroboscopic.push_back(measure(spec, s));
    StateDiagnostics diag = diagnose(s, controls.check_positivity);
    double top = 0.0;
    const Eigen::Index first = static_cast<Eigen::Index>(spec.fock_cutoff) * spec.spin_dim();
    for (Eigen::Index r = first; r < s.rho.rows(); ++r) top += s.rho(r, r).real();
    diag.top_level_population = top;
    if (controls.check_positivity && diag.min_eigenvalue < -controls.positivity_tolerance) {
      std::ostringstream msg;
      msg << "minimum eigenvalue " << diag.min_eigenvalue << " at t = " << s.time
          << "; consider a larger fock_cutoff";
      run.warnings.push_back(msg.str());
    }
    run.diagnostics.push_back(diag);
  };

  record(st);
  stroboscopic(st);
  const double period = schedule.period();
  for (long k = 0; k < n_periods; ++k) {
    try {
      st = phase1.evolve(st, schedule.phase1.duration, controls.step, controls.sample_step,
                         record);
      record(st);
      st = phase2.evolve(st, schedule.phase2.duration, controls.step, controls.sample_step,
                         record);
    } catch (const NumericalFailure& e) {
      std::ostringstream msg;
      msg << e.what() << " (period " << k << ")";
      throw NumericalFailure(msg.str(), e.last_good_time());
    }
    st.time = static_cast<double>(k + 1) * period;
    record(st);
    stroboscopic(st);
  }
  run.final_state = st;
  return run;
}

LifetimeFit extract_lifetime(const std::vector<double>& times, const std::vector<double>& values,
                             double floor, std::size_t min_alternations, std::size_t first) {
  require(times.size() == values.size(), "times and values differ in length");
  require(floor > 0.0, "amplitude floor must be positive");
  std::size_t alternations = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] * values[i - 1] < 0.0) ++alternations;
  }
  std::size_t end = first;
  while (end < values.size() && std::abs(values[end]) > floor) ++end;
  if (alternations < min_alternations || end < first + 3) {
    std::ostringstream msg;
    msg << "no alternating window: " << alternations << " sign alternations (need "
        << min_alternations << "), " << (end > first ? end - first : 0) << " samples above "
        << floor << " (need 3)";
    throw NumericalFailure(msg.str(), end > 0 ? times[end - 1] : 0.0);
  }
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = first; i < end; ++i) {
    const double t = times[i], y = std::log(std::abs(values[i]));
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double n = static_cast<double>(end - first);
  const double denom = n * stt - st * st;
  require(denom > 0.0, "lifetime fit needs distinct sample times");
  LifetimeFit fit;
  fit.slope = (n * sty - st * sy) / denom;
  fit.intercept = (sy - fit.slope * st) / n;
  fit.points = end - first;
  fit.alternations = alternations;
  if (!(fit.slope < 0.0)) {
    throw NumericalFailure("amplitude does not decay; lifetime is unbounded", times[end - 1]);
  }
  fit.lifetime = -1.0 / fit.slope;
  return fit;
}

}  // namespace optodtc
