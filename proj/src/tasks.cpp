#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <variant>

#include "cli_plan.hpp"
#include "optodtc/error.hpp"
#include "optodtc/sweep.hpp"
#include "optodtc/validation.hpp"

#ifndef OPTODTC_VERSION
#define OPTODTC_VERSION "0.0.0"
#endif

namespace optodtc {

namespace fs = std::filesystem;
using namespace detail;

std::string artifact_version() { return std::string("optodtc ") + OPTODTC_VERSION; }

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Cell {
  std::string text;
  Cell(double v) : text(format_double(v)) {}
  Cell(int v) : text(std::to_string(v)) {}
  Cell(long v) : text(std::to_string(v)) {}
  Cell(std::size_t v) : text(std::to_string(v)) {}
  Cell(bool v) : text(v ? "1" : "0") {}
  Cell(const char* v) : Cell(std::string(v)) {}
  Cell(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) {
      text = v;
    } else {
      text = "\"";
      for (char c : v) text += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
      text += "\"";
    }
  }
};

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : columns_(header.size()) {
    add(std::vector<Cell>(header.begin(), header.end()));
  }
  void row(std::initializer_list<Cell> cells) { add(std::vector<Cell>(cells)); }
  const std::string& text() const { return out_; }

 private:
  void add(const std::vector<Cell>& cells) {
    if (cells.size() != columns_) throw std::logic_error("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ += cells[i].text;
      out_ += i + 1 < cells.size() ? ',' : '\n';
    }
  }
  std::size_t columns_;
  std::string out_;
};

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json complex_json(cplx c) { return Json::array({c.real(), c.imag()}); }

class Context {
 public:
  Context(const RunConfig& cfg, const ExecuteOptions& opt, TaskResult& res)
      : cfg_(cfg), opt_(opt), res_(res), dir_(cfg.output) {}

  const RunConfig& config() const { return cfg_; }
  int workers() const { return cfg_.workers; }
  TaskResult& result() { return res_; }
  Json& derived() { return derived_; }
  Json& tolerances() { return tolerances_; }

  void prepare() {
    if (opt_.write_files) fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    if (!opt_.write_files) return;
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw fs::filesystem_error("cannot open for writing", p, std::make_error_code(std::errc::io_error));
    f << content;
    if (!f) throw fs::filesystem_error("write failed", p, std::make_error_code(std::errc::io_error));
    res_.files.push_back(p.string());
  }
  void write(const std::string& name, const Csv& csv) { write(name, csv.text()); }

  void say(const std::string& line) const {
    if (!opt_.quiet) std::cout << line << '\n' << std::flush;
  }

  void header() const {
    if (opt_.quiet) return;
    std::cout << "optodtc " << task_name(cfg_.task);
    if (!cfg_.preset.empty()) std::cout << " [preset " << cfg_.preset << "]";
    std::cout << " -> " << (opt_.write_files ? dir_.string() : std::string("(no files)"))
              << " (workers " << cfg_.workers << ")\n";
    for (auto it = derived_.begin(); it != derived_.end(); ++it) {
      std::cout << "  " << it.key() << " = " << it.value().dump() << '\n';
    }
    std::cout << std::flush;
  }

  fs::path dir() const { return dir_; }

 private:
  const RunConfig& cfg_;
  ExecuteOptions opt_;
  TaskResult& res_;
  fs::path dir_;
  Json derived_ = Json::object();
  Json tolerances_ = Json::object();
};

Json step_json(const StepControl& s) {
  Json j = {{"abs_tol", s.abs_tol}, {"rel_tol", s.rel_tol}};
  j["max_step"] = std::isfinite(s.max_step) ? Json(s.max_step) : Json("none");
  return j;
}

void model_derived(Json& d, const ModelParams& p, const char* gc_name) {
  const ClassicalAmplitude a = classical_amplitude(p);
  d["alpha"] = complex_json(a.value);
  d["alpha_abs"] = a.modulus;
  d[gc_name] = critical_coupling(p);
  if (p.symmetric()) {
    d["g"] = p.g1;
    d[std::string("g_over_") + gc_name] = p.g1 / critical_coupling(p);
    const DickeParams dk = dicke_params(p);
    d["lambda"] = dk.lambda;
    d["lambda_c"] = critical_coupling_dicke(dk, p.kappa);
  } else {
    d["g1"] = p.g1;
    d["g2"] = p.g2;
  }
  const MembraneFrequencies w = membrane_frequencies(p);
  d["omega1"] = w.omega1;
  d["omega2"] = w.omega2;
}

const std::vector<std::string> kTrajectoryHeader = {
    "t", "re_b1", "im_b1", "re_b2", "im_b2", "re_cav", "im_cav", "delta_n", "total_n",
    "cav_disp_sq"};

Csv trajectory_csv(const Trajectory& tr) {
  Csv csv(kTrajectoryHeader);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const MeanFieldState& s = tr.states[i];
    const ObservableSample o = tr.observables(i);
    csv.row({tr.times[i], s.b1.real(), s.b1.imag(), s.b2.real(), s.b2.imag(), s.cav.real(),
             s.cav.imag(), o.delta_n, o.total_n, o.cavity_displacement_sq});
  }
  return csv;
}

double tail_average(const Trajectory& tr, double fraction) {
  const std::size_t n = tr.size();
  std::size_t first = static_cast<std::size_t>(std::floor((1.0 - fraction) * static_cast<double>(n)));
  first = std::min(first, n - 1);
  double s = 0.0;
  for (std::size_t i = first; i < n; ++i) s += tr.observables(i).cavity_displacement_sq;
  return s / static_cast<double>(n - first);
}

// ---------------------------------------------------------------- steady

void run(Context& ctx, const SteadyPlan& plan) {
  const ModelParams& p = plan.model;
  model_derived(ctx.derived(), p, "g_c");
  ctx.header();
  const double gc = critical_coupling(p);
  Csv csv({"branch", "g", "g_over_gc", "re_d_bar", "im_d_bar", "d_bar_sq", "re_cavity",
           "im_cavity", "delta_n_bar", "delta_n_bar_over_n", "omega_eff", "beta1_sq",
           "beta2_sq"});
  Json rows = Json::array();
  for (Branch b : {Branch::plus, Branch::minus}) {
    const SteadyState s = steady_state(p, p.g(), b);
    const double w = effective_frequency(p.g(), gc, p.j_coupling);
    const ModeAmplitudes m = mode_amplitudes(s.d_bar, w, p);
    const char* name = b == Branch::plus ? "plus" : "minus";
    csv.row({name, p.g(), p.g() / gc, s.d_bar.real(), s.d_bar.imag(), std::norm(s.d_bar),
             s.cavity().real(), s.cavity().imag(), s.delta_n_bar, s.delta_n_bar / p.n_phonon, w,
             m.beta1_sq, m.beta2_sq});
    rows.push_back({{"branch", name},
                    {"d_bar", complex_json(s.d_bar)},
                    {"d_bar_sq", std::norm(s.d_bar)},
                    {"delta_n_bar", s.delta_n_bar},
                    {"omega_eff", w}});
  }
  ctx.write("steady.csv", csv);
  ctx.result().summary["branches"] = rows;
  ctx.result().summary["superradiant"] = p.g() > gc;
}

// ---------------------------------------------------------------- dynamics

IntegrationControls controls_for(const ModelParams& p, bool full, const StepControl& step,
                                 bool default_max_step, double sample_step) {
  IntegrationControls c = full ? full_model_controls(p) : IntegrationControls{};
  c.step.abs_tol = step.abs_tol;
  c.step.rel_tol = step.rel_tol;
  if (!default_max_step) c.step.max_step = step.max_step;
  c.sample_step = sample_step;
  return c;
}

Trajectory simulate(const ModelParams& p, bool full, const InitialSpec& init,
                    const StepControl& step, bool default_max_step, double sample_step,
                    double t_final) {
  const IntegrationControls c = controls_for(p, full, step, default_max_step, sample_step);
  const MeanFieldState s0 = make_initial(init, p, full);
  const cplx ref = full ? classical_amplitude(p).value : cplx{0.0, 0.0};
  return integrate(full ? make_full_rhs(p) : make_effective_rhs(p), s0, {0.0, t_final}, c, ref);
}

void run(Context& ctx, const DynamicsPlan& plan) {
  const ModelParams& p0 = plan.model;
  model_derived(ctx.derived(), p0, "g_c");
  ctx.tolerances() = step_json(controls_for(p0, plan.full, plan.step, plan.default_max_step,
                                            plan.sample_step).step);
  ctx.header();
  Json& summary = ctx.result().summary;
  const double d_bar_sq = p0.symmetric() ? std::norm(steady_state(p0, p0.g(), Branch::plus).d_bar)
                                         : std::nan("");

  if (plan.omega_m_over_nj.empty()) {
    const Trajectory tr = simulate(p0, plan.full, plan.initial, plan.step, plan.default_max_step,
                                   plan.sample_step, plan.t_final);
    ctx.write("trajectory.csv", trajectory_csv(tr));
    const ObservableSample last = tr.observables(tr.size() - 1);
    const ObservableSample first = tr.observables(0);
    summary["final_delta_n_over_n"] = last.delta_n / p0.n_phonon;
    summary["final_cav_disp_sq"] = last.cavity_displacement_sq;
    summary["steady_cav_disp_sq"] = tail_average(tr, plan.full ? 0.2 : 0.05);
    summary["analytic_d_bar_sq"] = json_number(d_bar_sq);
    summary["total_n_relative_drift"] = (last.total_n - first.total_n) / first.total_n;
    return;
  }

  struct Comparison {
    Trajectory full, effective;
    double omega_m;
  };
  auto outcomes = sweep(
      plan.omega_m_over_nj,
      [&](double ratio) {
        ModelParams p = p0;
        p.omega_m = ratio * p.n_phonon * p.j_coupling;
        Comparison c;
        c.omega_m = p.omega_m;
        c.full = simulate(p, true, plan.initial, plan.step, plan.default_max_step,
                          plan.sample_step, plan.t_final);
        c.effective = simulate(p, false, plan.initial, plan.step, true, plan.sample_step,
                               plan.t_final);
        return c;
      },
      ctx.workers());
  Csv csv({"omega_m_over_nj", "omega_m", "status", "full_steady", "effective_steady",
           "analytic_d_bar_sq", "relative_deviation", "message"});
  Json rows = Json::array();
  std::size_t failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double ratio = plan.omega_m_over_nj[i];
    const double omega = ratio * p0.n_phonon * p0.j_coupling;
    if (!outcomes[i].ok()) {
      ++failed;
      csv.row({ratio, omega, "failed", std::nan(""), std::nan(""), d_bar_sq, std::nan(""),
               outcomes[i].error});
      rows.push_back({{"omega_m_over_nj", ratio}, {"status", "failed"},
                      {"message", outcomes[i].error}});
      continue;
    }
    const Comparison& c = *outcomes[i].value;
    const double f = tail_average(c.full, plan.average_fraction);
    const double e = tail_average(c.effective, plan.average_fraction);
    const double dev = std::abs(f - e) / e;
    csv.row({ratio, omega, "ok", f, e, d_bar_sq, dev, ""});
    rows.push_back({{"omega_m_over_nj", ratio},
                    {"status", "ok"},
                    {"full_steady", f},
                    {"effective_steady", e},
                    {"relative_deviation", dev}});
    ctx.write("trajectory_" + std::to_string(i) + ".csv", trajectory_csv(c.full));
    ctx.write("effective_" + std::to_string(i) + ".csv", trajectory_csv(c.effective));
  }
  ctx.write("comparison.csv", csv);
  summary["comparison"] = rows;
  summary["analytic_d_bar_sq"] = json_number(d_bar_sq);
  summary["failed_points"] = failed;
  if (failed == outcomes.size()) {
    ctx.result().exit_code = exit_numerical_failure;
    ctx.result().message = "every comparison run failed";
  }
}

// ---------------------------------------------------------------- transition sweep

void run(Context& ctx, const TransitionPlan& plan) {
  const ModelParams& p0 = plan.model;
  const double gc = critical_coupling(p0);
  const ClassicalAmplitude a = classical_amplitude(p0);
  ctx.derived()["g_c"] = gc;
  ctx.derived()["alpha"] = complex_json(a.value);
  ctx.derived()["alpha_abs"] = a.modulus;
  ctx.tolerances() =
      step_json(controls_for(p0, plan.full, plan.step, plan.default_max_step, 1.0).step);
  ctx.header();

  struct Point {
    double delta_n, disp_sq;
  };
  auto outcomes = sweep(
      plan.g_over_gc,
      [&](double r) {
        const ModelParams p = p0.with_coupling(r * gc);
        const Trajectory tr = simulate(p, plan.full, plan.initial, plan.step,
                                       plan.default_max_step, plan.t_final, plan.t_final);
        const ObservableSample o = tr.observables(tr.size() - 1);
        return Point{o.delta_n, o.cavity_displacement_sq};
      },
      ctx.workers());

  Csv csv({"g_over_gc", "g", "status", "delta_n_over_n", "cav_disp_sq", "analytic_delta_n_over_n",
           "analytic_d_bar_sq", "rel_err_delta_n", "rel_err_d_sq", "message"});
  std::size_t failed = 0;
  double worst_below = 0.0, worst_dn = 0.0, worst_d = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double r = plan.g_over_gc[i];
    const ModelParams p = p0.with_coupling(r * gc);
    const SteadyState ss = steady_state(p, p.g(), Branch::plus);
    const double an_dn = std::abs(ss.delta_n_bar) / p.n_phonon;
    const double an_d = std::norm(ss.d_bar);
    if (!outcomes[i].ok()) {
      ++failed;
      csv.row({r, p.g(), "failed", std::nan(""), std::nan(""), an_dn, an_d, std::nan(""),
               std::nan(""), outcomes[i].error});
      continue;
    }
    const Point& pt = *outcomes[i].value;
    const double dn = std::abs(pt.delta_n) / p.n_phonon;
    const double e_dn = an_dn > 0.0 ? std::abs(dn - an_dn) / an_dn : std::nan("");
    const double e_d = an_d > 0.0 ? std::abs(pt.disp_sq - an_d) / an_d : std::nan("");
    csv.row({r, p.g(), "ok", pt.delta_n / p.n_phonon, pt.disp_sq, an_dn, an_d, e_dn, e_d, ""});
    if (r < 1.0) worst_below = std::max(worst_below, dn);
    if (r >= 1.1) {
      worst_dn = std::max(worst_dn, e_dn);
      worst_d = std::max(worst_d, e_d);
    }
  }
  ctx.write("sweep.csv", csv);
  Json& s = ctx.result().summary;
  s["points"] = plan.g_over_gc.size();
  s["failed_points"] = failed;
  s["max_abs_delta_n_over_n_below_gc"] = worst_below;
  s["max_rel_err_delta_n_above_1p1_gc"] = worst_dn;
  s["max_rel_err_d_sq_above_1p1_gc"] = worst_d;
  if (failed == outcomes.size()) {
    ctx.result().exit_code = exit_numerical_failure;
    ctx.result().message = "every sweep point failed";
  }
}

// ---------------------------------------------------------------- dtc run

struct ResolvedSchedule {
  PulseSchedule schedule;
  double t1;
  bool automatic;
};

ResolvedSchedule resolve_schedule(const ScheduleSpec& spec, const ModelParams& p,
                                  const MeanFieldState& initial, Branch branch,
                                  const StepControl& step) {
  const PulseSchedule probe = build_schedule(spec.delta1, p.delta, p.drive, p.kappa, 1.0, spec.t2);
  double t1 = 0.0;
  if (spec.t1) {
    t1 = *spec.t1;
  } else {
    FlipSearchControls fc;
    fc.step = step;
    t1 = find_flipping_time(p, spec.delta1, probe.phase1.drive, initial, branch,
                            spec.flip_search_horizon, fc)
             .t1;
  }
  return {build_schedule(spec.delta1, p.delta, p.drive, p.kappa, t1, spec.t2), t1, !spec.t1};
}

void pulsed_derived(Json& d, const ModelParams& p, const ScheduleSpec& s) {
  model_derived(d, p, "g_c2");
  const double alpha_sq = std::norm(classical_amplitude(p).value);
  d["g_c1"] = critical_coupling(s.delta1, p.kappa, alpha_sq, p.n_phonon, p.j_coupling);
  const PulseSchedule probe = build_schedule(s.delta1, p.delta, p.drive, p.kappa, 1.0, s.t2);
  d["drive1"] = complex_json(probe.phase1.drive);
}

void run(Context& ctx, const DtcPlan& plan) {
  const ModelParams& p = plan.model;
  pulsed_derived(ctx.derived(), p, plan.schedule);
  const MeanFieldState init = make_initial(plan.initial, p, false);
  const ResolvedSchedule rs =
      resolve_schedule(plan.schedule, p, init, plan.initial.branch, plan.step);
  ctx.derived()["t1"] = rs.t1;
  ctx.derived()["period"] = rs.schedule.period();
  ctx.tolerances() = step_json(plan.step);
  ctx.header();

  ProtocolControls pc;
  pc.step = plan.step;
  pc.sample_step = plan.sample_step;
  const ProtocolResult res = run_protocol(rs.schedule, p, plan.n_periods, init, pc);
  const StroboscopicRecord& rec = res.record;
  const DtcVerdict v = classify_dtc(rec, plan.criteria);
  const double T = rs.schedule.period();
  const std::vector<bool> alt = rec.alternation_flags();

  const bool damped = p.gamma > 0.0;
  const double gc2 = critical_coupling(p);
  const double T0 = damped ? damped_lifetime(p.gamma, p.g(), gc2) : 0.0;
  Csv strobe({"k", "t", "delta_n", "delta_n_over_n", "alternates"});
  Csv envelope({"k", "t", "delta_n_over_n", "envelope_delta_n_over_n", "envelope_g_c2"});
  double env_dev = 0.0;
  std::size_t env_points = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double t = static_cast<double>(rec.k[i]) * T;
    const double x = rec.delta_n[i] / rec.n_reference;
    strobe.row({rec.k[i], t, rec.delta_n[i], x, bool(alt[i])});
    if (!damped) continue;
    const DampedEnvelope e = damped_envelope(t, p, p.g(), p.n_phonon);
    const double env = e.delta_n_bar / p.n_phonon;
    envelope.row({rec.k[i], t, x, env, e.g_c2});
    if (rec.k[i] >= 1 && t < 0.8 * T0 && env > 0.0) {
      env_dev = std::max(env_dev, std::abs(std::abs(x) - env) / env);
      ++env_points;
    }
  }
  ctx.write("stroboscopic.csv", strobe);
  if (damped) ctx.write("envelope.csv", envelope);

  const std::size_t n = plan.fourier_periods ? plan.fourier_periods
                                             : static_cast<std::size_t>(plan.n_periods);
  std::vector<double> theta(plan.fourier_bins);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta[i] = static_cast<double>(i) / static_cast<double>(theta.size() - 1);
  }
  const std::vector<cplx> S = fourier_spectrum(rec, n, theta);
  const double peak = std::abs(fourier_spectrum(rec, n, {0.5})[0]);
  Csv fourier({"theta", "re_s", "im_s", "abs_s"});
  for (std::size_t i = 0; i < theta.size(); ++i) {
    fourier.row({theta[i], S[i].real(), S[i].imag(), std::abs(S[i])});
  }
  ctx.write("fourier.csv", fourier);
  // off-peak maximum over the DFT bins j / n
  std::vector<double> bins;
  for (std::size_t j = 0; j < n; ++j) {
    const double th = static_cast<double>(j) / static_cast<double>(n);
    if (std::abs(th - 0.5) >= 0.5 / static_cast<double>(n)) bins.push_back(th);
  }
  double off = 0.0;
  for (const cplx& v : fourier_spectrum(rec, n, bins)) off = std::max(off, std::abs(v));
  if (plan.sample_step > 0.0) ctx.write("trajectory.csv", trajectory_csv(res.trajectory));

  Json& s = ctx.result().summary;
  s["t1"] = rs.t1;
  s["t1_automatic"] = rs.automatic;
  s["period"] = T;
  s["is_dtc"] = v.is_dtc;
  s["mean_amplitude"] = v.mean_amplitude;
  s["alternation_fraction"] = v.alternation_fraction;
  std::size_t all_alt = 0;
  for (std::size_t i = 1; i < alt.size(); ++i) all_alt += alt[i] ? 1 : 0;
  s["alternating_pairs"] = all_alt;
  s["pairs"] = rec.size() - 1;
  double amp = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) amp += std::abs(rec.delta_n[i]);
  s["mean_abs_delta_n_over_n"] = amp / static_cast<double>(rec.size() - 1) / rec.n_reference;
  s["steady_delta_n_bar_over_n"] = std::abs(steady_state(p, p.g(), Branch::plus).delta_n_bar) /
                                   p.n_phonon;
  s["fourier_periods"] = n;
  s["fourier_peak"] = peak;
  s["fourier_max_off_peak"] = off;
  s["fourier_peak_ratio"] = off > 0.0 ? Json(peak / off) : Json(nullptr);
  if (damped) {
    const long last = last_alternating_period(rec, plan.envelope_floor);
    s["lifetime_t0"] = T0;
    s["last_alternating_period"] = last;
    s["last_alternating_time"] = static_cast<double>(last) * T;
    s["lifetime_relative_error"] = T0 > 0.0 ? std::abs(last * T - T0) / T0 : std::nan("");
    s["envelope_max_relative_deviation"] = env_dev;
    s["envelope_points"] = env_points;
  }
}

// ---------------------------------------------------------------- phase diagram

std::string region_label(const PhaseDiagramSetup& st, const PhasePoint& pt) {
  if (st.axes != DiagramAxes::detunings || pt.status != PointStatus::ok) return "";
  const double g = st.base.g1;
  if (g <= pt.g_c2) return "below_gc2";
  return g < pt.g_c1 ? "between" : "above_gc1";
}

void run(Context& ctx, const DiagramPlan& plan) {
  const PhaseDiagramSetup& st = plan.setup;
  ctx.derived()["g"] = st.base.g1;
  ctx.derived()["alpha_abs"] = classical_amplitude(st.base).modulus;
  if (st.axes == DiagramAxes::couplings) {
    ctx.derived()["g_c2"] = critical_coupling(st.base);
    ctx.derived()["g_c1"] = critical_coupling(st.delta1, st.base.kappa,
                                              std::norm(classical_amplitude(st.base).value),
                                              st.base.n_phonon, st.base.j_coupling);
  }
  ctx.tolerances() = step_json(st.step);
  ctx.header();

  const std::vector<PhasePoint> pts = phase_diagram(st, ctx.workers());
  Csv csv({"axis1", "axis2", "delta1", "delta2", "g1", "g2", "status", "is_dtc",
           "mean_amplitude", "alternation_fraction", "g_c1", "g_c2", "region", "t1", "message"});
  Json by_region = Json::object();
  std::size_t failed = 0, dtc = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const PhasePoint& pt = pts[i];
    const std::size_t i1 = i / st.axis2.size(), i2 = i % st.axis2.size();
    const bool det = st.axes == DiagramAxes::detunings;
    const double d1 = det ? pt.axis1 : st.delta1, d2 = det ? pt.axis2 : st.base.delta;
    const double g1 = det ? st.base.g1 : pt.axis1, g2 = det ? st.base.g2 : pt.axis2;
    const bool ok = pt.status == PointStatus::ok;
    const std::string region = region_label(st, pt);
    csv.row({plan.axis1_input[i1], plan.axis2_input[i2], d1, d2, g1, g2, ok ? "ok" : "failed",
             ok && pt.verdict.is_dtc, pt.verdict.mean_amplitude, pt.verdict.alternation_fraction,
             pt.g_c1, pt.g_c2, region, pt.t1_used, pt.message});
    if (!ok) ++failed;
    if (ok && pt.verdict.is_dtc) ++dtc;
    if (!region.empty()) {
      Json& r = by_region[region];
      if (r.is_null()) r = {{"points", 0}, {"dtc", 0}};
      r["points"] = r["points"].get<long>() + 1;
      r["dtc"] = r["dtc"].get<long>() + (pt.verdict.is_dtc ? 1 : 0);
    }
  }
  ctx.write("phase_diagram.csv", csv);
  Json& s = ctx.result().summary;
  s["points"] = pts.size();
  s["dtc_points"] = dtc;
  s["failed_points"] = failed;
  s["regions"] = by_region;
  if (failed == pts.size()) {
    ctx.result().exit_code = exit_numerical_failure;
    ctx.result().message = "every grid point failed";
  }
}

// ---------------------------------------------------------------- quantum

struct QuantumOutcome {
  HilbertSpec spec;
  double t1 = 0.0;
  double period = 0.0;
  QuantumRun run;
  StroboscopicRecord mean_field;
};

QuantumOutcome quantum_single(const ModelParams& p, const ScheduleSpec& sch,
                              const QuantumSpec& q, long n_periods) {
  QuantumOutcome out;
  const MeanFieldState mf = broken_symmetry_state(p, p.g(), Branch::plus);
  const ResolvedSchedule rs = resolve_schedule(sch, p, mf, Branch::plus, StepControl{});
  out.t1 = rs.t1;
  out.period = rs.schedule.period();
  const int n = static_cast<int>(std::lround(p.n_phonon));
  out.spec.n_phonon = n;
  out.spec.fock_cutoff = q.fock_cutoff ? *q.fock_cutoff : default_fock_cutoff(std::norm(mf.cav), q.headroom);
  const QuantumState init = initial_state(out.spec, mf);
  out.run = run_quantum_protocol(out.spec, rs.schedule, p, n_periods, init, q.controls);
  out.mean_field = run_protocol(rs.schedule, p, n_periods, mf).record;
  return out;
}

Csv quantum_strobe_csv(const QuantumOutcome& o) {
  Csv csv({"k", "t", "jx_over_n", "re_d", "im_d", "photons", "purity", "trace_error",
           "hermiticity_error", "min_eigenvalue", "top_level_population",
           "mean_field_delta_n_over_n"});
  const double n = o.spec.n_phonon;
  for (std::size_t k = 0; k < o.run.stroboscopic.size(); ++k) {
    const Observables& s = o.run.stroboscopic[k];
    const StateDiagnostics& d = o.run.diagnostics[k];
    csv.row({static_cast<long>(k), s.time, s.jx / n, s.d.real(), s.d.imag(), s.photons, s.purity,
             d.trace_error, d.hermiticity_error, d.min_eigenvalue, d.top_level_population,
             o.mean_field.delta_n[k] / o.mean_field.n_reference});
  }
  return csv;
}

Json quantum_diagnostics(const QuantumOutcome& o) {
  double tr = 0.0, herm = 0.0, lmin = 0.0, top = 0.0;
  for (const StateDiagnostics& d : o.run.diagnostics) {
    tr = std::max(tr, std::abs(d.trace_error));
    herm = std::max(herm, d.hermiticity_error);
    lmin = std::min(lmin, d.min_eigenvalue);
    top = std::max(top, d.top_level_population);
  }
  return {{"max_trace_error", tr},
          {"max_hermiticity_error", herm},
          {"min_eigenvalue", lmin},
          {"max_top_level_population", top},
          {"warnings", o.run.warnings}};
}

void run(Context& ctx, const QuantumPlan& plan) {
  const ModelParams& p = plan.model;
  pulsed_derived(ctx.derived(), p, plan.schedule);
  ctx.tolerances() = step_json(plan.quantum.controls.step);
  ctx.header();
  const QuantumOutcome o = quantum_single(p, plan.schedule, plan.quantum, plan.n_periods);
  ctx.say("  fock_cutoff = " + std::to_string(o.spec.fock_cutoff) +
          ", dimension = " + std::to_string(o.spec.dimension()));

  Csv obs({"t", "re_d", "im_d", "photons", "jx_over_n", "jy_over_n", "jz_over_n", "purity",
           "trace"});
  const double n = o.spec.n_phonon;
  for (const Observables& s : o.run.samples) {
    obs.row({s.time, s.d.real(), s.d.imag(), s.photons, s.jx / n, s.jy / n, s.jz / n, s.purity,
             s.trace});
  }
  ctx.write("observables.csv", obs);
  ctx.write("stroboscopic.csv", quantum_strobe_csv(o));
  Json& s = ctx.result().summary;
  s["t1"] = o.t1;
  s["period"] = o.period;
  s["fock_cutoff"] = o.spec.fock_cutoff;
  s["dimension"] = o.spec.dimension();
  Json jx = Json::array();
  for (const Observables& x : o.run.stroboscopic) jx.push_back(x.jx / n);
  s["stroboscopic_jx_over_n"] = jx;
  s["diagnostics"] = quantum_diagnostics(o);
}

void run(Context& ctx, const LifetimePlan& plan) {
  pulsed_derived(ctx.derived(), plan.model, plan.schedule);
  ctx.derived().erase("g");
  ctx.derived().erase("g_c2");
  ctx.derived().erase("lambda");
  ctx.derived().erase("lambda_c");
  ctx.derived().erase("g_c1");
  ctx.derived()["g_over_gc2"] = plan.coupling_over_gc2;
  ctx.tolerances() = step_json(plan.quantum.controls.step);
  ctx.header();

  std::vector<std::size_t> idx(plan.n_values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto outcomes = sweep(
      idx,
      [&](std::size_t i) {
        ModelParams p = plan.model;
        p.n_phonon = plan.n_values[i];
        p = p.with_coupling(plan.coupling_over_gc2 * critical_coupling(p));
        return quantum_single(p, plan.schedule, plan.quantum, plan.periods[i]);
      },
      ctx.workers());

  Csv csv({"n_phonon", "status", "fock_cutoff", "dimension", "t1", "periods", "lifetime", "slope",
           "intercept", "points", "alternations", "message"});
  Json rows = Json::array();
  std::size_t failed = 0;
  std::vector<double> lifetimes;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int N = plan.n_values[i];
    if (!outcomes[i].ok()) {
      ++failed;
      csv.row({N, "failed", 0, 0, std::nan(""), plan.periods[i], std::nan(""), std::nan(""),
               std::nan(""), 0, 0, outcomes[i].error});
      rows.push_back({{"n_phonon", N}, {"status", "failed"}, {"message", outcomes[i].error}});
      continue;
    }
    const QuantumOutcome& o = *outcomes[i].value;
    ctx.write("stroboscopic_N" + std::to_string(N) + ".csv", quantum_strobe_csv(o));
    std::vector<double> t, x;
    for (const Observables& s : o.run.stroboscopic) {
      t.push_back(s.time);
      x.push_back(s.jx / N);
    }
    Json row = {{"n_phonon", N},
                {"fock_cutoff", o.spec.fock_cutoff},
                {"dimension", o.spec.dimension()},
                {"t1", o.t1},
                {"stroboscopic_jx_over_n", x},
                {"diagnostics", quantum_diagnostics(o)}};
    try {
      const LifetimeFit fit = extract_lifetime(t, x, plan.floor, plan.min_alternations, plan.first);
      csv.row({N, "ok", o.spec.fock_cutoff, o.spec.dimension(), o.t1, plan.periods[i],
               fit.lifetime, fit.slope, fit.intercept, fit.points, fit.alternations, ""});
      row["status"] = "ok";
      row["lifetime"] = fit.lifetime;
      row["fit_points"] = fit.points;
      row["alternations"] = fit.alternations;
      lifetimes.push_back(fit.lifetime);
    } catch (const std::exception& e) {
      ++failed;
      csv.row({N, "failed", o.spec.fock_cutoff, o.spec.dimension(), o.t1, plan.periods[i],
               std::nan(""), std::nan(""), std::nan(""), 0, 0, e.what()});
      row["status"] = "failed";
      row["message"] = e.what();
    }
    rows.push_back(row);
  }
  ctx.write("lifetimes.csv", csv);
  Json& s = ctx.result().summary;
  s["runs"] = rows;
  s["failed_points"] = failed;
  bool increasing = failed == 0 && lifetimes.size() >= 2;
  for (std::size_t i = 1; increasing && i < lifetimes.size(); ++i) {
    increasing = lifetimes[i] > lifetimes[i - 1];
  }
  s["lifetime_increases_with_n"] = increasing;
  if (failed > 0) {
    ctx.result().exit_code = exit_numerical_failure;
    ctx.result().message = std::to_string(failed) + " of " + std::to_string(idx.size()) +
                           " lifetimes could not be extracted";
  }
}

// ---------------------------------------------------------------- spectrum

Json derivatives_json(const CouplingDerivatives& d) {
  return {{"k0", d.k0},          {"dk_dx1", d.dk_dx1},   {"dk_dx2", d.dk_dx2},
          {"d2k_dx1", d.d2k_dx1}, {"d2k_dx2", d.d2k_dx2}, {"d2k_dx1dx2", d.d2k_dx1dx2}};
}

void geometry_derived(Json& d, const GeometrySpec& g) {
  d["phi"] = g.problem.phi();
  d["x1"] = g.problem.x1;
  d["x2"] = g.problem.x2;
  if (g.equilibrium) {
    d["k_equilibrium"] = g.equilibrium->k;
    d["residual_at_equilibrium"] = spectrum_residual(g.equilibrium->k, g.problem);
  }
}

void run(Context& ctx, const SpectrumSolvePlan& plan) {
  const SpectrumProblem& prob = plan.geometry.problem;
  geometry_derived(ctx.derived(), plan.geometry);
  ctx.tolerances() = {{"root_tolerance", plan.roots.tolerance}};
  ctx.header();
  const double L = prob.half_length;

  const RootScan scan = solve_k(prob, plan.k_lo, plan.k_hi, plan.roots);
  Csv roots({"index", "k", "k_times_l", "residual", "kind"});
  Csv derivs({"k0", "status", "dk_dx1", "dk_dx2", "d2k_dx1", "d2k_dx2", "d2k_dx1dx2", "message"});
  Json root_list = Json::array();
  for (std::size_t i = 0; i < scan.roots.size(); ++i) {
    const double k = scan.roots[i];
    roots.row({i, k, k * L, spectrum_residual(k, prob), "root"});
    root_list.push_back(k);
    try {
      const CouplingDerivatives d = coupling_derivatives(prob, k, plan.derivative_step);
      derivs.row({k, "ok", d.dk_dx1, d.dk_dx2, d.d2k_dx1, d.d2k_dx2, d.d2k_dx1dx2, ""});
    } catch (const std::exception& e) {
      const double nan = std::nan("");
      derivs.row({k, "failed", nan, nan, nan, nan, nan, e.what()});
    }
  }
  for (std::size_t i = 0; i < scan.tangential.size(); ++i) {
    const double k = scan.tangential[i];
    roots.row({scan.roots.size() + i, k, k * L, spectrum_residual(k, prob), "tangential"});
  }
  ctx.write("roots.csv", roots);
  ctx.write("derivatives.csv", derivs);
  Json& s = ctx.result().summary;
  s["roots"] = root_list;
  s["tangential"] = scan.tangential;
  if (plan.geometry.equilibrium) {
    const CouplingDerivatives d =
        coupling_derivatives(prob, plan.geometry.equilibrium->k, plan.derivative_step);
    s["equilibrium"] = {{"k", plan.geometry.equilibrium->k},
                        {"x1", prob.x1},
                        {"x2", prob.x2},
                        {"residual", spectrum_residual(plan.geometry.equilibrium->k, prob)},
                        {"derivatives", derivatives_json(d)}};
  }

  if (!plan.slice_dx.empty()) {
    Csv slices({"membrane", "dx", "status", "root_index", "k", "k_times_l"});
    for (int m : {1, 2}) {
      for (double dx : plan.slice_dx) {
        const SpectrumProblem moved = m == 1 ? prob.displaced(dx, 0.0) : prob.displaced(0.0, dx);
        try {
          moved.validate();
          const RootScan rs = solve_k(moved, plan.k_lo, plan.k_hi, plan.roots);
          for (std::size_t i = 0; i < rs.roots.size(); ++i) {
            slices.row({m, dx, "ok", i, rs.roots[i], rs.roots[i] * L});
          }
        } catch (const std::exception&) {
          const double nan = std::nan("");
          slices.row({m, dx, "invalid", 0, nan, nan});
        }
      }
    }
    ctx.write("slices.csv", slices);
  }
}

void run(Context& ctx, const SpectrumScanPlan& plan) {
  const SpectrumProblem& prob = plan.geometry.problem;
  geometry_derived(ctx.derived(), plan.geometry);
  const double seed = plan.branch_seed ? *plan.branch_seed : plan.geometry.equilibrium->k;
  ctx.derived()["branch_seed"] = seed;
  ctx.header();
  const double L = prob.half_length;

  const SpectrumSurface surf = spectrum_scan(prob, plan.dx1, plan.dx2, seed, ctx.workers());
  Csv csv({"dx1", "dx2", "valid", "dk", "l_dk"});
  std::size_t invalid = 0;
  for (std::size_t i = 0; i < surf.dx1.size(); ++i) {
    for (std::size_t j = 0; j < surf.dx2.size(); ++j) {
      const bool ok = surf.ok(i, j);
      if (!ok) ++invalid;
      const double dk = ok ? surf.at(i, j) : std::nan("");
      csv.row({surf.dx1[i], surf.dx2[j], ok, dk, dk * L});
    }
  }
  ctx.write("surface.csv", csv);

  // restrict the fit to small displacements
  SpectrumSurface near;
  near.k0 = surf.k0;
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < surf.dx1.size(); ++i) {
    if (std::abs(surf.dx1[i]) <= plan.fit_radius * (1 + 1e-12)) rows.push_back(i);
  }
  for (std::size_t j = 0; j < surf.dx2.size(); ++j) {
    if (std::abs(surf.dx2[j]) <= plan.fit_radius * (1 + 1e-12)) cols.push_back(j);
  }
  for (std::size_t i : rows) near.dx1.push_back(surf.dx1[i]);
  for (std::size_t j : cols) near.dx2.push_back(surf.dx2[j]);
  for (std::size_t i : rows) {
    for (std::size_t j : cols) {
      near.dk.push_back(surf.dk[i * surf.dx2.size() + j]);
      near.valid.push_back(surf.ok(i, j));
    }
  }
  Json& s = ctx.result().summary;
  s["k0"] = surf.k0;
  s["invalid_points"] = invalid;
  s["messages"] = surf.messages;
  const CouplingDerivatives d = coupling_derivatives(prob, surf.k0, plan.derivative_step);
  s["derivatives"] = derivatives_json(d);
  if (near.dx1.size() >= 3 && near.dx2.size() >= 3) {
    const SurfaceFit fit = fit_quadratic_surface(near);
    s["fit"] = {{"b1", fit.b1},   {"b2", fit.b2},   {"a11", fit.a11},
                {"a22", fit.a22}, {"a12", fit.a12}, {"rms_residual", fit.rms_residual},
                {"points", fit.points}, {"radius", plan.fit_radius}};
    s["fit_curvature_error_x1"] = std::abs(2.0 * fit.a11 - d.d2k_dx1) / std::abs(d.d2k_dx1);
    s["fit_curvature_error_x2"] = std::abs(2.0 * fit.a22 - d.d2k_dx2) / std::abs(d.d2k_dx2);
    s["fit_antisymmetry"] = std::abs(fit.a11 + fit.a22) / std::abs(fit.a11);
  } else {
    s["fit"] = nullptr;
    s["fit_message"] = "fewer than 3 x 3 grid points within fit_radius";
  }
}

// ---------------------------------------------------------------- validate

void run(Context& ctx, const ValidatePlan&) {
  ctx.header();
  const std::vector<ValidationCheck> checks = run_validation_suite(ctx.workers());
  ctx.say(format_validation_table(checks));
  Csv csv({"module", "check", "passed", "seconds", "detail"});
  Json rows = Json::array();
  for (const ValidationCheck& c : checks) {
    csv.row({c.module, c.name, c.passed, c.seconds, c.detail});
    rows.push_back({{"module", c.module}, {"check", c.name}, {"passed", c.passed},
                    {"detail", c.detail}});
  }
  ctx.write("validation.csv", csv);
  ctx.result().summary["checks"] = rows;
  ctx.result().summary["all_passed"] = all_passed(checks);
  if (!all_passed(checks)) {
    ctx.result().exit_code = exit_validation_failure;
    ctx.result().message = "validation suite failed";
  }
}

}  // namespace

TaskResult execute(const RunConfig& config, const ExecuteOptions& options) {
  TaskResult res;
  Context ctx(config, options, res);
  const auto t0 = std::chrono::steady_clock::now();
  bool dir_ready = false;
  try {
    Json resolved;
    const Plan plan = build_plan(config.task, config.parameters, resolved);
    ctx.prepare();
    dir_ready = true;
    std::visit([&](const auto& p) { run(ctx, p); }, plan);
  } catch (const ConfigError& e) {
    res.exit_code = exit_config_error;
    res.message = e.what();
  } catch (const InvalidArgument& e) {
    res.exit_code = exit_config_error;
    res.message = e.what();
  } catch (const NumericalFailure& e) {
    res.exit_code = exit_numerical_failure;
    std::ostringstream msg;
    msg << e.what() << " (last good time " << e.last_good_time() << ")";
    res.message = msg.str();
  } catch (const fs::filesystem_error& e) {
    res.exit_code = exit_config_error;
    res.message = std::string("output: ") + e.what();
  } catch (const std::exception& e) {
    res.exit_code = exit_numerical_failure;
    res.message = e.what();
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Json& m = res.metadata;
  m["artifact_version"] = artifact_version();
  m["task"] = std::string(task_name(config.task));
  if (!config.preset.empty()) m["preset"] = config.preset;
  m["config"] = {{"task", std::string(task_name(config.task))},
                 {"output", config.output},
                 {"workers", config.workers},
                 {"parameters", config.parameters}};
  m["derived"] = ctx.derived();
  m["tolerances"] = ctx.tolerances();
  m["units"] = "frequencies, rates and couplings in J; times in 1/J";
  m["wall_time_seconds"] = wall;
  m["exit_code"] = res.exit_code;
  if (!res.message.empty()) m["message"] = res.message;
  m["summary"] = res.summary;
  std::vector<std::string> names;
  for (const std::string& f : res.files) names.push_back(fs::path(f).filename().string());
  m["files"] = names;
  if (options.write_files && dir_ready) {
    try {
      const fs::path p = ctx.dir() / "metadata.json";
      std::ofstream(p) << m.dump(2) << '\n';
      res.files.push_back(p.string());
    } catch (const std::exception&) {
    }
  }
  if (!options.quiet) {
    if (res.exit_code == exit_ok) {
      std::cout << "done in " << format_double(std::round(wall * 100.0) / 100.0) << " s, "
                << res.files.size() << " files\n";
    } else {
      std::cerr << "error (exit " << res.exit_code << "): " << res.message << '\n';
    }
  }
  return res;
}

}  // namespace optodtc
