#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cli_plan.hpp"
#include "optodtc/error.hpp"

namespace optodtc {

namespace {

enum class KeyType {
  number,
  integer,
  boolean,
  choice,
  complex,
  grid,
  number_or_auto,
  integer_or_auto,
  integer_list,
};

struct KeySpec {
  const char* name;
  KeyType type;
  const char* fallback;
  const char* doc;
};

struct SectionSpec {
  const char* name;
  const char* doc;
  std::vector<KeySpec> keys;

  const KeySpec* find(std::string_view key) const {
    for (const KeySpec& k : keys) {
      if (key == k.name) return &k;
    }
    return nullptr;
  }
};

using K = KeyType;

const std::vector<SectionSpec>& sections() {
  static const std::vector<SectionSpec> table = {
      {"model",
       "Physical parameters. Pulsed tasks take the relaxation-phase (phase 2) detuning and drive "
       "here. Set at most one coupling: g, g_over_gc / g_over_gc2, or the pair g1, g2.",
       {
           {"delta", K::number, "20", "cavity detuning Delta [J]"},
           {"drive", K::complex, "2000", "drive amplitude A [J]; number or [re, im]"},
           {"kappa", K::number, "10", "cavity decay [J]"},
           {"j_coupling", K::number, "1", "membrane-membrane coupling J (unit of frequency)"},
           {"omega_m", K::number, "1e4", "matched mechanical frequency [J]"},
           {"omega_m_over_nj", K::number, "-", "alternative to omega_m: omega_m / (N J)"},
           {"gamma", K::number, "0", "membrane decay [J]"},
           {"n_phonon", K::number, "200",
            "total phonon number N (an integer for quantum tasks)"},
           {"g", K::number, "-", "symmetric second-order coupling [J]"},
           {"g_over_gc", K::number, "-", "g in units of g_c (unpulsed tasks)"},
           {"g_over_gc2", K::number, "-",
            "g in units of the relaxation-phase critical coupling g_c2 (pulsed tasks)"},
           {"g1", K::number, "-", "coupling of membrane 1 [J] (with g2)"},
           {"g2", K::number, "-", "coupling of membrane 2 [J] (with g1)"},
       }},
      {"schedule",
       "Two-phase pulse: (delta1, A1) for t1, then the model's (delta, drive) for t2; A1 keeps "
       "the classical amplitude alpha fixed.",
       {
           {"delta1", K::number, "100", "flipping-phase detuning [J]"},
           {"t1", K::number_or_auto, "auto",
            "flipping time [1/J]; auto: first minimum of branch * dN in phase 1"},
           {"t2", K::number, "100", "relaxation time [1/J]"},
           {"flip_search_horizon", K::number, "20", "search window for t1 = auto [1/J]"},
       }},
      {"initial",
       "Mean-field initial state.",
       {
           {"kind", K::choice, "task dependent",
            "symmetric (b1 = b2 = b0) or broken (stationary broken-symmetry state)"},
           {"branch", K::choice, "plus", "plus or minus; broken states only"},
           {"b0", K::complex, "10", "membrane amplitude of the symmetric state"},
           {"symmetry_seed", K::number, "-1e-6",
            "cavity displacement seeding the symmetric state: d(0) = seed (effective), "
            "a(0) = alpha + seed e^{i arg alpha} (full)"},
           {"cavity", K::complex, "-", "explicit initial cavity amplitude (d or a)"},
       }},
      {"integrator",
       "Adaptive Dormand-Prince 5(4) controls.",
       {
           {"abs_tol", K::number, "1e-10", "absolute tolerance"},
           {"rel_tol", K::number, "1e-10", "relative tolerance"},
           {"max_step", K::number_or_auto, "auto",
            "step cap [1/J]; auto: 2 pi / (50 omega_m) for the full model, none otherwise"},
           {"sample_step", K::number, "task dependent",
            "spacing of recorded samples [1/J]; 0 disables dense output where allowed"},
       }},
      {"run",
       "Run length.",
       {
           {"t_final", K::number, "80", "final time [1/J]"},
           {"n_periods", K::integer, "task dependent", "number of drive periods T = t1 + t2"},
       }},
      {"criteria",
       "DTC classification over the stroboscopic record.",
       {
           {"discard", K::integer, "10", "leading periods ignored"},
           {"window", K::integer, "40", "periods classified after the discarded ones; 0 = all"},
           {"amplitude_threshold", K::number, "0.05", "minimum mean |dN(kT)| / N"},
       }},
      {"fourier",
       "Stroboscopic discrete Fourier transform S(theta) on theta in [0, 1].",
       {
           {"periods", K::integer, "0", "number n of trailing periods; 0 = all"},
           {"bins", K::integer, "1001", "theta grid points"},
       }},
      {"comparison",
       "Full-model versus effective-model steady state over several omega_m.",
       {
           {"omega_m_over_nj", K::grid, "[]", "omega_m / (N J) values; empty: single run"},
           {"average_fraction", K::number, "0.2",
            "trailing fraction of the run averaged for steady values"},
       }},
      {"sweep",
       "Coupling sweep of the transition task.",
       {
           {"g_over_gc", K::grid, "linspace(0.5, 2, 16)", "g / g_c values"},
           {"model", K::choice, "effective", "effective or full"},
       }},
      {"diagram",
       "Phase-diagram grid.",
       {
           {"axes", K::choice, "detunings",
            "detunings: (delta1, delta) [J]; couplings: (g1, g2)"},
           {"axis1", K::grid, "-", "delta1 values or g1 values"},
           {"axis2", K::grid, "-", "delta values or g2 values"},
           {"relative", K::boolean, "true",
            "couplings axes in units of the model coupling g"},
       }},
      {"quantum",
       "Master-equation simulation of the effective Hamiltonian.",
       {
           {"fock_cutoff", K::integer_or_auto, "auto",
            "n_max; auto: smallest n with coherent tail < 1e-8 plus headroom"},
           {"headroom", K::integer, "10", "extra Fock levels of the automatic cutoff"},
           {"rate_factor", K::number, "2", "cavity decay rate Gamma = rate_factor * kappa"},
           {"abs_tol", K::number, "1e-9", "absolute tolerance"},
           {"rel_tol", K::number, "1e-8", "relative tolerance"},
           {"sample_step", K::number, "0.05", "observable sampling [1/J]; 0 = stroboscopic only"},
           {"check_positivity", K::boolean, "true", "smallest eigenvalue at every period"},
           {"positivity_tolerance", K::number, "1e-7", "warning threshold for -lambda_min"},
           {"n_values", K::integer_list, "[10, 24]", "phonon numbers N (lifetimes task)"},
           {"periods", K::integer_list, "-",
            "periods per N (lifetimes task); defaults to run length 10 for every N"},
       }},
      {"lifetime",
       "Lifetime fit of the stroboscopic <Jx>/N.",
       {
           {"floor", K::number, "1e-3", "fit window ends at the first |<Jx>|/N below this"},
           {"min_alternations", K::integer, "10", "sign changes required over the record"},
           {"first", K::integer, "1", "first period included in the fit"},
       }},
      {"geometry",
       "Two-membrane cavity of length 2L. Give x1 and x2, or the equilibrium indices m0, m1, m2.",
       {
           {"half_length", K::number, "1", "L"},
           {"transmission", K::number, "0.85", "membrane transmission"},
           {"x1", K::number, "-", "membrane 1 position"},
           {"x2", K::number, "-", "membrane 2 position"},
           {"m0", K::integer, "-", "equilibrium mode index"},
           {"m1", K::integer, "-", "equilibrium index of membrane 1"},
           {"m2", K::integer, "-", "equilibrium index of membrane 2"},
       }},
      {"roots",
       "Root search of the mode condition.",
       {
           {"k_lo", K::number, "k_E - 3 / L", "lower end of the bracket"},
           {"k_hi", K::number, "k_E + 3 / L", "upper end of the bracket"},
           {"grid_step", K::number, "0", "scan step; 0 = pi / (40 L)"},
           {"tolerance", K::number, "1e-12", "target |residual|"},
       }},
      {"slice",
       "Spectrum along single-membrane displacements from the base positions.",
       {
           {"dx", K::grid, "[]", "displacements; empty disables"},
       }},
      {"scan",
       "Branch-tracked surface k(x1 + dx1, x2 + dx2) - k0.",
       {
           {"dx1", K::grid, "linspace(-1e-3, 1e-3, 21)", "membrane 1 displacements"},
           {"dx2", K::grid, "linspace(-1e-3, 1e-3, 21)", "membrane 2 displacements"},
           {"branch_seed", K::number_or_auto, "auto",
            "k of the followed branch; auto: the equilibrium k (needs m0, m1, m2)"},
           {"fit_radius", K::number, "1e-3 L",
            "quadratic fit uses points with |dx1|, |dx2| <= fit_radius"},
       }},
      {"derivatives",
       "Finite-difference optomechanical couplings at the base geometry.",
       {
           {"step", K::number, "0", "difference step; 0 = 5e-5 L"},
       }},
  };
  return table;
}

const SectionSpec& section_spec(std::string_view name) {
  for (const SectionSpec& s : sections()) {
    if (name == s.name) return s;
  }
  throw std::logic_error("no schema section " + std::string(name));
}

struct TaskSpec {
  Task task;
  const char* name;
  const char* doc;
  std::vector<const char*> sections;
  const char* outputs;
};

const std::vector<TaskSpec>& task_specs() {
  static const std::vector<TaskSpec> table = {
      {Task::steady, "steady", "Closed-form order parameters of both broken-symmetry branches.",
       {"model"}, "steady.csv"},
      {Task::dynamics_effective, "dynamics-effective",
       "Mean-field trajectory of the effective model.",
       {"model", "initial", "integrator", "run"}, "trajectory.csv"},
      {Task::dynamics_full, "dynamics-full",
       "Mean-field trajectory of the full model, optionally compared with the effective model "
       "over several omega_m.",
       {"model", "initial", "integrator", "run", "comparison"},
       "trajectory.csv or trajectory_<i>.csv + effective_<i>.csv + comparison.csv"},
      {Task::transition_sweep, "transition-sweep",
       "Order parameters at t_final against g / g_c, with the closed forms.",
       {"model", "sweep", "initial", "integrator", "run"}, "sweep.csv"},
      {Task::dtc_run, "dtc-run",
       "Pulsed protocol: stroboscopic record, classification, Fourier spectrum; with gamma > 0 "
       "also the adiabatic envelope.",
       {"model", "schedule", "initial", "run", "criteria", "fourier", "integrator"},
       "stroboscopic.csv, fourier.csv, trajectory.csv (sample_step > 0), envelope.csv (gamma > 0)"},
      {Task::dtc_phase_diagram, "dtc-phase-diagram",
       "DTC verdict over a (delta1, delta) or (g1, g2) grid.",
       {"model", "diagram", "schedule", "run", "criteria", "integrator"}, "phase_diagram.csv"},
      {Task::quantum_run, "quantum-run", "Master-equation evolution under the pulse schedule.",
       {"model", "schedule", "run", "quantum"}, "observables.csv, stroboscopic.csv"},
      {Task::quantum_lifetimes, "quantum-lifetimes",
       "Lifetime of the period-doubled <Jx>/N for several N.",
       {"model", "schedule", "quantum", "lifetime"}, "lifetimes.csv, stroboscopic_N<n>.csv"},
      {Task::spectrum_solve, "spectrum-solve",
       "Roots of the mode condition, couplings at the base geometry, optional slices.",
       {"geometry", "roots", "derivatives", "slice"}, "roots.csv, slices.csv (slice.dx set)"},
      {Task::spectrum_scan, "spectrum-scan", "Branch-tracked k surface and its quadratic fit.",
       {"geometry", "scan", "derivatives"}, "surface.csv"},
      {Task::validate, "validate", "Invariant suite of every module.", {}, "validation.csv"},
  };
  return table;
}

const TaskSpec& task_spec(Task task) {
  for (const TaskSpec& t : task_specs()) {
    if (t.task == task) return t;
  }
  throw std::logic_error("unknown task");
}

std::string json_type(const Json& v) { return v.type_name(); }

Json complex_json(cplx c) {
  if (c.imag() == 0.0) return c.real();
  return Json::array({c.real(), c.imag()});
}

// Reader of one parameter section: rejects unknown keys on construction and
// records every value it hands out (or its default) into `resolved`.
class Section {
 public:
  Section(const Json& params, const char* name, Json& resolved)
      : spec_(section_spec(name)), path_(std::string("parameters.") + name) {
    if (params.contains(name)) {
      node_ = &params.at(name);
      if (!node_->is_object()) fail_path(path_, "expected an object, got " + json_type(*node_));
      for (auto it = node_->begin(); it != node_->end(); ++it) {
        if (!spec_.find(it.key())) fail_path(path_ + "." + it.key(), "unknown key");
      }
    }
    out_ = &resolved[name];
    if (!out_->is_object()) *out_ = Json::object();
  }

  bool has(const char* key) const {
    check_schema(key);
    return node_ && node_->contains(key);
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    fail_path(path_ + "." + key, what);
  }
  [[noreturn]] void fail_section(const std::string& what) const { fail_path(path_, what); }

  std::optional<double> opt_number(const char* key) {
    if (!has(key)) return std::nullopt;
    const Json& v = node_->at(key);
    if (!v.is_number()) fail(key, "expected a number, got " + json_type(v));
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, std::string(key) + " must be finite");
    (*out_)[key] = x;
    return x;
  }

  double number(const char* key, double fallback) {
    if (auto v = opt_number(key)) return *v;
    (*out_)[key] = fallback;
    return fallback;
  }

  double positive(const char* key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail(key, std::string(key) + " must be positive");
    return v;
  }

  double non_negative(const char* key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0)) fail(key, std::string(key) + " must be non-negative");
    return v;
  }

  std::optional<long> opt_integer(const char* key) {
    if (!has(key)) return std::nullopt;
    const Json& v = node_->at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer, got " + json_type(v));
    const long x = v.get<long>();
    (*out_)[key] = x;
    return x;
  }

  long integer(const char* key, long fallback, long min_value) {
    long v = fallback;
    if (auto x = opt_integer(key)) {
      v = *x;
    } else {
      (*out_)[key] = fallback;
    }
    if (v < min_value) fail(key, std::string(key) + " must be >= " + std::to_string(min_value));
    return v;
  }

  bool boolean(const char* key, bool fallback) {
    bool v = fallback;
    if (has(key)) {
      const Json& j = node_->at(key);
      if (!j.is_boolean()) fail(key, "expected true or false, got " + json_type(j));
      v = j.get<bool>();
    }
    (*out_)[key] = v;
    return v;
  }

  std::string choice(const char* key, const std::string& fallback,
                     std::initializer_list<const char*> allowed) {
    std::string v = fallback;
    if (has(key)) {
      const Json& j = node_->at(key);
      if (!j.is_string()) fail(key, "expected a string, got " + json_type(j));
      v = j.get<std::string>();
    }
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return v == a; })) {
      std::string opts;
      for (const char* a : allowed) opts += (opts.empty() ? "" : ", ") + std::string(a);
      fail(key, std::string(key) + " must be one of " + opts);
    }
    (*out_)[key] = v;
    return v;
  }

  std::optional<cplx> opt_complex(const char* key) {
    if (!has(key)) return std::nullopt;
    const Json& v = node_->at(key);
    cplx c;
    if (v.is_number()) {
      c = {v.get<double>(), 0.0};
    } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      c = {v[0].get<double>(), v[1].get<double>()};
    } else {
      fail(key, "expected a number or [re, im], got " + json_type(v));
    }
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      fail(key, std::string(key) + " must be finite");
    }
    (*out_)[key] = complex_json(c);
    return c;
  }

  cplx complex(const char* key, cplx fallback) {
    if (auto v = opt_complex(key)) return *v;
    (*out_)[key] = complex_json(fallback);
    return fallback;
  }

  /// Empty optional encodes "auto".
  std::optional<double> number_or_auto(const char* key, std::optional<double> fallback) {
    std::optional<double> v = fallback;
    if (has(key)) {
      const Json& j = node_->at(key);
      if (j.is_string()) {
        if (j.get<std::string>() != "auto") fail(key, "expected a number or \"auto\"");
        v.reset();
      } else if (j.is_number()) {
        v = j.get<double>();
        if (!std::isfinite(*v)) fail(key, std::string(key) + " must be finite");
      } else {
        fail(key, "expected a number or \"auto\", got " + json_type(j));
      }
    }
    (*out_)[key] = v ? Json(*v) : Json("auto");
    return v;
  }

  std::optional<long> integer_or_auto(const char* key, std::optional<long> fallback) {
    std::optional<long> v = fallback;
    if (has(key)) {
      const Json& j = node_->at(key);
      if (j.is_string()) {
        if (j.get<std::string>() != "auto") fail(key, "expected an integer or \"auto\"");
        v.reset();
      } else if (j.is_number_integer()) {
        v = j.get<long>();
      } else {
        fail(key, "expected an integer or \"auto\", got " + json_type(j));
      }
    }
    (*out_)[key] = v ? Json(*v) : Json("auto");
    return v;
  }

  /// A list of numbers or {"start", "stop", "count"} (inclusive linspace).
  std::vector<double> grid(const char* key, const std::vector<double>& fallback) {
    std::vector<double> v = fallback;
    if (has(key)) {
      const Json& j = node_->at(key);
      const std::string p = path_ + "." + key;
      if (j.is_array()) {
        v.clear();
        for (const Json& x : j) {
          if (!x.is_number()) fail(key, "expected a list of numbers");
          v.push_back(x.get<double>());
        }
      } else if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
          if (it.key() != "start" && it.key() != "stop" && it.key() != "count") {
            fail_path(p + "." + it.key(), "unknown key (a grid takes start, stop, count)");
          }
        }
        if (!j.contains("start") || !j.contains("stop") || !j.contains("count")) {
          fail(key, "a grid object needs start, stop and count");
        }
        if (!j["start"].is_number() || !j["stop"].is_number()) {
          fail(key, "grid start and stop must be numbers");
        }
        if (!j["count"].is_number_integer() || j["count"].get<long>() < 1) {
          fail(key, "grid count must be an integer >= 1");
        }
        const double a = j["start"].get<double>(), b = j["stop"].get<double>();
        const long n = j["count"].get<long>();
        v.clear();
        for (long i = 0; i < n; ++i) {
          v.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
        }
      } else {
        fail(key, "expected a list or {start, stop, count}, got " + json_type(j));
      }
      for (double x : v) {
        if (!std::isfinite(x)) fail(key, "grid values must be finite");
      }
    }
    (*out_)[key] = v;
    return v;
  }

  std::vector<long> integer_list(const char* key, const std::vector<long>& fallback) {
    std::vector<long> v = fallback;
    if (has(key)) {
      const Json& j = node_->at(key);
      if (!j.is_array()) fail(key, "expected a list of integers, got " + json_type(j));
      v.clear();
      for (const Json& x : j) {
        if (!x.is_number_integer()) fail(key, "expected a list of integers");
        v.push_back(x.get<long>());
      }
    }
    (*out_)[key] = v;
    return v;
  }

 private:
  [[noreturn]] static void fail_path(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

  void check_schema(const char* key) const {
    if (!spec_.find(key)) {
      throw std::logic_error("key " + path_ + "." + key + " missing from the schema");
    }
  }

  const SectionSpec& spec_;
  std::string path_;
  const Json* node_ = nullptr;
  Json* out_ = nullptr;
};

// Converts module-level InvalidArgument into ConfigError tagged with a path.
template <class F>
auto guarded(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

enum class Coupling { none, required, optional };

ModelParams read_model(Section& s, bool pulsed, Coupling coupling) {
  ModelParams p;
  p.delta = s.number("delta", 20.0);
  p.drive = s.complex("drive", 2000.0);
  p.kappa = s.non_negative("kappa", 10.0);
  p.j_coupling = s.positive("j_coupling", 1.0);
  p.gamma = s.non_negative("gamma", 0.0);
  p.n_phonon = s.positive("n_phonon", 200.0);
  if (s.has("omega_m") && s.has("omega_m_over_nj")) {
    s.fail_section("omega_m and omega_m_over_nj are ambiguous; set one");
  }
  if (s.has("omega_m_over_nj")) {
    p.omega_m = s.positive("omega_m_over_nj", 1.0) * p.n_phonon * p.j_coupling;
  } else {
    p.omega_m = s.positive("omega_m", 1.0e4);
  }

  const char* relative = pulsed ? "g_over_gc2" : "g_over_gc";
  const char* other = pulsed ? "g_over_gc" : "g_over_gc2";
  if (s.has(other)) {
    s.fail(other, pulsed ? "this task is pulsed; use g_over_gc2" : "this task is not pulsed; use g_over_gc");
  }
  const bool has_pair = s.has("g1") || s.has("g2");
  const int set = int(s.has("g")) + int(s.has(relative)) + int(has_pair);
  if (set > 1) {
    std::string names;
    for (const char* k : {"g", relative, "g1", "g2"}) {
      if (s.has(k)) names += (names.empty() ? "" : " and ") + std::string(k);
    }
    s.fail_section(names + " are ambiguous; set exactly one coupling");
  }
  if (coupling == Coupling::none && set > 0) {
    s.fail_section("the coupling is set by the sweep; remove g, g1, g2 and " + std::string(relative));
  }
  if (coupling == Coupling::required && set == 0) {
    s.fail_section(std::string("a coupling is required: g, ") + relative + ", or g1 and g2");
  }
  if (has_pair && !(s.has("g1") && s.has("g2"))) s.fail_section("g1 and g2 must be set together");

  guarded("parameters.model", [&] { p.validate(); });
  if (s.has("g")) {
    p = p.with_coupling(s.non_negative("g", 0.0));
  } else if (s.has(relative)) {
    const double r = s.non_negative(relative, 1.0);
    p = p.with_coupling(r * guarded("parameters.model", [&] { return critical_coupling(p); }));
  } else if (has_pair) {
    p.g1 = s.non_negative("g1", 0.0);
    p.g2 = s.non_negative("g2", 0.0);
  }
  guarded("parameters.model", [&] { p.validate(); });
  return p;
}

detail::InitialSpec read_initial(Section& s, detail::InitialKind default_kind) {
  detail::InitialSpec spec;
  const std::string kind = s.choice(
      "kind", default_kind == detail::InitialKind::broken ? "broken" : "symmetric",
      {"symmetric", "broken"});
  spec.kind = kind == "broken" ? detail::InitialKind::broken : detail::InitialKind::symmetric;
  spec.branch = s.choice("branch", "plus", {"plus", "minus"}) == "plus" ? Branch::plus
                                                                        : Branch::minus;
  spec.b0 = s.complex("b0", 10.0);
  spec.symmetry_seed = s.number("symmetry_seed", -1e-6);
  spec.cavity = s.opt_complex("cavity");
  return spec;
}

void read_tolerances(Section& s, StepControl& step, double abs_default, double rel_default) {
  step.abs_tol = s.positive("abs_tol", abs_default);
  step.rel_tol = s.positive("rel_tol", rel_default);
}

// max_step: "auto" keeps the caller's default.
bool read_max_step(Section& s, StepControl& step) {
  const auto v = s.number_or_auto("max_step", std::nullopt);
  if (!v) return true;
  if (!(*v > 0.0)) s.fail("max_step", "max_step must be positive");
  step.max_step = *v;
  return false;
}

detail::ScheduleSpec read_schedule(Section& s) {
  detail::ScheduleSpec sch;
  sch.delta1 = s.positive("delta1", 100.0);
  sch.t1 = s.number_or_auto("t1", std::nullopt);
  if (sch.t1 && !(*sch.t1 > 0.0)) s.fail("t1", "t1 must be positive");
  sch.t2 = s.positive("t2", 100.0);
  sch.flip_search_horizon = s.positive("flip_search_horizon", 20.0);
  return sch;
}

DtcCriteria read_criteria(Section& s) {
  DtcCriteria c;
  c.discard = static_cast<std::size_t>(s.integer("discard", 10, 0));
  c.window = static_cast<std::size_t>(s.integer("window", 40, 0));
  c.amplitude_threshold = s.non_negative("amplitude_threshold", 0.05);
  return c;
}

detail::QuantumSpec read_quantum(Section& s) {
  detail::QuantumSpec q;
  if (auto c = s.integer_or_auto("fock_cutoff", std::nullopt)) {
    if (*c < 1) s.fail("fock_cutoff", "fock_cutoff must be >= 1");
    q.fock_cutoff = static_cast<int>(*c);
  }
  q.headroom = static_cast<int>(s.integer("headroom", 10, 0));
  q.controls.rate_factor = s.non_negative("rate_factor", 2.0);
  read_tolerances(s, q.controls.step, 1e-9, 1e-8);
  q.controls.sample_step = s.non_negative("sample_step", 0.05);
  q.controls.check_positivity = s.boolean("check_positivity", true);
  q.controls.positivity_tolerance = s.positive("positivity_tolerance", 1e-7);
  return q;
}

int integer_phonons(Section& model, double n) {
  if (n != std::floor(n) || n < 1.0 || n > 1e6) {
    model.fail("n_phonon", "n_phonon must be a positive integer for quantum tasks");
  }
  return static_cast<int>(n);
}

void check_quantum_schedule(const detail::ScheduleSpec& s, const ModelParams& p) {
  guarded("parameters.schedule", [&] {
    build_schedule(s.delta1, p.delta, p.drive, p.kappa, s.t1.value_or(1.0), s.t2);
  });
}

detail::GeometrySpec read_geometry(Section& s) {
  detail::GeometrySpec g;
  g.problem.half_length = s.positive("half_length", 1.0);
  g.problem.transmission = s.positive("transmission", 0.85);
  const bool any_m = s.has("m0") || s.has("m1") || s.has("m2");
  const bool any_x = s.has("x1") || s.has("x2");
  if (any_m && any_x) s.fail_section("x1/x2 and m0/m1/m2 are ambiguous; set one form");
  if (any_m) {
    if (!(s.has("m0") && s.has("m1") && s.has("m2"))) {
      s.fail_section("m0, m1 and m2 must be set together");
    }
    g.m0 = static_cast<int>(*s.opt_integer("m0"));
    g.m1 = static_cast<int>(*s.opt_integer("m1"));
    g.m2 = static_cast<int>(*s.opt_integer("m2"));
    g.equilibrium = guarded("parameters.geometry", [&] {
      return equilibrium_positions(*g.m0, *g.m1, *g.m2, g.problem.transmission,
                                   g.problem.half_length);
    });
    g.problem.x1 = g.equilibrium->x1;
    g.problem.x2 = g.equilibrium->x2;
  } else {
    if (!(s.has("x1") && s.has("x2"))) {
      s.fail_section("set x1 and x2, or m0, m1 and m2");
    }
    g.problem.x1 = *s.opt_number("x1");
    g.problem.x2 = *s.opt_number("x2");
  }
  guarded("parameters.geometry", [&] { g.problem.validate(); });
  return g;
}

void check_sections(Task task, const Json& params) {
  if (!params.is_object()) throw ConfigError("parameters: expected an object");
  const TaskSpec& ts = task_spec(task);
  for (auto it = params.begin(); it != params.end(); ++it) {
    const bool known = std::any_of(ts.sections.begin(), ts.sections.end(),
                                   [&](const char* s) { return it.key() == s; });
    if (!known) {
      std::string allowed;
      for (const char* s : ts.sections) allowed += (allowed.empty() ? "" : ", ") + std::string(s);
      throw ConfigError("parameters." + it.key() + ": unknown section for task " + ts.name +
                        (allowed.empty() ? " (takes no parameters)" : " (allowed: " + allowed + ")"));
    }
  }
}

}  // namespace

std::optional<Task> parse_task(std::string_view name) {
  for (const TaskSpec& t : task_specs()) {
    if (name == t.name) return t.task;
  }
  return std::nullopt;
}

std::string_view task_name(Task task) { return task_spec(task).name; }

std::vector<Task> all_tasks() {
  std::vector<Task> out;
  for (const TaskSpec& t : task_specs()) out.push_back(t.task);
  return out;
}

namespace detail {

MeanFieldState make_initial(const InitialSpec& spec, const ModelParams& model, bool full) {
  if (spec.kind == InitialKind::broken) {
    MeanFieldState s = broken_symmetry_state(model, model.g(), spec.branch);
    if (full) s.cav = classical_amplitude(model).value + s.cav;
    if (spec.cavity) s.cav = *spec.cavity;
    return s;
  }
  cplx cav{spec.symmetry_seed, 0.0};
  if (full) {
    const ClassicalAmplitude a = classical_amplitude(model);
    cav = a.value + std::polar(1.0, a.phase) * spec.symmetry_seed;
  }
  if (spec.cavity) cav = *spec.cavity;
  return symmetric_initial_state(spec.b0, cav);
}

Plan build_plan(Task task, const Json& parameters, Json& resolved) {
  check_sections(task, parameters);
  resolved = Json::object();
  const Json& P = parameters;

  switch (task) {
    case Task::steady: {
      Section m(P, "model", resolved);
      SteadyPlan plan{read_model(m, false, Coupling::required)};
      guarded("parameters.model", [&] { plan.model.g(); });
      return plan;
    }
    case Task::dynamics_effective:
    case Task::dynamics_full: {
      DynamicsPlan plan;
      plan.full = task == Task::dynamics_full;
      Section m(P, "model", resolved);
      plan.model = read_model(m, false, Coupling::required);
      Section in(P, "initial", resolved);
      plan.initial = read_initial(in, InitialKind::symmetric);
      if (plan.initial.kind == InitialKind::broken) {
        guarded("parameters.initial", [&] { plan.model.g(); });
      }
      Section ig(P, "integrator", resolved);
      read_tolerances(ig, plan.step, 1e-10, 1e-10);
      plan.default_max_step = read_max_step(ig, plan.step);
      plan.sample_step = ig.positive("sample_step", 0.05);
      Section r(P, "run", resolved);
      plan.t_final = r.positive("t_final", 80.0);
      if (plan.full) {
        Section c(P, "comparison", resolved);
        plan.omega_m_over_nj = c.grid("omega_m_over_nj", {});
        for (double w : plan.omega_m_over_nj) {
          if (!(w > 0.0)) c.fail("omega_m_over_nj", "omega_m_over_nj must be positive");
        }
        plan.average_fraction = c.positive("average_fraction", 0.2);
        if (plan.average_fraction > 1.0) {
          c.fail("average_fraction", "average_fraction must lie in (0, 1]");
        }
      }
      return plan;
    }
    case Task::transition_sweep: {
      TransitionPlan plan;
      Section m(P, "model", resolved);
      plan.model = read_model(m, false, Coupling::none);
      Section sw(P, "sweep", resolved);
      std::vector<double> def;
      for (int i = 0; i < 16; ++i) def.push_back(0.5 + 1.5 * i / 15.0);
      plan.g_over_gc = sw.grid("g_over_gc", def);
      if (plan.g_over_gc.empty()) sw.fail("g_over_gc", "g_over_gc must not be empty");
      for (double v : plan.g_over_gc) {
        if (!(v >= 0.0)) sw.fail("g_over_gc", "g_over_gc must be non-negative");
      }
      plan.full = sw.choice("model", "effective", {"effective", "full"}) == "full";
      Section in(P, "initial", resolved);
      plan.initial = read_initial(in, InitialKind::symmetric);
      if (plan.initial.kind == InitialKind::broken) {
        in.fail("kind", "transition sweeps start from the symmetric state");
      }
      Section ig(P, "integrator", resolved);
      read_tolerances(ig, plan.step, 1e-10, 1e-10);
      plan.default_max_step = read_max_step(ig, plan.step);
      ig.number("sample_step", 0.0);
      Section r(P, "run", resolved);
      plan.t_final = r.positive("t_final", 80.0);
      return plan;
    }
    case Task::dtc_run: {
      DtcPlan plan;
      Section m(P, "model", resolved);
      plan.model = read_model(m, true, Coupling::required);
      guarded("parameters.model", [&] { plan.model.g(); });
      Section sc(P, "schedule", resolved);
      plan.schedule = read_schedule(sc);
      check_quantum_schedule(plan.schedule, plan.model);
      Section in(P, "initial", resolved);
      plan.initial = read_initial(in, InitialKind::broken);
      Section r(P, "run", resolved);
      plan.n_periods = r.integer("n_periods", 50, 1);
      Section c(P, "criteria", resolved);
      plan.criteria = read_criteria(c);
      if (plan.criteria.discard + 2 > static_cast<std::size_t>(plan.n_periods) + 1) {
        c.fail("discard", "discard leaves fewer than two classified periods");
      }
      Section f(P, "fourier", resolved);
      plan.fourier_periods = static_cast<std::size_t>(f.integer("periods", 0, 0));
      if (plan.fourier_periods > static_cast<std::size_t>(plan.n_periods)) {
        f.fail("periods", "periods must not exceed run.n_periods");
      }
      plan.fourier_bins = static_cast<std::size_t>(f.integer("bins", 1001, 2));
      Section ig(P, "integrator", resolved);
      read_tolerances(ig, plan.step, 1e-10, 1e-10);
      read_max_step(ig, plan.step);
      plan.sample_step = ig.non_negative("sample_step", 0.0);
      return plan;
    }
    case Task::dtc_phase_diagram: {
      DiagramPlan plan;
      PhaseDiagramSetup& st = plan.setup;
      Section m(P, "model", resolved);
      st.base = read_model(m, true, Coupling::required);
      guarded("parameters.model", [&] { st.base.g(); });
      plan.g_reference = st.base.g1;
      Section d(P, "diagram", resolved);
      st.axes = d.choice("axes", "detunings", {"detunings", "couplings"}) == "couplings"
                    ? DiagramAxes::couplings
                    : DiagramAxes::detunings;
      if (!d.has("axis1")) d.fail("axis1", "axis1 is required");
      if (!d.has("axis2")) d.fail("axis2", "axis2 is required");
      plan.axis1_input = d.grid("axis1", {});
      plan.axis2_input = d.grid("axis2", {});
      plan.relative_couplings = d.boolean("relative", true);
      if (plan.axis1_input.empty()) d.fail("axis1", "axis1 must not be empty");
      if (plan.axis2_input.empty()) d.fail("axis2", "axis2 must not be empty");
      const bool scale = st.axes == DiagramAxes::couplings && plan.relative_couplings;
      for (double v : plan.axis1_input) st.axis1.push_back(scale ? v * plan.g_reference : v);
      for (double v : plan.axis2_input) st.axis2.push_back(scale ? v * plan.g_reference : v);
      Section sc(P, "schedule", resolved);
      const ScheduleSpec sch = read_schedule(sc);
      st.delta1 = sch.delta1;
      st.t1_mode = sch.t1 ? FlipTimeMode::fixed : FlipTimeMode::automatic;
      st.t1 = sch.t1.value_or(1.0);
      st.t2 = sch.t2;
      st.flip_search_horizon = sch.flip_search_horizon;
      Section r(P, "run", resolved);
      st.n_periods = r.integer("n_periods", 50, 1);
      Section c(P, "criteria", resolved);
      st.criteria = read_criteria(c);
      Section ig(P, "integrator", resolved);
      read_tolerances(ig, st.step, 1e-10, 1e-10);
      read_max_step(ig, st.step);
      return plan;
    }
    case Task::quantum_run: {
      QuantumPlan plan;
      Section m(P, "model", resolved);
      plan.model = read_model(m, true, Coupling::required);
      integer_phonons(m, plan.model.n_phonon);
      guarded("parameters.model", [&] { plan.model.g(); });
      Section sc(P, "schedule", resolved);
      plan.schedule = read_schedule(sc);
      check_quantum_schedule(plan.schedule, plan.model);
      Section r(P, "run", resolved);
      plan.n_periods = r.integer("n_periods", 4, 1);
      Section q(P, "quantum", resolved);
      plan.quantum = read_quantum(q);
      return plan;
    }
    case Task::quantum_lifetimes: {
      LifetimePlan plan;
      Section m(P, "model", resolved);
      if (m.has("n_phonon")) m.fail("n_phonon", "set quantum.n_values instead");
      if (!m.has("g_over_gc2")) {
        m.fail_section("the lifetimes task needs g_over_gc2 (g scales with N)");
      }
      plan.model = read_model(m, true, Coupling::required);
      resolved["model"].erase("n_phonon");
      plan.coupling_over_gc2 = plan.model.g1 / critical_coupling(plan.model);
      Section sc(P, "schedule", resolved);
      plan.schedule = read_schedule(sc);
      check_quantum_schedule(plan.schedule, plan.model);
      Section q(P, "quantum", resolved);
      plan.quantum = read_quantum(q);
      for (long n : q.integer_list("n_values", {10, 24})) {
        if (n < 1) q.fail("n_values", "n_values must be positive");
        plan.n_values.push_back(static_cast<int>(n));
      }
      if (plan.n_values.empty()) q.fail("n_values", "n_values must not be empty");
      plan.periods = q.integer_list("periods", std::vector<long>(plan.n_values.size(), 10));
      if (plan.periods.size() != plan.n_values.size()) {
        q.fail("periods", "periods must have one entry per n_values entry");
      }
      for (long k : plan.periods) {
        if (k < 1) q.fail("periods", "periods must be >= 1");
      }
      if (plan.quantum.fock_cutoff && plan.n_values.size() > 1) {
        q.fail("fock_cutoff", "a fixed fock_cutoff needs a single n_values entry");
      }
      Section l(P, "lifetime", resolved);
      plan.floor = l.positive("floor", 1e-3);
      plan.min_alternations = static_cast<std::size_t>(l.integer("min_alternations", 10, 0));
      plan.first = static_cast<std::size_t>(l.integer("first", 1, 0));
      return plan;
    }
    case Task::spectrum_solve: {
      SpectrumSolvePlan plan;
      Section g(P, "geometry", resolved);
      plan.geometry = read_geometry(g);
      Section rt(P, "roots", resolved);
      const double L = plan.geometry.problem.half_length;
      const double centre = plan.geometry.equilibrium ? plan.geometry.equilibrium->k : 0.0;
      if (!plan.geometry.equilibrium && !(rt.has("k_lo") && rt.has("k_hi"))) {
        rt.fail_section("k_lo and k_hi are required unless the geometry gives m0, m1, m2");
      }
      plan.k_lo = rt.non_negative("k_lo", std::max(0.0, centre - 3.0 / L));
      plan.k_hi = rt.positive("k_hi", centre + 3.0 / L);
      if (!(plan.k_hi > plan.k_lo)) rt.fail("k_hi", "k_hi must exceed k_lo");
      plan.roots.grid_step = rt.non_negative("grid_step", 0.0);
      plan.roots.tolerance = rt.positive("tolerance", 1e-12);
      Section dv(P, "derivatives", resolved);
      plan.derivative_step = dv.non_negative("step", 0.0);
      Section sl(P, "slice", resolved);
      plan.slice_dx = sl.grid("dx", {});
      return plan;
    }
    case Task::spectrum_scan: {
      SpectrumScanPlan plan;
      Section g(P, "geometry", resolved);
      plan.geometry = read_geometry(g);
      Section s(P, "scan", resolved);
      std::vector<double> def;
      for (int i = 0; i < 21; ++i) def.push_back(-1e-3 + 2e-3 * i / 20.0);
      plan.dx1 = s.grid("dx1", def);
      plan.dx2 = s.grid("dx2", def);
      if (plan.dx1.empty() || plan.dx2.empty()) s.fail_section("dx1 and dx2 must not be empty");
      plan.branch_seed = s.number_or_auto("branch_seed", std::nullopt);
      if (!plan.branch_seed && !plan.geometry.equilibrium) {
        s.fail("branch_seed", "branch_seed is required unless the geometry gives m0, m1, m2");
      }
      if (plan.branch_seed && !(*plan.branch_seed > 0.0)) {
        s.fail("branch_seed", "branch_seed must be positive");
      }
      plan.fit_radius = s.positive("fit_radius", 1e-3 * plan.geometry.problem.half_length);
      Section dv(P, "derivatives", resolved);
      plan.derivative_step = dv.non_negative("step", 0.0);
      return plan;
    }
    case Task::validate:
      return ValidatePlan{};
  }
  throw std::logic_error("unhandled task");
}

}  // namespace detail

RunConfig parse_config(const Json& doc, std::optional<Task> task) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object at the top level");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    static const char* const allowed[] = {"task", "parameters", "output", "workers", "preset"};
    if (std::none_of(std::begin(allowed), std::end(allowed),
                     [&](const char* a) { return it.key() == a; })) {
      throw ConfigError(it.key() + ": unknown key (top level takes task, parameters, output, "
                                   "workers, preset)");
    }
  }
  RunConfig cfg;
  if (doc.contains("task")) {
    if (!doc["task"].is_string()) throw ConfigError("task: expected a string");
    const auto t = parse_task(doc["task"].get<std::string>());
    if (!t) throw ConfigError("task: unknown task \"" + doc["task"].get<std::string>() + "\"");
    if (task && *task != *t) {
      throw ConfigError("task: the document is for " + std::string(task_name(*t)) +
                        ", not " + std::string(task_name(*task)));
    }
    cfg.task = *t;
  } else if (task) {
    cfg.task = *task;
  } else {
    throw ConfigError("task: missing");
  }
  if (doc.contains("output")) {
    if (!doc["output"].is_string() || doc["output"].get<std::string>().empty()) {
      throw ConfigError("output: expected a non-empty path string");
    }
    cfg.output = doc["output"].get<std::string>();
  }
  if (doc.contains("workers")) {
    if (!doc["workers"].is_number_integer() || doc["workers"].get<long>() < 1) {
      throw ConfigError("workers: workers must be an integer >= 1");
    }
    cfg.workers = static_cast<int>(doc["workers"].get<long>());
  }
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) throw ConfigError("preset: expected a string");
    cfg.preset = doc["preset"].get<std::string>();
  }
  const Json params = doc.contains("parameters") ? doc["parameters"] : Json::object();
  detail::build_plan(cfg.task, params, cfg.parameters);
  return cfg;
}

RunConfig parse_config(std::string_view text, std::optional<Task> task) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(doc, task);
}

RunConfig load_preset(const std::string& name, const Json& overrides, std::optional<Task> task) {
  Json doc;
  try {
    doc = Json::parse(preset_text(name));
  } catch (const Json::parse_error& e) {
    throw std::logic_error("preset " + name + " is malformed: " + e.what());
  }
  if (!overrides.is_object()) throw ConfigError("config: expected a JSON object at the top level");
  doc.merge_patch(overrides);
  doc["preset"] = name;
  return parse_config(doc, task);
}

int resolve_workers(std::optional<int> cli_value, int fallback) {
  if (cli_value) {
    if (*cli_value < 1) throw ConfigError("--workers: workers must be >= 1");
    return *cli_value;
  }
  if (const char* env = std::getenv(kWorkersEnv); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 4096) {
      throw ConfigError(std::string(kWorkersEnv) + ": expected an integer >= 1, got \"" + env +
                        "\"");
    }
    return static_cast<int>(v);
  }
  return std::max(1, fallback);
}

std::string schema_reference() {
  std::ostringstream out;
  out << "# optodtc configuration reference\n\n"
         "A run configuration is a JSON object:\n\n"
         "    {\"task\": \"<task>\", \"parameters\": {<section>: {<key>: <value>}},\n"
         "     \"output\": \"<dir>\", \"workers\": <n>}\n\n"
         "Frequencies, rates and couplings are in units of J, times in units of 1/J. Unknown "
         "tasks, sections and keys are rejected. A grid is a list of numbers or "
         "{\"start\": a, \"stop\": b, \"count\": n} (inclusive, evenly spaced). Complex values "
         "are a number or [re, im].\n\n"
         "The worker count is taken from --workers, else the " << kWorkersEnv
      << " environment variable, else the config.\n\n## Tasks\n\n";
  for (const TaskSpec& t : task_specs()) {
    out << "### " << t.name << "\n\n" << t.doc << "\n\n";
    out << "Sections: ";
    if (t.sections.empty()) out << "none";
    for (std::size_t i = 0; i < t.sections.size(); ++i) {
      out << (i ? ", " : "") << "`" << t.sections[i] << "`";
    }
    out << ". Output: " << t.outputs << ".\n\n";
  }
  out << "## Sections\n\n";
  for (const SectionSpec& s : sections()) {
    out << "### " << s.name << "\n\n" << s.doc << "\n\n| key | type | default | meaning |\n"
        << "|---|---|---|---|\n";
    for (const KeySpec& k : s.keys) {
      static const std::map<KeyType, const char*> names = {
          {K::number, "number"},         {K::integer, "integer"},
          {K::boolean, "boolean"},       {K::choice, "string"},
          {K::complex, "complex"},       {K::grid, "grid"},
          {K::number_or_auto, "number | \"auto\""},
          {K::integer_or_auto, "integer | \"auto\""},
          {K::integer_list, "integer list"},
      };
      out << "| " << k.name << " | " << names.at(k.type) << " | " << k.fallback << " | " << k.doc
          << " |\n";
    }
    out << "\n";
  }
  out << "## Exit codes\n\n0 success, 2 configuration error, 3 numerical failure, 4 validation "
         "failure.\n";
  return out.str();
}

}  // namespace optodtc
