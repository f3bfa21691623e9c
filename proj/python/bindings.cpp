#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "optodtc/cli_io.hpp"
#include "optodtc/error.hpp"
#include "optodtc/model.hpp"
#include "optodtc/spectrum.hpp"

namespace py = pybind11;
using namespace optodtc;

namespace {

// JSON crosses the boundary as text; the Python wrapper decodes it.
py::dict run_task_json(const std::string& task, const std::string& config_json,
                       const std::string& preset, const std::string& output, int workers,
                       bool write_files) {
  const std::optional<Task> t = parse_task(task);
  if (!t) throw ConfigError("unknown task '" + task + "'");
  const Json doc = Json::parse(config_json.empty() ? "{}" : config_json);
  RunConfig cfg = preset.empty() ? parse_config(doc, t) : load_preset(preset, doc, t);
  if (!output.empty()) cfg.output = output;
  if (workers > 0) cfg.workers = workers;
  ExecuteOptions opt;
  opt.write_files = write_files;
  opt.quiet = true;
  TaskResult r;
  {
    py::gil_scoped_release release;
    r = execute(cfg, opt);
  }
  py::dict out;
  out["exit_code"] = r.exit_code;
  out["message"] = r.message;
  out["summary"] = r.summary.dump();
  out["metadata"] = r.metadata.dump();
  out["files"] = r.files;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "optodtc native core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("delta", &ModelParams::delta)
      .def_readwrite("drive", &ModelParams::drive)
      .def_readwrite("kappa", &ModelParams::kappa)
      .def_readwrite("g1", &ModelParams::g1)
      .def_readwrite("g2", &ModelParams::g2)
      .def_readwrite("j_coupling", &ModelParams::j_coupling)
      .def_readwrite("omega_m", &ModelParams::omega_m)
      .def_readwrite("gamma", &ModelParams::gamma)
      .def_readwrite("n_phonon", &ModelParams::n_phonon)
      .def("validate", &ModelParams::validate)
      .def("with_coupling", &ModelParams::with_coupling, py::arg("g"))
      .def_property_readonly("g", &ModelParams::g)
      .def("__repr__", [](const ModelParams& p) {
        return "ModelParams(delta=" + std::to_string(p.delta) + ", kappa=" +
               std::to_string(p.kappa) + ", g1=" + std::to_string(p.g1) + ", g2=" +
               std::to_string(p.g2) + ", n_phonon=" + std::to_string(p.n_phonon) + ")";
      });

  py::class_<DickeParams>(m, "DickeParams")
      .def_readonly("omega0", &DickeParams::omega0)
      .def_readonly("omegaz", &DickeParams::omegaz)
      .def_readonly("lam", &DickeParams::lambda)
      .def_readonly("n_atoms", &DickeParams::n_atoms);

  py::enum_<Branch>(m, "Branch").value("plus", Branch::plus).value("minus", Branch::minus);

  py::class_<SteadyState>(m, "SteadyState")
      .def_readonly("d_bar", &SteadyState::d_bar)
      .def_readonly("delta_n_bar", &SteadyState::delta_n_bar)
      .def_readonly("branch", &SteadyState::branch)
      .def_property_readonly("cavity", &SteadyState::cavity);

  m.def("classical_amplitude",
        [](const ModelParams& p) { return classical_amplitude(p).value; }, py::arg("params"));
  m.def("critical_coupling", py::overload_cast<const ModelParams&>(&critical_coupling), py::arg("params"));
  m.def("dicke_params", &dicke_params, py::arg("params"));
  m.def("critical_coupling_dicke", &critical_coupling_dicke, py::arg("dicke"), py::arg("kappa"));
  m.def("steady_state", &steady_state, py::arg("params"), py::arg("g"),
        py::arg("branch") = Branch::plus);
  m.def("effective_frequency", &effective_frequency, py::arg("g"), py::arg("g_c"),
        py::arg("j_coupling"));
  m.def("effective_potential", &effective_potential, py::arg("x"), py::arg("params"),
        py::arg("g"));

  py::class_<SpectrumProblem>(m, "SpectrumProblem")
      .def(py::init([](double half_length, double transmission, double x1, double x2) {
             SpectrumProblem p{half_length, transmission, x1, x2};
             p.validate();
             return p;
           }),
           py::arg("half_length") = 1.0, py::arg("transmission") = 0.85, py::arg("x1") = -0.5,
           py::arg("x2") = 0.5)
      .def_readonly("half_length", &SpectrumProblem::half_length)
      .def_readonly("transmission", &SpectrumProblem::transmission)
      .def_readonly("x1", &SpectrumProblem::x1)
      .def_readonly("x2", &SpectrumProblem::x2);

  py::class_<Equilibrium>(m, "Equilibrium")
      .def_readonly("k", &Equilibrium::k)
      .def_readonly("x1", &Equilibrium::x1)
      .def_readonly("x2", &Equilibrium::x2);

  py::class_<CouplingDerivatives>(m, "CouplingDerivatives")
      .def_readonly("k0", &CouplingDerivatives::k0)
      .def_readonly("dk_dx1", &CouplingDerivatives::dk_dx1)
      .def_readonly("dk_dx2", &CouplingDerivatives::dk_dx2)
      .def_readonly("d2k_dx1", &CouplingDerivatives::d2k_dx1)
      .def_readonly("d2k_dx2", &CouplingDerivatives::d2k_dx2)
      .def_readonly("d2k_dx1dx2", &CouplingDerivatives::d2k_dx1dx2);

  m.def("spectrum_residual", &spectrum_residual, py::arg("k"), py::arg("problem"));
  m.def("solve_k",
        [](const SpectrumProblem& p, double lo, double hi) { return solve_k(p, lo, hi).roots; },
        py::arg("problem"), py::arg("k_lo"), py::arg("k_hi"));
  m.def("equilibrium_positions", &equilibrium_positions, py::arg("m0"), py::arg("m1"),
        py::arg("m2"), py::arg("transmission"), py::arg("half_length"));
  m.def("coupling_derivatives", &coupling_derivatives, py::arg("problem"), py::arg("k0"),
        py::arg("h") = 0.0);

  m.def("preset_names", &preset_names);
  m.def("preset_text", &preset_text, py::arg("name"));
  m.def("tasks", [] {
    std::vector<std::string> out;
    for (Task t : all_tasks()) out.emplace_back(task_name(t));
    return out;
  });
  m.def("_run_task", &run_task_json, py::arg("task"), py::arg("config_json"), py::arg("preset"),
        py::arg("output"), py::arg("workers"), py::arg("write_files"));
  m.attr("__version__") = artifact_version();
}
