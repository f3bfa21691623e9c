#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <doctest.h>

#include "optodtc/cli_io.hpp"

using namespace optodtc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("optodtc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string error_of(const Json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

Json strong_drive_doc() {
  return Json::parse(R"({
    "task": "dtc-run",
    "parameters": {
      "model": {"delta": 50, "drive": 10000, "kappa": 10, "n_phonon": 200, "g_over_gc2": 1.2},
      "schedule": {"delta1": 100, "t1": 1.196, "t2": 100},
      "run": {"n_periods": 6},
      "criteria": {"discard": 0, "window": 0},
      "fourier": {"bins": 11}
    }
  })");
}

struct CaptureCout {
  std::ostringstream buf;
  std::streambuf* old;
  CaptureCout() : old(std::cout.rdbuf(buf.rdbuf())) {}
  ~CaptureCout() { std::cout.rdbuf(old); }
};

}  // namespace

TEST_CASE("task names round trip") {
  for (Task t : all_tasks()) CHECK(parse_task(task_name(t)) == t);
  CHECK_FALSE(parse_task("dtc_run"));
  CHECK(all_tasks().size() == 11);
}

TEST_CASE("minimal pulsed config is accepted and reports g_c2") {
  const RunConfig cfg = parse_config(strong_drive_doc());
  CHECK(cfg.task == Task::dtc_run);
  CHECK(cfg.parameters["schedule"]["t2"] == 100.0);
  CHECK(cfg.parameters["integrator"]["abs_tol"] == 1e-10);
  CaptureCout cap;
  ExecuteOptions opt;
  opt.write_files = false;
  const TaskResult r = execute(cfg, opt);
  CHECK(r.exit_code == exit_ok);
  CHECK(cap.buf.str().find("g_c2 = 0.0013") != std::string::npos);
  CHECK(r.metadata["derived"]["g_c2"].get<double>() == doctest::Approx(1.3e-3));
  CHECK(r.summary["is_dtc"] == true);
}

TEST_CASE("constraint and ambiguity errors name the key") {
  Json doc = strong_drive_doc();
  doc["parameters"]["schedule"]["t1"] = -1;
  CHECK(error_of(doc).find("t1 must be positive") != std::string::npos);

  doc = strong_drive_doc();
  doc["parameters"]["model"]["g"] = 1e-3;
  const std::string amb = error_of(doc);
  CHECK(amb.find("ambiguous") != std::string::npos);
  CHECK(amb.find("parameters.model") != std::string::npos);

  doc = strong_drive_doc();
  doc["parameters"]["model"]["kappa"] = "ten";
  CHECK(error_of(doc).find("parameters.model.kappa") != std::string::npos);

  doc = strong_drive_doc();
  doc["parameters"]["model"]["kapa"] = 10;
  CHECK(error_of(doc) == "parameters.model.kapa: unknown key");

  doc = strong_drive_doc();
  doc["parameters"]["quantum"] = Json::object();
  CHECK_FALSE(error_of(doc).empty());

  doc = strong_drive_doc();
  doc["parameters"]["model"]["g_over_gc"] = 1.2;
  doc["parameters"]["model"].erase("g_over_gc2");
  CHECK_FALSE(error_of(doc).empty());

  CHECK_FALSE(error_of(Json::parse(R"({"parameters": {}})")).empty());
  CHECK_FALSE(error_of(Json::parse(R"({"task": "dtc-run", "extra": 1})")).empty());
  CHECK_THROWS_AS(parse_config(std::string_view("{not json")), ConfigError);
}

TEST_CASE("random key insertions are always rejected") {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> junk = {"x", "t_1", "Delta", "omega", "kappa2", "gg", "mode",
                                         "n", "seed", "workerz"};
  for (const std::string& name : preset_names()) {
    const Json base = Json::parse(preset_text(name));
    for (int trial = 0; trial < 20; ++trial) {
      Json doc = base;
      const std::string key = junk[rng() % junk.size()] + std::to_string(rng() % 100);
      const int where = static_cast<int>(rng() % 3);
      Json& params = doc["parameters"];
      if (where == 0 || params.empty()) {
        doc[key] = 1;
      } else if (where == 1) {
        params[key] = Json::object();
      } else {
        auto it = params.begin();
        std::advance(it, static_cast<long>(rng() % params.size()));
        it.value()[key] = 0.5;
      }
      CHECK_THROWS_AS(parse_config(doc), ConfigError);
    }
  }
}

TEST_CASE("resolved parameters re-parse to the same run") {
  for (const std::string& name : preset_names()) {
    CAPTURE(name);
    const RunConfig a = load_preset(name);
    const RunConfig b = parse_config(
        Json{{"task", std::string(task_name(a.task))}, {"parameters", a.parameters}});
    CHECK(a.parameters == b.parameters);
  }
  CHECK_THROWS_AS(load_preset("fig99"), ConfigError);
  const RunConfig over = load_preset("fig4", Json::parse(R"({"parameters": {"run": {"n_periods": 3}}})"));
  CHECK(over.parameters["run"]["n_periods"] == 3);
  CHECK(over.preset == "fig4");
}

TEST_CASE("sidecar re-runs the job identically") {
  const fs::path d1 = scratch("rt1"), d2 = scratch("rt2");
  RunConfig cfg = parse_config(strong_drive_doc());
  cfg.output = d1.string();
  ExecuteOptions quiet;
  quiet.quiet = true;
  REQUIRE(execute(cfg, quiet).exit_code == exit_ok);
  const Json meta = Json::parse(slurp(d1 / "metadata.json"));
  CHECK(meta["artifact_version"] == artifact_version());
  CHECK(meta.contains("wall_time_seconds"));
  CHECK(meta["tolerances"]["abs_tol"] == 1e-10);
  Json again = meta["config"];
  again["output"] = d2.string();
  REQUIRE(execute(parse_config(again), quiet).exit_code == exit_ok);
  CHECK(slurp(d1 / "stroboscopic.csv") == slurp(d2 / "stroboscopic.csv"));
  CHECK(slurp(d1 / "fourier.csv") == slurp(d2 / "fourier.csv"));
}

TEST_CASE("csv values round trip exactly") {
  const fs::path d = scratch("steady");
  RunConfig cfg = parse_config(Json::parse(
      R"({"task": "steady", "parameters": {"model": {"g_over_gc": 1.2}}})"));
  cfg.output = d.string();
  ExecuteOptions quiet;
  quiet.quiet = true;
  const TaskResult r = execute(cfg, quiet);
  REQUIRE(r.exit_code == exit_ok);
  std::istringstream csv(slurp(d / "steady.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(header.rfind("branch,g,g_over_gc,", 0) == 0);
  std::vector<std::string> cells;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
  CHECK(cells[0] == "plus");
  CHECK(std::strtod(cells[9].c_str(), nullptr) ==
        r.summary["branches"][0]["delta_n_bar"].get<double>() / 200.0);
  CHECK(std::strtod(cells[5].c_str(), nullptr) == r.summary["branches"][0]["d_bar_sq"].get<double>());
}

TEST_CASE("phase diagram output is independent of the worker count") {
  const Json over = Json::parse(R"({"parameters": {
      "diagram": {"axis1": [20, 50, 80], "axis2": [4, 10, 16]},
      "schedule": {"t2": 40}, "run": {"n_periods": 8}, "criteria": {"discard": 2}}})");
  std::string first;
  for (int w : {1, 4}) {
    RunConfig cfg = load_preset("fig6a", over);
    cfg.workers = w;
    cfg.output = scratch("diag" + std::to_string(w)).string();
    ExecuteOptions quiet;
    quiet.quiet = true;
    REQUIRE(execute(cfg, quiet).exit_code == exit_ok);
    const std::string csv = slurp(fs::path(cfg.output) / "phase_diagram.csv");
    if (first.empty()) first = csv;
    else CHECK(csv == first);
  }
}

TEST_CASE("failed sweep points are isolated") {
  const Json over = Json::parse(R"({"parameters": {
      "diagram": {"axis1": [40, -10], "axis2": [10]},
      "schedule": {"t2": 40}, "run": {"n_periods": 6}, "criteria": {"discard": 1}}})");
  RunConfig cfg = load_preset("fig6a", over);
  ExecuteOptions opt;
  opt.write_files = false;
  opt.quiet = true;
  const TaskResult r = execute(cfg, opt);
  CHECK(r.exit_code == exit_ok);
  CHECK(r.summary["failed_points"] == 1);
  CHECK(r.summary["points"] == 2);
}

TEST_CASE("exit codes") {
  ExecuteOptions opt;
  opt.write_files = false;
  opt.quiet = true;
  RunConfig bad = parse_config(strong_drive_doc());
  bad.parameters["model"]["kappa"] = -3.0;
  CHECK(execute(bad, opt).exit_code == exit_config_error);

  RunConfig lifetimes = load_preset("fig8", Json::parse(R"({"parameters": {
      "quantum": {"n_values": [3], "periods": [2]}, "lifetime": {"min_alternations": 50}}})"));
  const TaskResult r = execute(lifetimes, opt);
  CHECK(r.exit_code == exit_numerical_failure);
  CHECK(r.summary["failed_points"] == 1);

  RunConfig v = parse_config(Json{{"task", "validate"}});
  CHECK(execute(v, opt).exit_code == exit_ok);
}

TEST_CASE("worker resolution") {
  ::unsetenv(kWorkersEnv);
  CHECK(resolve_workers(std::nullopt, 3) == 3);
  CHECK(resolve_workers(2, 3) == 2);
  ::setenv(kWorkersEnv, "5", 1);
  CHECK(resolve_workers(std::nullopt, 3) == 5);
  CHECK(resolve_workers(2, 3) == 2);
  ::setenv(kWorkersEnv, "many", 1);
  CHECK_THROWS_AS(resolve_workers(std::nullopt, 1), ConfigError);
  ::unsetenv(kWorkersEnv);
  CHECK_THROWS_AS(resolve_workers(0, 1), ConfigError);
}

TEST_CASE("schema reference covers every task and key") {
  const std::string s = schema_reference();
  for (Task t : all_tasks()) CHECK(s.find(std::string(task_name(t))) != std::string::npos);
  for (const char* key : {"g_over_gc2", "symmetry_seed", "fock_cutoff", "fit_radius",
                          "min_alternations", "omega_m_over_nj", "branch_seed"}) {
    CHECK(s.find(key) != std::string::npos);
  }
}

TEST_CASE("every task has a preset or runs quickly from defaults") {
  CHECK(preset_names().size() == 11);
  const std::vector<std::string> expected = {"fig2", "fig3", "fig4", "fig5", "fig6a", "fig6b",
                                             "fig7", "fig8", "fig9", "figA1", "figA2"};
  for (const std::string& n : expected) CHECK_NOTHROW(load_preset(n));
}
