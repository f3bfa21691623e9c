#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "optodtc/cli_io.hpp"

using namespace optodtc;

namespace {

Json read_document(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("--config: cannot read " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string text = buf.str();
  try {
    return Json::parse(text, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("--config: malformed JSON in " + path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optomechanical time-crystal simulations"};
  app.set_version_flag("--version", artifact_version());

  std::string task_text;
  std::string config_path;
  std::string output;
  std::string preset;
  std::optional<int> workers;
  bool quiet = false;
  bool print_config = false;

  std::string tasks_help = "one of:";
  for (Task t : all_tasks()) tasks_help += " " + std::string(task_name(t));
  tasks_help += "; or 'schema' / 'presets' for reference output";
  app.add_option("task", task_text, tasks_help)->required();
  app.add_option("-c,--config", config_path, "JSON run configuration");
  app.add_option("-w,--workers", workers,
                 std::string("worker threads (overrides ") + kWorkersEnv + " and the config)");
  app.add_option("-o,--output", output, "output directory (overrides the config)");
  app.add_option("-p,--preset", preset, "start from an embedded preset; --config is merged on top");
  app.add_flag("-q,--quiet", quiet, "no run header");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config_error;
  }

  if (task_text == "schema") {
    std::cout << schema_reference();
    return exit_ok;
  }
  if (task_text == "presets") {
    for (const std::string& name : preset_names()) {
      const RunConfig c = load_preset(name);
      std::cout << name << "  " << task_name(c.task) << '\n';
    }
    return exit_ok;
  }

  RunConfig cfg;
  try {
    const std::optional<Task> task = parse_task(task_text);
    if (!task) throw ConfigError("task: unknown task \"" + task_text + "\"");
    const Json doc = config_path.empty() ? Json::object() : read_document(config_path);
    if (!preset.empty()) {
      cfg = load_preset(preset, doc, *task);
    } else if (!config_path.empty()) {
      cfg = parse_config(doc, *task);
    } else if (*task == Task::validate) {
      cfg = parse_config(Json{{"task", "validate"}}, *task);
    } else {
      throw ConfigError("--config or --preset is required for " + task_text);
    }
    if (!output.empty()) cfg.output = output;
    cfg.workers = resolve_workers(workers, cfg.workers);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config_error;
  }

  if (print_config) {
    Json doc = {{"task", std::string(task_name(cfg.task))},
                {"output", cfg.output},
                {"workers", cfg.workers},
                {"parameters", cfg.parameters}};
    if (!cfg.preset.empty()) doc["preset"] = cfg.preset;
    std::cout << doc.dump(2) << '\n';
    return exit_ok;
  }

  ExecuteOptions opt;
  opt.quiet = quiet;
  return execute(cfg, opt).exit_code;
}
