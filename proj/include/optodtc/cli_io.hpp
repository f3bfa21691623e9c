#pragma once

// Batch interface: JSON run configurations with a strict schema, embedded
// figure presets, task dispatch, CSV + JSON sidecar output.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace optodtc {

using Json = nlohmann::ordered_json;

enum class Task {
  steady,
  dynamics_full,
  dynamics_effective,
  transition_sweep,
  dtc_run,
  dtc_phase_diagram,
  quantum_run,
  quantum_lifetimes,
  spectrum_solve,
  spectrum_scan,
  validate,
};

std::optional<Task> parse_task(std::string_view name);
std::string_view task_name(Task task);
std::vector<Task> all_tasks();

enum ExitCode : int {
  exit_ok = 0,
  exit_config_error = 2,
  exit_numerical_failure = 3,
  exit_validation_failure = 4,
};

/// Malformed document, unknown key, type mismatch or violated constraint.
/// The message names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed and validated configuration. `parameters` holds the fully resolved
/// parameter document (defaults filled in), which parses back to the same run.
struct RunConfig {
  Task task = Task::validate;
  Json parameters = Json::object();
  std::string output = "out";
  int workers = 1;
  std::string preset;  ///< name of the preset the config derives from, if any
};

/// Parse a JSON document {"task", "parameters", "output", "workers"}. When
/// `task` is given it must agree with the document's task (if present).
RunConfig parse_config(std::string_view text, std::optional<Task> task = {});
RunConfig parse_config(const Json& document, std::optional<Task> task = {});

/// Names of the embedded presets and their raw JSON text.
std::vector<std::string> preset_names();
std::string preset_text(const std::string& name);

/// Preset document with `overrides` merged in (RFC 7386 merge patch), parsed.
RunConfig load_preset(const std::string& name, const Json& overrides = Json::object(),
                      std::optional<Task> task = {});

/// Worker count from the command line, else OPTODTC_WORKERS, else `fallback`.
int resolve_workers(std::optional<int> cli_value, int fallback);
inline constexpr const char* kWorkersEnv = "OPTODTC_WORKERS";

/// Markdown reference of every task, section and key with types, defaults
/// and units.
std::string schema_reference();

struct ExecuteOptions {
  bool write_files = true;
  bool quiet = false;  ///< suppress the run header and the validate table
};

struct TaskResult {
  int exit_code = exit_ok;
  Json summary = Json::object();  ///< task-specific key results
  Json metadata = Json::object();  ///< content of the sidecar
  std::vector<std::string> files;  ///< written artifacts
  std::string message;             ///< failure description
};

/// Run the task; failures are reported through exit_code, never thrown.
TaskResult execute(const RunConfig& config, const ExecuteOptions& options = {});

/// Version string recorded in every sidecar.
std::string artifact_version();

}  // namespace optodtc
