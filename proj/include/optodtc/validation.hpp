#pragma once

// Invariant suite run by the `validate` task.

#include <string>
#include <vector>

namespace optodtc {

struct ValidationCheck {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs every check; a throwing check is recorded as failed.
std::vector<ValidationCheck> run_validation_suite(int workers = 1);

bool all_passed(const std::vector<ValidationCheck>& checks);

/// Fixed-width pass/fail table.
std::string format_validation_table(const std::vector<ValidationCheck>& checks);

}  // namespace optodtc
