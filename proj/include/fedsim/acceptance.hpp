#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fedsim {

struct CriterionResult {
  int number = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs the full acceptance suite. `scratch_dir` receives the temporary
/// artifacts (report directories used by the file-level checks).
std::vector<CriterionResult> run_acceptance(const std::string& scratch_dir);

/// Prints one pass/fail line per criterion; returns the number of failures.
int print_acceptance(const std::vector<CriterionResult>& results, std::ostream& out);

}  // namespace fedsim
