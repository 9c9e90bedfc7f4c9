#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cimtherm/tech_params.hpp"

namespace cimtherm {

struct CheckResult {
  int id = 0;
  std::string title;
  std::string reference;  // published value or expected bound
  std::string computed;
  std::string tolerance;
  bool pass = false;
  bool model_inconsistency = false;  // failure came from a truth-table disagreement
  double seconds = 0.0;
};

struct AcceptanceOptions {
  TechnologyParams stt = builtin_technology(TechKind::STT);
  TechnologyParams she = builtin_technology(TechKind::SHE);
  bool stress = true;  // the 2.1M-node lg solve
};

/// Runs the eleven acceptance checks in order. `on_result` sees each one as
/// it finishes.
std::vector<CheckResult> run_acceptance(const AcceptanceOptions& options = {},
                                        const std::function<void(const CheckResult&)>& on_result = {});

/// "[PASS] 4 utilization scaling | reference ... | computed ... | tolerance ... | 1.2 s"
std::string format_check(const CheckResult& check);

}  // namespace cimtherm
