#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "scenario.hpp"

namespace heterodyn {

// Command-line overrides applied on top of a parsed scenario. The seed
// override steers every seeded block of the scenario (initial state,
// potential-check pairs, probe states, assumption samples).
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<std::string> out_dir;
};

struct RunOutcome {
  // 0 all requested checks passed; 1 at least one check failed;
  // 2 configuration problem; 3 I/O failure; 4 runtime failure
  // (e.g. non-finite state during integration).
  int exit_code = 0;
  nlohmann::json summary;  // also written to <out>/summary.json
};

// Executes one command against a parsed scenario and writes its artifacts
// under the output directory:
//   simulate           trajectory.csv, diagnostics.csv
//   equilibrium        equilibrium.json
//   potential-check    potential_check.json
//   aggregability-demo aggregability.json
//   assumptions        assumptions.json
// plus summary.json in every case. Checks listed in the scenario are
// evaluated when they apply to the command; requested checks that do not
// apply are reported as skipped.
RunOutcome run_scenario(const ScenarioConfig& config, const std::string& command,
                        const RunOverrides& overrides = {});

}  // namespace heterodyn
