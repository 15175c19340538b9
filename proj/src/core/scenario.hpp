#pragma once

#include <cstdint>
#include <limits>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "dynamics.hpp"
#include "games.hpp"
#include "protocols.hpp"
#include "typegrid.hpp"

namespace heterodyn {

// Carries every validation failure found in a scenario document, not just
// the first; each message is prefixed with the JSON path of the offending
// field.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors);
  std::vector<std::string> errors_;
};

struct InitialStateSpec {
  enum class Kind { Uniform, Pure, Rows, Random };
  Kind kind = Kind::Uniform;
  int strategy = 0;        // Pure
  Matrix rows;             // Rows: K x S
  std::uint64_t seed = 0;  // Random (required in the document)
};

// One diagnostic to evaluate after a run. Tolerance semantics are
// per-check (see README); a NaN tol means "use the documented default".
struct CheckSpec {
  std::string name;
  double tol = std::numeric_limits<double>::quiet_NaN();
  Vector target;  // aggregate_near only
};

struct EquilibriumOptions {
  double damping = 0.5;
  int max_iters = 2000;
  double tol = 1e-12;
};

struct PotentialCheckOptions {
  int n_pairs = 100;
  double h = 1e-3;
  std::uint64_t seed = 2718;
};

struct ProbeOptions {
  std::optional<Vector> aggregate_target;  // default: aggregate of the initial state
  int n_states = 4;
  std::uint64_t seed = 99;
};

struct AssumptionOptions {
  int n_samples = 64;
  std::uint64_t seed = 20240901;
};

struct OutputOptions {
  std::string dir = "out";
  bool trajectory = true;
  bool diagnostics = true;
};

struct ScenarioConfig {
  std::string name;
  DistSpec dist;
  int n_nodes = 1;
  GameSpec game = GameSpec::asag(CommonPayoff::zero(2), ThetaMap{});
  std::vector<ProtocolSpec> protocols;
  AssignmentRule assignment;
  InitialStateSpec initial_state;
  IntegratorConfig integrator;
  double tie_tol = 1e-9;
  double mass_tol = 1e-8;
  EquilibriumOptions equilibrium;
  PotentialCheckOptions potential_check;
  ProbeOptions probe;
  AssumptionOptions assumptions;
  OutputOptions outputs;
  std::vector<CheckSpec> checks;

  // Parses and fully validates a scenario document. Collects every problem
  // it can find and throws a single ScenarioError listing all of them.
  static ScenarioConfig parse(const std::string& text);
  static ScenarioConfig parse_json(const nlohmann::json& j);

  nlohmann::json to_json() const;
  std::string serialize() const;  // parse(serialize(c)) == c

  TypeGrid build_grid() const;
  Matrix build_initial_state(const TypeGrid& grid) const;
  ProtocolAssignment build_assignment(const TypeGrid& grid) const;
};

// Reads and parses a scenario file; I/O problems surface as
// std::runtime_error, validation problems as ScenarioError.
ScenarioConfig load_scenario_file(const std::string& path);

}  // namespace heterodyn
