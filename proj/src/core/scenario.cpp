#include "core/scenario.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace heterodyn {

namespace {

using nlohmann::json;

Matrix parse_matrix(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::invalid_argument(std::string(what) + ": expected a 2d array");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols)
      throw std::invalid_argument(std::string(what) + ": ragged rows");
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Vector parse_vector(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(std::string(what) + ": expected a nonempty array");
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& path, std::vector<std::string>& errs) {
  if (!j.is_object()) return;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      errs.push_back(path + "." + it.key() + ": unknown field");
}

// Node count a distribution will discretize to, without building the grid.
int expected_nodes(const DistSpec& dist, int n_nodes) {
  switch (dist.kind) {
    case DistSpec::Kind::Discrete:
      return static_cast<int>(dist.points.rows());
    case DistSpec::Kind::Product: {
      long long total = 1;
      for (int n : dist.marginal_nodes) total *= n;
      return static_cast<int>(total);
    }
    default:
      return n_nodes;
  }
}

int type_dim(const DistSpec& dist) {
  switch (dist.kind) {
    case DistSpec::Kind::Discrete:
      return static_cast<int>(dist.points.cols());
    case DistSpec::Kind::Product:
      return static_cast<int>(dist.marginals.size());
    default:
      return 1;
  }
}

const std::set<std::string> kKnownChecks = {
    "simplex",    "renorm",        "pc",           "lyapunov",
    "welfare",    "terminal_residual", "aggregate_near", "spread_min",
    "spread_max", "converged",     "gradient_error", "gradient_order"};

CheckSpec parse_check(const json& j) {
  CheckSpec c;
  if (j.is_string()) {
    c.name = j.get<std::string>();
  } else if (j.is_object()) {
    if (!j.contains("name")) throw std::invalid_argument("check object needs a name");
    c.name = j.at("name").get<std::string>();
    if (j.contains("tol")) {
      c.tol = j.at("tol").get<double>();
      if (!(c.tol >= 0.0)) throw std::invalid_argument("tol must be nonnegative");
    }
    if (j.contains("target")) c.target = parse_vector(j.at("target"), "target");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "name" && it.key() != "tol" && it.key() != "target")
        throw std::invalid_argument("unknown field '" + it.key() + "'");
  } else {
    throw std::invalid_argument("expected a string or an object");
  }
  if (!kKnownChecks.count(c.name))
    throw std::invalid_argument("unknown check '" + c.name + "'");
  return c;
}

json check_json(const CheckSpec& c) {
  json j;
  j["name"] = c.name;
  if (!std::isnan(c.tol)) j["tol"] = c.tol;
  if (c.target.size() > 0) j["target"] = vector_json(c.target);
  return j;
}

InitialStateSpec parse_initial_state(const json& j) {
  InitialStateSpec s;
  if (!j.is_object()) throw std::invalid_argument("expected an object");
  std::string kind = j.value("type", std::string("uniform"));
  if (kind == "uniform") {
    s.kind = InitialStateSpec::Kind::Uniform;
  } else if (kind == "pure") {
    s.kind = InitialStateSpec::Kind::Pure;
    if (!j.contains("strategy"))
      throw std::invalid_argument("pure initial state needs a strategy index");
    s.strategy = j.at("strategy").get<int>();
    if (s.strategy < 0) throw std::invalid_argument("strategy index must be nonnegative");
  } else if (kind == "rows") {
    s.kind = InitialStateSpec::Kind::Rows;
    if (!j.contains("rows"))
      throw std::invalid_argument("rows initial state needs a rows matrix");
    s.rows = parse_matrix(j.at("rows"), "rows");
    for (int r = 0; r < s.rows.rows(); ++r) {
      double sum = s.rows.row(r).sum();
      if (s.rows.row(r).minCoeff() < 0.0 || std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("row " + std::to_string(r) +
                                    " is not a probability vector");
    }
  } else if (kind == "random") {
    s.kind = InitialStateSpec::Kind::Random;
    if (!j.contains("seed"))
      throw std::invalid_argument("random initial state needs an explicit seed");
    s.seed = j.at("seed").get<std::uint64_t>();
  } else {
    throw std::invalid_argument("unknown type '" + kind + "'");
  }
  return s;
}

json initial_state_json(const InitialStateSpec& s) {
  json j;
  switch (s.kind) {
    case InitialStateSpec::Kind::Uniform:
      j["type"] = "uniform";
      break;
    case InitialStateSpec::Kind::Pure:
      j["type"] = "pure";
      j["strategy"] = s.strategy;
      break;
    case InitialStateSpec::Kind::Rows:
      j["type"] = "rows";
      j["rows"] = matrix_json(s.rows);
      break;
    case InitialStateSpec::Kind::Random:
      j["type"] = "random";
      j["seed"] = s.seed;
      break;
  }
  return j;
}

IntegratorConfig parse_integrator(const json& j) {
  IntegratorConfig cfg;
  if (!j.is_object()) throw std::invalid_argument("expected an object");
  std::string method = j.value("method", std::string("rk4"));
  if (method == "rk4")
    cfg.method = IntegratorConfig::Method::Rk4;
  else if (method == "euler")
    cfg.method = IntegratorConfig::Method::Euler;
  else
    throw std::invalid_argument("unknown method '" + method + "'");
  cfg.dt = j.value("dt", 0.01);
  cfg.t_end = j.value("t_end", 10.0);
  cfg.sample_every = j.value("sample_every", 10);
  cfg.clamp_tol = j.value("clamp_tol", 1e-9);
  cfg.validate();
  return cfg;
}

json integrator_json(const IntegratorConfig& cfg) {
  json j;
  j["method"] = cfg.method == IntegratorConfig::Method::Rk4 ? "rk4" : "euler";
  j["dt"] = cfg.dt;
  j["t_end"] = cfg.t_end;
  j["sample_every"] = cfg.sample_every;
  j["clamp_tol"] = cfg.clamp_tol;
  return j;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> errors)
    : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

std::string ScenarioError::join(const std::vector<std::string>& errors) {
  std::ostringstream out;
  out << "scenario validation failed (" << errors.size() << " problem"
      << (errors.size() == 1 ? "" : "s") << "):";
  for (const auto& e : errors) out << "\n  - " << e;
  return out.str();
}

ScenarioConfig ScenarioConfig::parse(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError({std::string("document: ") + e.what()});
  }
  return parse_json(doc);
}

ScenarioConfig ScenarioConfig::parse_json(const json& doc) {
  std::vector<std::string> errs;
  if (!doc.is_object()) throw ScenarioError({"document: expected a JSON object"});

  auto attempt = [&errs](const std::string& path, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errs.push_back(path + ": " + e.what());
    }
  };

  reject_unknown_keys(doc,
                      {"name", "grid", "game", "protocols", "assignment",
                       "initial_state", "integrator", "tie_tol", "mass_tol",
                       "equilibrium", "potential_check", "probe", "assumptions",
                       "outputs", "checks"},
                      "document", errs);

  ScenarioConfig cfg;
  bool have_game = false, have_dist = false;

  attempt("name", [&] {
    if (!doc.contains("name")) throw std::invalid_argument("missing required field");
    cfg.name = doc.at("name").get<std::string>();
    if (cfg.name.empty()) throw std::invalid_argument("must be nonempty");
  });

  attempt("grid", [&] {
    if (!doc.contains("grid")) throw std::invalid_argument("missing required field");
    const json& g = doc.at("grid");
    if (!g.is_object()) throw std::invalid_argument("expected an object");
    if (!g.contains("dist")) throw std::invalid_argument("missing dist");
    cfg.dist = DistSpec::from_json(g.at("dist"));
    have_dist = true;
    cfg.n_nodes = g.value("n_nodes", 1);
    if (cfg.n_nodes < 1) throw std::invalid_argument("n_nodes must be at least 1");
  });

  attempt("game", [&] {
    if (!doc.contains("game")) throw std::invalid_argument("missing required field");
    cfg.game = GameSpec::from_json(doc.at("game"));
    have_game = true;
  });

  if (doc.contains("protocols")) {
    const json& ps = doc.at("protocols");
    if (!ps.is_array() || ps.empty()) {
      errs.push_back("protocols: expected a nonempty array");
    } else {
      for (size_t i = 0; i < ps.size(); ++i)
        attempt("protocols[" + std::to_string(i) + "]",
                [&] { cfg.protocols.push_back(ProtocolSpec::from_json(ps[i])); });
    }
  } else {
    errs.push_back("protocols: missing required field");
  }

  if (doc.contains("assignment"))
    attempt("assignment", [&] { cfg.assignment = AssignmentRule::from_json(doc.at("assignment")); });

  if (doc.contains("initial_state"))
    attempt("initial_state", [&] { cfg.initial_state = parse_initial_state(doc.at("initial_state")); });

  attempt("integrator", [&] {
    cfg.integrator = parse_integrator(doc.contains("integrator") ? doc.at("integrator")
                                                                 : json::object());
  });

  attempt("tie_tol", [&] {
    cfg.tie_tol = doc.value("tie_tol", 1e-9);
    if (!(cfg.tie_tol > 0.0)) throw std::invalid_argument("must be positive");
  });
  attempt("mass_tol", [&] {
    cfg.mass_tol = doc.value("mass_tol", 1e-8);
    if (!(cfg.mass_tol > 0.0)) throw std::invalid_argument("must be positive");
  });
  cfg.integrator.tie_tol = cfg.tie_tol;

  if (doc.contains("equilibrium"))
    attempt("equilibrium", [&] {
      const json& e = doc.at("equilibrium");
      reject_unknown_keys(e, {"damping", "max_iters", "tol"}, "equilibrium", errs);
      cfg.equilibrium.damping = e.value("damping", 0.5);
      cfg.equilibrium.max_iters = e.value("max_iters", 2000);
      cfg.equilibrium.tol = e.value("tol", 1e-12);
      if (!(cfg.equilibrium.damping > 0.0 && cfg.equilibrium.damping <= 1.0))
        throw std::invalid_argument("damping must be in (0, 1]");
      if (cfg.equilibrium.max_iters < 1)
        throw std::invalid_argument("max_iters must be at least 1");
      if (!(cfg.equilibrium.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    });

  if (doc.contains("potential_check"))
    attempt("potential_check", [&] {
      const json& p = doc.at("potential_check");
      reject_unknown_keys(p, {"n_pairs", "h", "seed"}, "potential_check", errs);
      cfg.potential_check.n_pairs = p.value("n_pairs", 100);
      cfg.potential_check.h = p.value("h", 1e-3);
      if (p.contains("seed")) cfg.potential_check.seed = p.at("seed").get<std::uint64_t>();
      if (cfg.potential_check.n_pairs < 1)
        throw std::invalid_argument("n_pairs must be at least 1");
      if (!(cfg.potential_check.h > 0.0 && cfg.potential_check.h < 0.5))
        throw std::invalid_argument("h must be in (0, 0.5)");
    });

  if (doc.contains("probe"))
    attempt("probe", [&] {
      const json& p = doc.at("probe");
      reject_unknown_keys(p, {"aggregate_target", "n_states", "seed"}, "probe", errs);
      if (p.contains("aggregate_target"))
        cfg.probe.aggregate_target = parse_vector(p.at("aggregate_target"), "aggregate_target");
      cfg.probe.n_states = p.value("n_states", 4);
      if (p.contains("seed")) cfg.probe.seed = p.at("seed").get<std::uint64_t>();
      if (cfg.probe.n_states < 1) throw std::invalid_argument("n_states must be at least 1");
    });

  if (doc.contains("assumptions"))
    attempt("assumptions", [&] {
      const json& a = doc.at("assumptions");
      reject_unknown_keys(a, {"n_samples", "seed"}, "assumptions", errs);
      cfg.assumptions.n_samples = a.value("n_samples", 64);
      if (a.contains("seed")) cfg.assumptions.seed = a.at("seed").get<std::uint64_t>();
      if (cfg.assumptions.n_samples < 1)
        throw std::invalid_argument("n_samples must be at least 1");
    });

  if (doc.contains("outputs"))
    attempt("outputs", [&] {
      const json& o = doc.at("outputs");
      reject_unknown_keys(o, {"dir", "trajectory", "diagnostics"}, "outputs", errs);
      cfg.outputs.dir = o.value("dir", std::string("out"));
      cfg.outputs.trajectory = o.value("trajectory", true);
      cfg.outputs.diagnostics = o.value("diagnostics", true);
      if (cfg.outputs.dir.empty()) throw std::invalid_argument("dir must be nonempty");
    });

  if (doc.contains("checks")) {
    const json& cs = doc.at("checks");
    if (!cs.is_array()) {
      errs.push_back("checks: expected an array");
    } else {
      for (size_t i = 0; i < cs.size(); ++i)
        attempt("checks[" + std::to_string(i) + "]",
                [&] { cfg.checks.push_back(parse_check(cs[i])); });
    }
  }

  // Cross-field consistency. Only possible for the parts that parsed.
  int expected_k = have_dist ? expected_nodes(cfg.dist, cfg.n_nodes) : -1;
  int dim = have_dist ? type_dim(cfg.dist) : -1;
  int n_strat = have_game ? cfg.game.strategies() : -1;

  if (!cfg.protocols.empty()) {
    int np = static_cast<int>(cfg.protocols.size());
    switch (cfg.assignment.kind) {
      case AssignmentRule::Kind::Uniform:
        if (cfg.assignment.protocol < 0 || cfg.assignment.protocol >= np)
          errs.push_back("assignment.protocol: index " +
                         std::to_string(cfg.assignment.protocol) +
                         " out of range for " + std::to_string(np) + " protocols");
        break;
      case AssignmentRule::Kind::ByNode:
        if (expected_k >= 0 &&
            static_cast<int>(cfg.assignment.node_list.size()) != expected_k)
          errs.push_back("assignment.protocols: got " +
                         std::to_string(cfg.assignment.node_list.size()) +
                         " entries for a grid of " + std::to_string(expected_k) +
                         " nodes");
        for (int idx : cfg.assignment.node_list)
          if (idx < 0 || idx >= np) {
            errs.push_back("assignment.protocols: index " + std::to_string(idx) +
                           " out of range for " + std::to_string(np) + " protocols");
            break;
          }
        break;
      case AssignmentRule::Kind::Threshold:
        if (dim >= 0 && (cfg.assignment.coord < 0 || cfg.assignment.coord >= dim))
          errs.push_back("assignment.coord: coordinate " +
                         std::to_string(cfg.assignment.coord) +
                         " out of range for type dimension " + std::to_string(dim));
        if (cfg.assignment.below < 0 || cfg.assignment.below >= np ||
            cfg.assignment.otherwise < 0 || cfg.assignment.otherwise >= np)
          errs.push_back("assignment: threshold protocol index out of range for " +
                         std::to_string(np) + " protocols");
        break;
    }
  }

  if (n_strat > 0) {
    if (cfg.initial_state.kind == InitialStateSpec::Kind::Pure &&
        cfg.initial_state.strategy >= n_strat)
      errs.push_back("initial_state.strategy: index " +
                     std::to_string(cfg.initial_state.strategy) +
                     " out of range; game defines " + std::to_string(n_strat) +
                     " strategies");
    if (cfg.initial_state.kind == InitialStateSpec::Kind::Rows) {
      if (cfg.initial_state.rows.cols() != n_strat)
        errs.push_back("initial_state.rows: rows have " +
                       std::to_string(cfg.initial_state.rows.cols()) +
                       " entries but game defines " + std::to_string(n_strat) +
                       " strategies");
      if (expected_k >= 0 && cfg.initial_state.rows.rows() != expected_k)
        errs.push_back("initial_state.rows: got " +
                       std::to_string(cfg.initial_state.rows.rows()) +
                       " rows for a grid of " + std::to_string(expected_k) + " nodes");
    }
    if (cfg.probe.aggregate_target && cfg.probe.aggregate_target->size() != n_strat)
      errs.push_back("probe.aggregate_target: got " +
                     std::to_string(cfg.probe.aggregate_target->size()) +
                     " entries but game defines " + std::to_string(n_strat) +
                     " strategies");
    for (size_t i = 0; i < cfg.checks.size(); ++i)
      if (cfg.checks[i].name == "aggregate_near" &&
          cfg.checks[i].target.size() != n_strat)
        errs.push_back("checks[" + std::to_string(i) +
                       "].target: aggregate_near needs a target of length " +
                       std::to_string(n_strat));
  }

  if (have_dist && have_game && errs.empty()) {
    // Grid construction can still fail (e.g. duplicate discrete points);
    // surface that at parse time rather than at run time.
    try {
      TypeGrid grid = cfg.build_grid();
      if (cfg.game.kind() == GameSpec::Kind::Asag &&
          cfg.game.theta_map().kind == ThetaMap::Kind::Identity &&
          grid.dim() != n_strat)
        errs.push_back("game.theta_map: identity map needs type dimension " +
                       std::to_string(n_strat) + " to match the strategy count, got " +
                       std::to_string(grid.dim()));
      if (cfg.game.kind() == GameSpec::Kind::Asag &&
          cfg.game.theta_map().kind == ThetaMap::Kind::Linear &&
          cfg.game.theta_map().m.cols() != grid.dim())
        errs.push_back("game.theta_map.matrix: has " +
                       std::to_string(cfg.game.theta_map().m.cols()) +
                       " columns but the type dimension is " +
                       std::to_string(grid.dim()));
    } catch (const std::exception& e) {
      errs.push_back(std::string("grid: ") + e.what());
    }
  }

  if (!errs.empty()) throw ScenarioError(std::move(errs));
  return cfg;
}

json ScenarioConfig::to_json() const {
  json j;
  j["name"] = name;
  j["grid"]["dist"] = dist.to_json();
  j["grid"]["n_nodes"] = n_nodes;
  j["game"] = game.to_json();
  json ps = json::array();
  for (const auto& p : protocols) ps.push_back(p.to_json());
  j["protocols"] = ps;
  j["assignment"] = assignment.to_json();
  j["initial_state"] = initial_state_json(initial_state);
  j["integrator"] = integrator_json(integrator);
  j["tie_tol"] = tie_tol;
  j["mass_tol"] = mass_tol;
  j["equilibrium"] = {{"damping", equilibrium.damping},
                      {"max_iters", equilibrium.max_iters},
                      {"tol", equilibrium.tol}};
  j["potential_check"] = {{"n_pairs", potential_check.n_pairs},
                          {"h", potential_check.h},
                          {"seed", potential_check.seed}};
  j["probe"] = {{"n_states", probe.n_states}, {"seed", probe.seed}};
  if (probe.aggregate_target)
    j["probe"]["aggregate_target"] = vector_json(*probe.aggregate_target);
  j["assumptions"] = {{"n_samples", assumptions.n_samples}, {"seed", assumptions.seed}};
  j["outputs"] = {{"dir", outputs.dir},
                  {"trajectory", outputs.trajectory},
                  {"diagnostics", outputs.diagnostics}};
  json cs = json::array();
  for (const auto& c : checks) cs.push_back(check_json(c));
  j["checks"] = cs;
  return j;
}

std::string ScenarioConfig::serialize() const { return to_json().dump(2) + "\n"; }

TypeGrid ScenarioConfig::build_grid() const { return TypeGrid::build(dist, n_nodes); }

Matrix ScenarioConfig::build_initial_state(const TypeGrid& grid) const {
  int k = grid.size();
  int n_strat = game.strategies();
  switch (initial_state.kind) {
    case InitialStateSpec::Kind::Uniform:
      return Matrix::Constant(k, n_strat, 1.0 / n_strat);
    case InitialStateSpec::Kind::Pure: {
      Matrix x = Matrix::Zero(k, n_strat);
      x.col(initial_state.strategy).setOnes();
      return x;
    }
    case InitialStateSpec::Kind::Rows:
      if (initial_state.rows.rows() != k || initial_state.rows.cols() != n_strat)
        throw std::invalid_argument("initial_state.rows: dimensions do not match the grid");
      return initial_state.rows;
    case InitialStateSpec::Kind::Random: {
      Rng rng(initial_state.seed);
      Matrix x(k, n_strat);
      for (int r = 0; r < k; ++r) x.row(r) = random_simplex_row(rng, n_strat).transpose();
      return x;
    }
  }
  throw std::logic_error("unreachable initial state kind");
}

ProtocolAssignment ScenarioConfig::build_assignment(const TypeGrid& grid) const {
  return assign_protocols(grid, assignment, protocols);
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ScenarioConfig::parse(buf.str());
}

}  // namespace heterodyn
