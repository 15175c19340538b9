#include "core/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/csv.hpp"
#include "core/equilibrium.hpp"
#include "core/potential.hpp"

namespace heterodyn {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kNoiseFloor = 1e-11;  // FD differences below this are rounding noise

struct CheckOutcome {
  std::string name;
  bool applicable = true;
  bool passed = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  double tolerance = std::numeric_limits<double>::quiet_NaN();
  std::string detail;
};

json vector_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
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

double default_tol(const std::string& name) {
  if (name == "simplex") return 1e-6;
  if (name == "renorm") return 1e-3;
  if (name == "pc") return 1e-10;
  if (name == "lyapunov") return 1e-8;
  if (name == "welfare") return 1e-8;
  if (name == "terminal_residual") return 1e-6;
  if (name == "aggregate_near") return 1e-3;
  if (name == "spread_min") return 0.1;
  if (name == "spread_max") return 1e-12;
  if (name == "converged") return 1e-8;  // br_violation bound
  if (name == "gradient_error") return 1e-6;
  if (name == "gradient_order") return 1.9;
  return std::numeric_limits<double>::quiet_NaN();
}

double resolve_tol(const CheckSpec& check) {
  return std::isnan(check.tol) ? default_tol(check.name) : check.tol;
}

bool check_applies(const std::string& name, const std::string& command) {
  if (command == "simulate")
    return name == "simplex" || name == "renorm" || name == "pc" ||
           name == "lyapunov" || name == "welfare" || name == "terminal_residual" ||
           name == "aggregate_near";
  if (command == "equilibrium")
    return name == "converged" || name == "terminal_residual";
  if (command == "potential-check")
    return name == "gradient_error" || name == "gradient_order";
  if (command == "aggregability-demo")
    return name == "spread_min" || name == "spread_max";
  return false;  // assumptions: report-only
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Everything the command handlers share.
struct RunContext {
  const ScenarioConfig& cfg;
  const TypeGrid& grid;
  const ProtocolAssignment& assignment;
  fs::path out_dir;
  json& summary;
  std::vector<CheckOutcome> outcomes;
  std::vector<std::string> artifacts;

  void record(const CheckSpec& check, bool passed, double value,
              const std::string& detail = "") {
    CheckOutcome o;
    o.name = check.name;
    o.passed = passed;
    o.value = value;
    o.tolerance = resolve_tol(check);
    o.detail = detail;
    outcomes.push_back(std::move(o));
  }

  void record_skipped(const CheckSpec& check, const std::string& command) {
    CheckOutcome o;
    o.name = check.name;
    o.applicable = false;
    o.passed = true;
    o.detail = "not applicable to " + command;
    outcomes.push_back(std::move(o));
  }
};

// ---------------------------------------------------------------- simulate

void command_simulate(RunContext& ctx) {
  const ScenarioConfig& cfg = ctx.cfg;
  Matrix state0 = cfg.build_initial_state(ctx.grid);

  std::string potential_reason;
  std::optional<PotentialSpec> pspec;
  if (PotentialSpec::available(cfg.game, ctx.grid, &potential_reason))
    pspec = PotentialSpec::from_game(cfg.game, ctx.grid);

  std::function<double(const Matrix&)> potential_fn;
  if (pspec)
    potential_fn = [&](const Matrix& x) { return potential_value(*pspec, x, ctx.grid); };

  Trajectory traj =
      integrate(cfg.game, ctx.assignment, state0, ctx.grid, cfg.integrator, potential_fn);

  bool track_welfare = cfg.game.kind() == GameSpec::Kind::Asag;
  std::vector<double> welfare_series;
  if (track_welfare) {
    welfare_series.reserve(traj.states.size());
    for (const Matrix& x : traj.states)
      welfare_series.push_back(welfare(cfg.game, x, ctx.grid));
  }

  if (cfg.outputs.trajectory) {
    CsvWriter w((ctx.out_dir / "trajectory.csv").string());
    w.write_row({"time", "node", "strategy", "share", "velocity"});
    for (size_t i = 0; i < traj.states.size(); ++i) {
      const Matrix& x = traj.states[i];
      const Matrix& v = traj.velocities[i];
      for (int k = 0; k < x.rows(); ++k)
        for (int s = 0; s < x.cols(); ++s)
          w.write_row({format_double(traj.times[i]), std::to_string(k),
                       std::to_string(s), format_double(x(k, s)),
                       format_double(v(k, s))});
    }
    ctx.artifacts.push_back("trajectory.csv");
  }

  if (cfg.outputs.diagnostics) {
    CsvWriter w((ctx.out_dir / "diagnostics.csv").string());
    w.write_row({"time", "pc", "residual", "renorm", "f", "welfare"});
    for (size_t i = 0; i < traj.diagnostics.size(); ++i) {
      const SampleDiagnostics& d = traj.diagnostics[i];
      w.write_row({format_double(d.time), format_double(d.pc),
                   format_double(d.residual), format_double(d.renorm),
                   d.potential ? format_double(*d.potential) : std::string(),
                   track_welfare ? format_double(welfare_series[i]) : std::string()});
    }
    ctx.artifacts.push_back("diagnostics.csv");
  }

  double max_simplex = 0.0;
  for (const Matrix& x : traj.states)
    max_simplex = std::max(max_simplex, simplex_violation(x));
  double min_pc = std::numeric_limits<double>::infinity();
  for (const auto& d : traj.diagnostics) min_pc = std::min(min_pc, d.pc);
  const SampleDiagnostics& last = traj.diagnostics.back();
  Vector terminal_aggregate = aggregate(traj.states.back(), ctx.grid);

  double potential_max_drop = std::numeric_limits<double>::quiet_NaN();
  bool potential_nondecreasing = false;
  if (pspec) {
    LyapunovReport lr = lyapunov_series(*pspec, traj, ctx.grid);
    potential_max_drop = lr.max_drop;
    potential_nondecreasing = lr.nondecreasing;
  }
  double welfare_max_drop = 0.0;
  for (size_t i = 1; i < welfare_series.size(); ++i)
    welfare_max_drop =
        std::max(welfare_max_drop, welfare_series[i - 1] - welfare_series[i]);

  json& sim = ctx.summary["simulate"];
  sim["terminal_time"] = last.time;
  sim["terminal_residual"] = last.residual;
  sim["terminal_pc"] = last.pc;
  sim["terminal_aggregate"] = vector_json(terminal_aggregate);
  sim["renorm_total"] = traj.renorm_total;
  sim["realized_max_rate"] = traj.realized_max_rate;
  sim["step_size_failure"] = traj.step_size_failure;
  sim["max_simplex_violation"] = max_simplex;
  sim["samples"] = traj.states.size();
  json pot;
  pot["available"] = bool(pspec);
  if (pspec) {
    pot["initial"] = *traj.diagnostics.front().potential;
    pot["final"] = *traj.diagnostics.back().potential;
    pot["nondecreasing"] = potential_nondecreasing;
    pot["max_drop"] = potential_max_drop;
  } else {
    pot["reason"] = potential_reason;
  }
  sim["potential"] = pot;
  if (track_welfare) {
    sim["welfare"] = {{"initial", welfare_series.front()},
                      {"final", welfare_series.back()},
                      {"max_drop", welfare_max_drop}};
  }

  for (const CheckSpec& check : cfg.checks) {
    if (!check_applies(check.name, "simulate")) {
      ctx.record_skipped(check, "simulate");
      continue;
    }
    double tol = resolve_tol(check);
    if (check.name == "simplex") {
      ctx.record(check, max_simplex <= tol && !traj.step_size_failure, max_simplex);
    } else if (check.name == "renorm") {
      ctx.record(check, traj.renorm_total <= tol, traj.renorm_total);
    } else if (check.name == "pc") {
      ctx.record(check, min_pc >= -tol, min_pc);
    } else if (check.name == "lyapunov") {
      if (!pspec)
        ctx.record(check, false, std::numeric_limits<double>::quiet_NaN(),
                   "potential unavailable: " + potential_reason);
      else
        ctx.record(check, potential_max_drop <= tol, potential_max_drop);
    } else if (check.name == "welfare") {
      if (!track_welfare)
        ctx.record(check, false, std::numeric_limits<double>::quiet_NaN(),
                   "welfare is defined for aggregative games only");
      else
        ctx.record(check, welfare_max_drop <= tol, welfare_max_drop);
    } else if (check.name == "terminal_residual") {
      ctx.record(check, last.residual <= tol, last.residual);
    } else if (check.name == "aggregate_near") {
      if (check.target.size() != terminal_aggregate.size()) {
        ctx.record(check, false, std::numeric_limits<double>::quiet_NaN(),
                   "aggregate_near needs a target of the strategy count");
      } else {
        double dist = (terminal_aggregate - check.target).cwiseAbs().maxCoeff();
        ctx.record(check, dist <= tol, dist);
      }
    }
  }
}

// -------------------------------------------------------------- equilibrium

void command_equilibrium(RunContext& ctx) {
  const ScenarioConfig& cfg = ctx.cfg;
  Matrix start = cfg.build_initial_state(ctx.grid);
  EquilibriumReport report = solve_damped_br(
      cfg.game, ctx.grid, cfg.equilibrium.damping, cfg.equilibrium.max_iters,
      cfg.equilibrium.tol, &start, cfg.tie_tol, cfg.mass_tol);

  json doc;
  doc["converged"] = report.converged;
  doc["iterations"] = report.iterations;
  doc["residual"] = report.residual;
  doc["br_violation"] = report.br_violation;
  doc["state"] = matrix_json(report.state);
  doc["aggregate"] = vector_json(aggregate(report.state, ctx.grid));
  write_text(ctx.out_dir / "equilibrium.json", doc.dump(2) + "\n");
  ctx.artifacts.push_back("equilibrium.json");

  ctx.summary["equilibrium"] = {{"converged", report.converged},
                                {"iterations", report.iterations},
                                {"residual", report.residual},
                                {"br_violation", report.br_violation}};

  for (const CheckSpec& check : cfg.checks) {
    if (!check_applies(check.name, "equilibrium")) {
      ctx.record_skipped(check, "equilibrium");
      continue;
    }
    double tol = resolve_tol(check);
    if (check.name == "converged")
      ctx.record(check, report.converged && report.br_violation <= tol,
                 report.br_violation,
                 report.converged ? "" : "iteration did not converge");
    else if (check.name == "terminal_residual")
      ctx.record(check, report.residual <= tol, report.residual);
  }
}

// ----------------------------------------------------------- potential-check

// Feasible zero-row-sum direction at state for step h: entries of
// state +- h*direction stay inside [0, 1].
Matrix random_direction(Rng& rng, const Matrix& state, double h) {
  int k = static_cast<int>(state.rows()), n = static_cast<int>(state.cols());
  Matrix d(k, n);
  for (int r = 0; r < k; ++r) {
    double mean = 0.0;
    for (int s = 0; s < n; ++s) {
      d(r, s) = rng.uniform(-1.0, 1.0);
      mean += d(r, s);
    }
    mean /= n;
    for (int s = 0; s < n; ++s) d(r, s) -= mean;
  }
  double headroom = std::min(state.minCoeff(), (1.0 - state.array()).minCoeff());
  double peak = d.cwiseAbs().maxCoeff();
  if (peak <= 0.0) return Matrix::Zero(k, n);
  double scale = std::min(1.0, 0.9 * headroom / (h * peak));
  return d * scale;
}

void command_potential_check(RunContext& ctx) {
  const ScenarioConfig& cfg = ctx.cfg;
  std::string reason;
  if (!PotentialSpec::available(cfg.game, ctx.grid, &reason))
    throw std::invalid_argument("potential unavailable: " + reason);
  PotentialSpec pspec = PotentialSpec::from_game(cfg.game, ctx.grid);

  Rng rng(cfg.potential_check.seed);
  int k = ctx.grid.size(), n = cfg.game.strategies();
  double h = cfg.potential_check.h;

  double max_rel = 0.0;
  std::vector<double> orders;
  json pairs = json::array();
  for (int i = 0; i < cfg.potential_check.n_pairs; ++i) {
    Matrix x(k, n);
    for (int r = 0; r < k; ++r) x.row(r) = random_simplex_row(rng, n).transpose();
    // Pull states slightly toward the centroid so both +-h and +-h/2
    // perturbations always have room inside the box.
    x = 0.98 * x + Matrix::Constant(k, n, 0.02 / n);
    Matrix d = random_direction(rng, x, h);
    double e1 = gradient_check(pspec, cfg.game, x, d, h, ctx.grid);
    double e2 = gradient_check(pspec, cfg.game, x, d, h / 2.0, ctx.grid);
    max_rel = std::max(max_rel, std::max(e1, e2));
    json rec;
    rec["error"] = e1;
    rec["error_half"] = e2;
    if (e1 > kNoiseFloor && e2 > 0.0) {
      double order = std::log2(e1 / e2);
      orders.push_back(order);
      rec["order"] = order;
    } else {
      rec["order"] = nullptr;
    }
    pairs.push_back(rec);
  }

  std::optional<double> median_order;
  if (!orders.empty()) {
    std::sort(orders.begin(), orders.end());
    median_order = orders[orders.size() / 2];
  }

  json doc;
  doc["n_pairs"] = cfg.potential_check.n_pairs;
  doc["h"] = h;
  doc["max_rel_error"] = max_rel;
  doc["orders_measured"] = orders.size();
  doc["median_order"] = median_order ? json(*median_order) : json(nullptr);
  doc["noise_floor"] = kNoiseFloor;
  doc["pairs"] = pairs;
  write_text(ctx.out_dir / "potential_check.json", doc.dump(2) + "\n");
  ctx.artifacts.push_back("potential_check.json");

  ctx.summary["potential_check"] = {
      {"max_rel_error", max_rel},
      {"orders_measured", orders.size()},
      {"median_order", median_order ? json(*median_order) : json(nullptr)}};

  for (const CheckSpec& check : cfg.checks) {
    if (!check_applies(check.name, "potential-check")) {
      ctx.record_skipped(check, "potential-check");
      continue;
    }
    double tol = resolve_tol(check);
    if (check.name == "gradient_error") {
      ctx.record(check, max_rel <= tol, max_rel);
    } else if (check.name == "gradient_order") {
      // Vacuously true when every difference sits at rounding noise (the
      // finite difference is exact for this potential at this step size).
      if (!median_order)
        ctx.record(check, true, std::numeric_limits<double>::quiet_NaN(),
                   "all differences below the rounding-noise floor");
      else
        ctx.record(check, *median_order >= tol, *median_order);
    }
  }
}

// ------------------------------------------------------- aggregability-demo

void command_aggregability(RunContext& ctx) {
  const ScenarioConfig& cfg = ctx.cfg;
  Vector target = cfg.probe.aggregate_target
                      ? *cfg.probe.aggregate_target
                      : aggregate(cfg.build_initial_state(ctx.grid), ctx.grid);
  AggregabilityReport report =
      aggregability_probe(cfg.game, ctx.assignment, ctx.grid, target,
                          cfg.probe.n_states, cfg.probe.seed, cfg.tie_tol);

  json doc;
  doc["aggregate_target"] = vector_json(target);
  doc["n_states"] = report.n_states;
  doc["spread"] = report.spread;
  json vels = json::array();
  for (const Vector& v : report.aggregate_velocities) vels.push_back(vector_json(v));
  doc["aggregate_velocities"] = vels;
  write_text(ctx.out_dir / "aggregability.json", doc.dump(2) + "\n");
  ctx.artifacts.push_back("aggregability.json");

  ctx.summary["aggregability"] = {{"spread", report.spread},
                                  {"n_states", report.n_states}};

  for (const CheckSpec& check : cfg.checks) {
    if (!check_applies(check.name, "aggregability-demo")) {
      ctx.record_skipped(check, "aggregability-demo");
      continue;
    }
    double tol = resolve_tol(check);
    if (check.name == "spread_min")
      ctx.record(check, report.spread > tol, report.spread);
    else if (check.name == "spread_max")
      ctx.record(check, report.spread <= tol, report.spread);
  }
}

// ------------------------------------------------------------- assumptions

void command_assumptions(RunContext& ctx) {
  const ScenarioConfig& cfg = ctx.cfg;
  AssumptionReport report =
      assumption_diagnostics(cfg.game, ctx.assignment, ctx.grid,
                             cfg.assumptions.n_samples, cfg.assumptions.seed,
                             cfg.tie_tol);
  json doc;
  doc["lipschitz_ratio_max"] = report.lipschitz_ratio_max;
  doc["rate_bound"] = report.rate_bound;
  doc["br_band_ratio_max"] = report.br_band_ratio_max;
  doc["n_samples"] = report.n_samples;
  write_text(ctx.out_dir / "assumptions.json", doc.dump(2) + "\n");
  ctx.artifacts.push_back("assumptions.json");
  ctx.summary["assumptions"] = doc;

  for (const CheckSpec& check : cfg.checks) ctx.record_skipped(check, "assumptions");
}

}  // namespace

RunOutcome run_scenario(const ScenarioConfig& config, const std::string& command,
                        const RunOverrides& overrides) {
  RunOutcome out;
  json& summary = out.summary;

  ScenarioConfig cfg = config;
  if (overrides.seed) {
    if (cfg.initial_state.kind == InitialStateSpec::Kind::Random)
      cfg.initial_state.seed = *overrides.seed;
    cfg.potential_check.seed = *overrides.seed;
    cfg.probe.seed = *overrides.seed;
    cfg.assumptions.seed = *overrides.seed;
  }
  if (overrides.dt) cfg.integrator.dt = *overrides.dt;
  if (overrides.t_end) cfg.integrator.t_end = *overrides.t_end;
  if (overrides.out_dir) cfg.outputs.dir = *overrides.out_dir;

  summary["name"] = cfg.name;
  summary["command"] = command;
  std::vector<std::string> failures;

  const bool known_command =
      command == "simulate" || command == "equilibrium" ||
      command == "potential-check" || command == "aggregability-demo" ||
      command == "assumptions";
  if (!known_command) {
    out.exit_code = 2;
    summary["failures"] = json::array({"unknown command: " + command});
    return out;
  }

  try {
    cfg.integrator.validate();
  } catch (const std::exception& e) {
    out.exit_code = 2;
    summary["failures"] = json::array({std::string("integrator: ") + e.what()});
    return out;
  }

  fs::path out_dir(cfg.outputs.dir);
  try {
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    out.exit_code = 3;
    summary["failures"] = json::array({std::string("output directory: ") + e.what()});
    return out;
  }

  try {
    TypeGrid grid = cfg.build_grid();
    ProtocolAssignment assignment = cfg.build_assignment(grid);
    RunContext real{cfg, grid, assignment, out_dir, summary, {}, {}};

    summary["grid"] = {{"nodes", grid.size()}, {"dim", grid.dim()}};
    summary["strategies"] = cfg.game.strategies();
    json prot = json::array();
    for (const auto& p : cfg.protocols) prot.push_back(p.describe());
    summary["protocols"] = prot;

    if (command == "simulate")
      command_simulate(real);
    else if (command == "equilibrium")
      command_equilibrium(real);
    else if (command == "potential-check")
      command_potential_check(real);
    else if (command == "aggregability-demo")
      command_aggregability(real);
    else
      command_assumptions(real);

    json checks = json::array();
    for (const CheckOutcome& o : real.outcomes) {
      json jc;
      jc["name"] = o.name;
      if (!o.applicable) {
        jc["skipped"] = true;
        jc["detail"] = o.detail;
      } else {
        jc["passed"] = o.passed;
        if (!std::isnan(o.value)) jc["value"] = o.value;
        if (!std::isnan(o.tolerance)) jc["tolerance"] = o.tolerance;
        if (!o.detail.empty()) jc["detail"] = o.detail;
        if (!o.passed) {
          std::string msg = o.name;
          if (!o.detail.empty())
            msg += ": " + o.detail;
          else
            msg += ": value " + format_double(o.value) + " vs tolerance " +
                   format_double(o.tolerance);
          failures.push_back(msg);
        }
      }
      checks.push_back(jc);
    }
    summary["checks"] = checks;
    summary["artifacts"] = real.artifacts;
    if (!failures.empty()) out.exit_code = 1;
  } catch (const NonFiniteStateError& e) {
    out.exit_code = 4;
    failures.push_back(std::string("integration diverged: ") + e.what());
  } catch (const std::invalid_argument& e) {
    out.exit_code = 2;
    failures.push_back(e.what());
  } catch (const std::exception& e) {
    out.exit_code = 4;
    failures.push_back(e.what());
  }

  summary["failures"] = failures;
  summary["exit_code"] = out.exit_code;
  try {
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    if (out.exit_code == 0) out.exit_code = 3;
    summary["failures"].push_back(std::string("summary write: ") + e.what());
  }
  return out;
}

}  // namespace heterodyn
