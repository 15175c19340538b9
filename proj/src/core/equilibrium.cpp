#include "equilibrium.hpp"

#include <cmath>

namespace heterodyn {

namespace {

ProtocolAssignment canonical_assignment(const TypeGrid& grid) {
  AssignmentRule rule;
  rule.kind = AssignmentRule::Kind::Uniform;
  rule.protocol = 0;
  return assign_protocols(grid, rule, {ProtocolSpec::smith()});
}

double br_violation_at(const GameSpec& game, const Matrix& state, const TypeGrid& grid,
                       double tie_tol) {
  Matrix payoffs = game.payoff_profile(state, grid);
  double violation = 0.0;
  for (int k = 0; k < grid.size(); ++k) {
    double on_br = 0.0;
    for (int s : br_set(payoffs.row(k).transpose(), tie_tol)) on_br += state(k, s);
    double shortfall = 1.0 - on_br;
    if (shortfall > tie_tol) violation += grid.weights()(k) * shortfall;
  }
  return violation;
}

}  // namespace

EquilibriumReport check_equilibrium(const GameSpec& game, const Matrix& state,
                                    const TypeGrid& grid, double tie_tol,
                                    double mass_tol) {
  EquilibriumReport report;
  report.state = state;
  report.br_violation = br_violation_at(game, state, grid, tie_tol);
  report.residual =
      stationarity_residual(game, canonical_assignment(grid), state, grid, tie_tol);
  report.converged = report.br_violation <= mass_tol;
  return report;
}

EquilibriumReport solve_damped_br(const GameSpec& game, const TypeGrid& grid,
                                  double damping, int max_iters, double tol,
                                  const Matrix* start, double tie_tol, double mass_tol) {
  if (!(damping > 0.0) || damping > 1.0)
    throw std::invalid_argument("solve_damped_br: damping must lie in (0, 1]");
  if (max_iters < 1)
    throw std::invalid_argument("solve_damped_br: max_iters must be positive");
  const int k = grid.size();
  const int n = game.strategies();
  Matrix x;
  if (start) {
    if (start->rows() != k || start->cols() != n)
      throw std::invalid_argument("solve_damped_br: start state has wrong shape");
    x = *start;
  } else {
    x = Matrix::Constant(k, n, 1.0 / n);
  }

  bool converged = false;
  int iterations = 0;
  Matrix br = Matrix::Zero(k, n);
  for (; iterations < max_iters; ++iterations) {
    Matrix payoffs = game.payoff_profile(x, grid);
    br.setZero();
    for (int node = 0; node < k; ++node)
      br(node, br_designated(payoffs.row(node).transpose(), tie_tol)) = 1.0;
    Matrix next = (1.0 - damping) * x + damping * br;
    double update = variational_norm(next - x, grid);
    x = std::move(next);
    if (update <= tol * damping) {
      ++iterations;
      converged = true;
      break;
    }
  }

  EquilibriumReport report = check_equilibrium(game, x, grid, tie_tol, mass_tol);
  report.iterations = iterations;
  report.converged = converged && report.converged;
  return report;
}

CostCdf CostCdf::from_dist(const DistSpec& dist) {
  CostCdf g;
  switch (dist.kind) {
    case DistSpec::Kind::Uniform: {
      double mass = 0.0;
      for (const auto& p : dist.pieces) {
        if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || p.hi <= p.lo || p.mass <= 0.0)
          throw std::invalid_argument("CostCdf: invalid uniform piece");
        mass += p.mass;
      }
      if (mass <= 0.0) throw std::invalid_argument("CostCdf: no mass");
      break;
    }
    case DistSpec::Kind::Gaussian:
      if (!(dist.stdev > 0.0))
        throw std::invalid_argument("CostCdf: stdev must be positive");
      break;
    case DistSpec::Kind::Discrete:
      if (dist.points.cols() != 1)
        throw std::invalid_argument("CostCdf: cost distribution must be scalar");
      if ((dist.masses.array() <= 0.0).any() || dist.masses.size() != dist.points.rows())
        throw std::invalid_argument("CostCdf: invalid discrete masses");
      break;
    case DistSpec::Kind::Product:
      throw std::invalid_argument("CostCdf: cost distribution must be scalar");
  }
  g.dist_ = dist;
  return g;
}

double CostCdf::operator()(double c) const {
  switch (dist_.kind) {
    case DistSpec::Kind::Uniform: {
      double total = 0.0, below = 0.0;
      for (const auto& p : dist_.pieces) {
        total += p.mass;
        if (c >= p.hi)
          below += p.mass;
        else if (c > p.lo)
          below += p.mass * (c - p.lo) / (p.hi - p.lo);
      }
      return below / total;
    }
    case DistSpec::Kind::Gaussian:
      return 0.5 * std::erfc(-(c - dist_.mean) / (dist_.stdev * std::sqrt(2.0)));
    case DistSpec::Kind::Discrete: {
      double total = dist_.masses.sum(), below = 0.0;
      for (int i = 0; i < dist_.points.rows(); ++i)
        if (dist_.points(i, 0) <= c) below += dist_.masses(i);
      return below / total;
    }
    case DistSpec::Kind::Product:
      break;
  }
  return 0.0;
}

ThresholdSolution solve_binary_threshold(const CommonPayoff& entry_f0, const CostCdf& g) {
  if (entry_f0.kind() != CommonPayoff::Kind::Entry)
    throw std::invalid_argument("solve_binary_threshold: needs an entry-family common payoff");
  auto h = [&](double s) { return g(entry_f0.entry_profile(s)) - s; };
  double lo = 0.0, hi = 1.0;
  double h_lo = h(lo), h_hi = h(hi);
  if (h_lo < 0.0 || h_hi > 0.0)
    throw std::invalid_argument(
        "solve_binary_threshold: h has no sign change on [0,1] (degenerate spec)");
  ThresholdSolution sol;
  // Bisect to near machine resolution: steep cost laws magnify an interval
  // gap into a fixed-point residual, and the contract is on the residual.
  while (hi - lo > 1e-15) {
    double mid = 0.5 * (lo + hi);
    double h_mid = h(mid);
    ++sol.iterations;
    if (h_mid >= 0.0)
      lo = mid;
    else
      hi = mid;
    if (sol.iterations > 200) break;
  }
  sol.entry_share = 0.5 * (lo + hi);
  // Snap to an exact boundary root so the degenerate all-enter / none-enter
  // specs report 0 or 1 rather than 1e-13 offsets.
  if (std::abs(h(1.0)) <= 1e-12) sol.entry_share = 1.0;
  if (std::abs(h(0.0)) <= 1e-12) sol.entry_share = 0.0;
  sol.threshold = entry_f0.entry_profile(sol.entry_share);
  return sol;
}

double stationarity_residual(const GameSpec& game, const ProtocolAssignment& assignment,
                             const Matrix& state, const TypeGrid& grid, double tie_tol) {
  return variational_norm(field(game, assignment, state, grid, tie_tol).v, grid);
}

PcResult pc_inner_product(const GameSpec& game, const ProtocolAssignment& assignment,
                          const Matrix& state, const TypeGrid& grid, double tie_tol) {
  FieldEval eval = field(game, assignment, state, grid, tie_tol);
  PcResult result;
  result.per_node = (eval.payoffs.array() * eval.v.array()).rowwise().sum();
  result.aggregate = grid.weights().dot(result.per_node);
  return result;
}

AssumptionReport assumption_diagnostics(const GameSpec& game,
                                        const ProtocolAssignment& assignment,
                                        const TypeGrid& grid, int n_samples,
                                        std::uint64_t seed, double tie_tol) {
  if (n_samples < 2)
    throw std::invalid_argument("assumption_diagnostics: need at least two samples");
  const int k = grid.size();
  const int n = game.strategies();
  Rng rng(seed);

  std::vector<Matrix> states;
  std::vector<Matrix> payoffs;
  states.reserve(2 * static_cast<size_t>(n_samples));
  payoffs.reserve(2 * static_cast<size_t>(n_samples));
  AssumptionReport report;
  report.n_samples = n_samples;
  auto add_state = [&](Matrix state) {
    FieldEval eval = field(game, assignment, state, grid, tie_tol);
    if (eval.realized_max_rate > report.rate_bound)
      report.rate_bound = eval.realized_max_rate;
    payoffs.push_back(std::move(eval.payoffs));
    states.push_back(std::move(state));
  };
  for (int i = 0; i < n_samples; ++i) {
    Matrix state(k, n);
    for (int node = 0; node < k; ++node)
      state.row(node) = random_simplex_row(rng, n).transpose();
    // Pair each draw with a coherent shift of itself (every node nudged
    // toward one strategy). Independent diffuse states have aggregate gaps
    // that shrink as the grid refines, so they alone underestimate the
    // worst-case sensitivity; coherent shifts probe it at any grid size.
    const int toward = rng.below(n);
    const double step = rng.uniform(0.1, 0.3);
    Matrix shifted = (1.0 - step) * state;
    shifted.col(toward).array() += step;
    add_state(std::move(state));
    add_state(std::move(shifted));
  }

  const int total = static_cast<int>(states.size());
  for (int i = 0; i < total; ++i) {
    for (int j = i + 1; j < total; ++j) {
      double dist = variational_norm(states[i] - states[j], grid);
      if (dist < 1e-12) continue;
      double payoff_change = 0.0;
      double br_change_mass = 0.0;
      for (int node = 0; node < k; ++node) {
        double change =
            (payoffs[i].row(node) - payoffs[j].row(node)).cwiseAbs().maxCoeff();
        if (change > payoff_change) payoff_change = change;
        if (br_set(payoffs[i].row(node).transpose(), tie_tol) !=
            br_set(payoffs[j].row(node).transpose(), tie_tol))
          br_change_mass += grid.weights()(node);
      }
      report.lipschitz_ratio_max = std::max(report.lipschitz_ratio_max, payoff_change / dist);
      report.br_band_ratio_max = std::max(report.br_band_ratio_max, br_change_mass / dist);
    }
  }
  return report;
}

}  // namespace heterodyn
