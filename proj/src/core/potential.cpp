#include "potential.hpp"

#include <cmath>

namespace heterodyn {

namespace {

// First failed potential precondition, or empty when a potential exists.
std::string potential_obstacle(const GameSpec& game, const TypeGrid& grid) {
  auto kernel_pair_symmetric = [&]() {
    for (int i = 0; i < grid.size(); ++i)
      for (int j = i + 1; j < grid.size(); ++j) {
        double ij = game.kernel().eval(grid.node(i), grid.node(j));
        double ji = game.kernel().eval(grid.node(j), grid.node(i));
        if (std::abs(ij - ji) > 1e-12) return false;
      }
    return true;
  };
  switch (game.kind()) {
    case GameSpec::Kind::Asag:
      if (!game.pricing() && !game.common().has_potential())
        return "linear common payoff needs a symmetric matrix for a potential";
      return "";
    case GameSpec::Kind::RandomMatching:
      if (!game.has_u0())
        return "random matching potential needs the U0 symmetric-part decomposition";
      if (!kernel_pair_symmetric())
        return "kernel is not symmetric on the grid's node pairs";
      return "";
    case GameSpec::Kind::Structured:
      if ((game.structured_matrix() - game.structured_matrix().transpose())
              .cwiseAbs()
              .maxCoeff() > 1e-12)
        return "structured potential needs a symmetric payoff matrix";
      if (!kernel_pair_symmetric())
        return "kernel is not symmetric on the grid's node pairs";
      return "";
  }
  return "unknown game kind";
}

// 0.5 * sum_kl w_k w_l x_k . B x_l weighted by kernel values.
double kernel_quadratic(const Matrix& b, const Matrix& kernel_values,
                        const Matrix& state, const Vector& w) {
  Matrix xw = w.asDiagonal() * state;
  Matrix c = xw.transpose() * (kernel_values * xw);
  return 0.5 * (b.array() * c.array()).sum();
}

}  // namespace

bool PotentialSpec::available(const GameSpec& game, const TypeGrid& grid,
                              std::string* reason) {
  std::string obstacle = potential_obstacle(game, grid);
  if (reason) *reason = obstacle;
  return obstacle.empty();
}

PotentialSpec PotentialSpec::from_game(const GameSpec& game, const TypeGrid& grid) {
  std::string obstacle = potential_obstacle(game, grid);
  if (!obstacle.empty()) throw std::invalid_argument("PotentialSpec: " + obstacle);
  Kind kind = Kind::AsagStandard;
  switch (game.kind()) {
    case GameSpec::Kind::Asag:
      kind = game.pricing() ? Kind::AsagWelfare : Kind::AsagStandard;
      break;
    case GameSpec::Kind::RandomMatching:
      kind = Kind::RandomMatching;
      break;
    case GameSpec::Kind::Structured:
      kind = Kind::Structured;
      break;
  }
  return PotentialSpec(kind, game);
}

double potential_value(const PotentialSpec& pspec, const Matrix& state,
                       const TypeGrid& grid) {
  const GameSpec& game = pspec.game();
  if (state.rows() != grid.size() || state.cols() != game.strategies())
    throw std::invalid_argument("potential_value: state must be K x S");
  switch (pspec.kind()) {
    case PotentialSpec::Kind::AsagStandard: {
      Vector xbar = aggregate(state, grid);
      Matrix theta = game.theta_payoffs(grid);
      double idiosyncratic =
          grid.weights().dot((theta.array() * state.array()).rowwise().sum().matrix());
      return game.common().potential(xbar) + idiosyncratic;
    }
    case PotentialSpec::Kind::AsagWelfare:
      return welfare(game, state, grid);
    case PotentialSpec::Kind::RandomMatching: {
      Vector xbar = aggregate(state, grid);
      double value = 0.5 * xbar.dot(game.u0_const() * xbar);
      if ((game.u0_kern().array() != 0.0).any())
        value += kernel_quadratic(game.u0_kern(), game.kernel_values(grid), state,
                                  grid.weights());
      return value;
    }
    case PotentialSpec::Kind::Structured:
      return kernel_quadratic(game.structured_matrix(), game.kernel_values(grid),
                              state, grid.weights());
  }
  return 0.0;
}

double gradient_check(const PotentialSpec& pspec, const GameSpec& game,
                      const Matrix& state, const Matrix& direction, double h,
                      const TypeGrid& grid) {
  if (!(h > 0.0)) throw std::invalid_argument("gradient_check: h must be positive");
  if (direction.rows() != state.rows() || direction.cols() != state.cols())
    throw std::invalid_argument("gradient_check: direction shape mismatch");
  if ((direction.rowwise().sum().array().abs() > 1e-9).any())
    throw std::invalid_argument("gradient_check: direction rows must sum to zero");
  Matrix plus = state + h * direction;
  Matrix minus = state - h * direction;
  const double slack = 1e-12;
  if (plus.minCoeff() < -slack || plus.maxCoeff() > 1.0 + slack ||
      minus.minCoeff() < -slack || minus.maxCoeff() > 1.0 + slack)
    throw std::invalid_argument(
        "gradient_check: infeasible perturbation leaves the unit box");
  Matrix payoffs = game.payoff_profile(state, grid);
  double inner =
      grid.weights().dot((payoffs.array() * direction.array()).rowwise().sum().matrix());
  double fd =
      (potential_value(pspec, plus, grid) - potential_value(pspec, minus, grid)) /
      (2.0 * h);
  return std::abs(fd - inner) / std::max(1.0, std::abs(inner));
}

LyapunovReport lyapunov_series(const PotentialSpec& pspec, const Trajectory& traj,
                               const TypeGrid& grid,
                               std::optional<double> reference_max) {
  LyapunovReport report;
  report.values.reserve(traj.states.size());
  for (const auto& state : traj.states)
    report.values.push_back(potential_value(pspec, state, grid));
  for (size_t i = 1; i < report.values.size(); ++i) {
    double drop = report.values[i - 1] - report.values[i];
    if (drop > report.max_drop) report.max_drop = drop;
  }
  report.nondecreasing = report.max_drop <= 1e-8;
  if (reference_max && !report.values.empty())
    report.terminal_gap = *reference_max - report.values.back();
  return report;
}

double welfare(const GameSpec& game, const Matrix& state, const TypeGrid& grid) {
  if (game.kind() != GameSpec::Kind::Asag)
    throw std::invalid_argument("welfare: defined for aggregative games");
  Vector xbar = aggregate(state, grid);
  Matrix theta = game.theta_payoffs(grid);
  double idiosyncratic =
      grid.weights().dot((theta.array() * state.array()).rowwise().sum().matrix());
  return game.common().value(xbar).dot(xbar) + idiosyncratic;
}

}  // namespace heterodyn
