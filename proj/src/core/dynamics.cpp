#include "dynamics.hpp"

#include <cmath>

namespace heterodyn {

namespace {

// Clamp rows to [0,1]; renormalize a row only when its sum drifted past
// clamp_tol. Returns the weighted variational magnitude of the correction.
double clamp_and_renormalize(Matrix& state, const TypeGrid& grid, double clamp_tol) {
  double magnitude = 0.0;
  for (int k = 0; k < state.rows(); ++k) {
    double correction = 0.0;
    double sum = 0.0;
    bool clipped = false;
    for (int s = 0; s < state.cols(); ++s) {
      double raw = state(k, s);
      double value = std::min(1.0, std::max(0.0, raw));
      if (value != raw) {
        clipped = true;
        correction += std::abs(value - raw);
        state(k, s) = value;
      }
      sum += value;
    }
    if (clipped || std::abs(sum - 1.0) > clamp_tol) {
      if (sum <= 0.0) {
        // Degenerate row; spread mass evenly rather than dividing by zero.
        double even = 1.0 / state.cols();
        for (int s = 0; s < state.cols(); ++s) {
          correction += std::abs(even - state(k, s));
          state(k, s) = even;
        }
      } else if (std::abs(sum - 1.0) > clamp_tol) {
        for (int s = 0; s < state.cols(); ++s) {
          double scaled = state(k, s) / sum;
          correction += std::abs(scaled - state(k, s));
          state(k, s) = scaled;
        }
      }
    }
    magnitude += grid.weights()(k) * correction;
  }
  return magnitude;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("integrator: dt must be positive");
  if (!(t_end > 0.0)) throw std::invalid_argument("integrator: t_end must be positive");
  if (dt > t_end) throw std::invalid_argument("integrator: dt must not exceed t_end");
  if (sample_every < 1)
    throw std::invalid_argument("integrator: sample_every must be at least 1");
  if (clamp_tol < 0.0)
    throw std::invalid_argument("integrator: clamp_tol must be nonnegative");
  if (tie_tol < 0.0)
    throw std::invalid_argument("integrator: tie_tol must be nonnegative");
}

FieldEval field(const GameSpec& game, const ProtocolAssignment& assignment,
                const Matrix& state, const TypeGrid& grid, double tie_tol) {
  const int k = grid.size();
  if (static_cast<int>(assignment.node_protocol.size()) != k)
    throw std::invalid_argument("field: assignment does not cover the grid");
  FieldEval out;
  out.payoffs = game.payoff_profile(state, grid);
  out.v.resize(k, game.strategies());
  Matrix scratch;
  Vector v_row, pi_row, x_row, obs_row;
  for (int node = 0; node < k; ++node) {
    pi_row = out.payoffs.row(node).transpose();
    x_row = state.row(node).transpose();
    obs_row = x_row.cwiseMax(0.0);
    mean_dynamic_into(v_row, scratch, assignment.at(node), pi_row, x_row, obs_row,
                      tie_tol, &out.realized_max_rate);
    out.v.row(node) = v_row.transpose();
  }
  return out;
}

Trajectory integrate(const GameSpec& game, const ProtocolAssignment& assignment,
                     const Matrix& state0, const TypeGrid& grid,
                     const IntegratorConfig& cfg,
                     const std::function<double(const Matrix&)>& potential_fn) {
  cfg.validate();
  if (!rows_in_simplex(state0, 1e-9))
    throw std::invalid_argument("integrate: initial state rows must lie in the simplex");

  Trajectory traj;
  auto sample = [&](double t, const Matrix& state) {
    FieldEval eval = field(game, assignment, state, grid, cfg.tie_tol);
    if (eval.realized_max_rate > traj.realized_max_rate)
      traj.realized_max_rate = eval.realized_max_rate;
    SampleDiagnostics diag;
    diag.time = t;
    diag.pc = grid.weights().dot((eval.payoffs.array() * eval.v.array()).rowwise().sum().matrix());
    diag.residual = variational_norm(eval.v, grid);
    diag.renorm = traj.renorm_total;
    if (potential_fn) diag.potential = potential_fn(state);
    traj.times.push_back(t);
    traj.states.push_back(state);
    traj.velocities.push_back(std::move(eval.v));
    traj.diagnostics.push_back(std::move(diag));
  };

  Matrix x = state0;
  sample(0.0, x);

  double t_now = 0.0;
  auto eval_v = [&](const Matrix& at) {
    // A non-finite stage state means a rate overflowed within this step;
    // report it as the integrator abort it is, with the offending time.
    if (!at.allFinite())
      throw NonFiniteStateError(
          t_now, "integrate: non-finite state at t=" + std::to_string(t_now));
    FieldEval eval = field(game, assignment, at, grid, cfg.tie_tol);
    if (eval.realized_max_rate > traj.realized_max_rate)
      traj.realized_max_rate = eval.realized_max_rate;
    return std::move(eval.v);
  };

  const long n_steps = std::max<long>(1, std::lround(cfg.t_end / cfg.dt));
  Matrix k1, k2, k3, k4;
  for (long step = 1; step <= n_steps; ++step) {
    t_now = step * cfg.dt;
    if (cfg.method == IntegratorConfig::Method::Euler) {
      k1 = eval_v(x);
      x += cfg.dt * k1;
    } else {
      k1 = eval_v(x);
      k2 = eval_v(x + 0.5 * cfg.dt * k1);
      k3 = eval_v(x + 0.5 * cfg.dt * k2);
      k4 = eval_v(x + cfg.dt * k3);
      x += (cfg.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    double t_next = step * cfg.dt;
    if (!x.allFinite())
      throw NonFiniteStateError(
          t_next, "integrate: non-finite state at t=" + std::to_string(t_next));
    traj.renorm_total += clamp_and_renormalize(x, grid, cfg.clamp_tol);
    if (traj.renorm_total > 1e-3) traj.step_size_failure = true;
    if (step % cfg.sample_every == 0 || step == n_steps) sample(t_next, x);
  }
  return traj;
}

AggregabilityReport aggregability_probe(const GameSpec& game,
                                        const ProtocolAssignment& assignment,
                                        const TypeGrid& grid,
                                        const Vector& xbar_target, int n_states,
                                        std::uint64_t seed, double tie_tol) {
  const int k = grid.size();
  const int n = game.strategies();
  if (n_states < 2)
    throw std::invalid_argument("aggregability_probe: need at least two states");
  if (xbar_target.size() != n)
    throw std::invalid_argument("aggregability_probe: aggregate has wrong length");
  if ((xbar_target.array() < -1e-9).any() || std::abs(xbar_target.sum() - 1.0) > 1e-9)
    throw std::invalid_argument(
        "aggregability_probe: target aggregate is not a probability vector, cannot be disaggregated");

  const Vector& w = grid.weights();
  std::vector<Matrix> states;

  // Uniform disaggregation: every type plays the aggregate mixture.
  Matrix uniform(k, n);
  uniform.rowwise() = xbar_target.cwiseMax(0.0).transpose();
  for (int r = 0; r < k; ++r) uniform.row(r) /= uniform.row(r).sum();
  states.push_back(uniform);

  // Greedy extremal disaggregations: fill nodes in order, consuming strategy
  // mass in ascending (then descending) strategy order. These are vertices of
  // the disaggregation polytope, e.g. crossed pure assignments on two nodes.
  auto greedy = [&](bool descending) {
    Vector remaining = xbar_target.cwiseMax(0.0);
    remaining /= remaining.sum();
    Matrix state = Matrix::Zero(k, n);
    for (int node = 0; node < k; ++node) {
      double need = w(node);
      for (int i = 0; i < n && need > 0.0; ++i) {
        int s = descending ? n - 1 - i : i;
        double take = std::min(remaining(s), need);
        if (take <= 0.0) continue;
        state(node, s) = take / w(node);
        remaining(s) -= take;
        need -= take;
      }
      double sum = state.row(node).sum();
      if (sum > 0.0) state.row(node) /= sum;
    }
    return state;
  };
  if (static_cast<int>(states.size()) < n_states) states.push_back(greedy(false));
  if (static_cast<int>(states.size()) < n_states) states.push_back(greedy(true));

  // Seeded aggregate-preserving transfers away from the uniform disaggregation.
  for (int j = static_cast<int>(states.size()); j < n_states; ++j) {
    Rng rng(seed + static_cast<std::uint64_t>(j));
    Matrix state = uniform;
    if (k >= 2 && n >= 2) {
      int moves = 8 * k * n;
      for (int m = 0; m < moves; ++m) {
        int k1 = rng.below(k);
        int k2 = rng.below(k - 1);
        if (k2 >= k1) ++k2;
        int s1 = rng.below(n);
        int s2 = rng.below(n - 1);
        if (s2 >= s1) ++s2;
        double cap = std::min(std::min(w(k1) * state(k1, s1), w(k2) * state(k2, s2)),
                              std::min(w(k1) * (1.0 - state(k1, s2)),
                                       w(k2) * (1.0 - state(k2, s1))));
        if (cap <= 0.0) continue;
        double a = rng.u01() * cap;
        state(k1, s1) -= a / w(k1);
        state(k1, s2) += a / w(k1);
        state(k2, s2) -= a / w(k2);
        state(k2, s1) += a / w(k2);
      }
    }
    states.push_back(std::move(state));
  }

  AggregabilityReport report;
  report.n_states = n_states;
  for (const auto& state : states) {
    FieldEval eval = field(game, assignment, state, grid, tie_tol);
    report.aggregate_velocities.push_back(eval.v.transpose() * w);
  }
  for (size_t i = 0; i < report.aggregate_velocities.size(); ++i)
    for (size_t j = i + 1; j < report.aggregate_velocities.size(); ++j) {
      double d = (report.aggregate_velocities[i] - report.aggregate_velocities[j])
                     .lpNorm<1>();
      if (d > report.spread) report.spread = d;
    }
  return report;
}

}  // namespace heterodyn
