#pragma once

#include <optional>

#include "common.hpp"
#include "dynamics.hpp"
#include "games.hpp"
#include "protocols.hpp"
#include "typegrid.hpp"

namespace heterodyn {

struct EquilibriumReport {
  Matrix state;
  double residual = 0.0;      // variational norm of the field at state
  double br_violation = 0.0;  // type mass assigned off the best-response set
  int iterations = 0;
  bool converged = false;
};

// Verifies the equilibrium conditions at a state: br_violation sums, over
// nodes whose shortfall exceeds tie_tol, the weighted mass not placed on the
// best-response set. The residual is the field norm under the canonical
// pairwise-difference protocol, which stationarity-equivalence makes
// representative of every admissible protocol near equilibria.
EquilibriumReport check_equilibrium(const GameSpec& game, const Matrix& state,
                                    const TypeGrid& grid, double tie_tol = 1e-9,
                                    double mass_tol = 1e-8);

// Damped best-response iteration x <- (1-lambda) x + lambda BR(x), where BR
// assigns each node its pure lowest-index best response. Stops when the
// variational norm of the update falls to tol*lambda. Starts from the uniform
// mixture unless start is supplied. Non-convergence is reported through
// converged=false, not an exception.
EquilibriumReport solve_damped_br(const GameSpec& game, const TypeGrid& grid,
                                  double damping, int max_iters, double tol,
                                  const Matrix* start = nullptr,
                                  double tie_tol = 1e-9, double mass_tol = 1e-8);

// Closed-form CDF of a scalar type distribution, for the grid-free entry
// threshold solver.
class CostCdf {
 public:
  static CostCdf from_dist(const DistSpec& dist);
  double operator()(double c) const;

 private:
  DistSpec dist_;
};

struct ThresholdSolution {
  double entry_share = 0.0;  // equilibrium aggregate mass entering
  double threshold = 0.0;    // cost threshold: enter iff cost < threshold
  int iterations = 0;
};

// Bisection on h(s) = G(F0_in(s)) - s over [0,1] to 1e-12, for a binary
// entry game with scalar costs: the fixed point equates the entering mass
// with the mass of costs below the gross profit.
ThresholdSolution solve_binary_threshold(const CommonPayoff& entry_f0, const CostCdf& g);

// Variational norm of the field at a state.
double stationarity_residual(const GameSpec& game, const ProtocolAssignment& assignment,
                             const Matrix& state, const TypeGrid& grid,
                             double tie_tol = 1e-9);

struct PcResult {
  Vector per_node;         // pi_k . v_k
  double aggregate = 0.0;  // sum_k w_k pi_k . v_k
};

// Payoff-velocity inner products (the positive-correlation diagnostic).
PcResult pc_inner_product(const GameSpec& game, const ProtocolAssignment& assignment,
                          const Matrix& state, const TypeGrid& grid,
                          double tie_tol = 1e-9);

struct AssumptionReport {
  double lipschitz_ratio_max = 0.0;  // payoff sup-norm change / state distance
  double rate_bound = 0.0;           // largest realized switching rate
  double br_band_ratio_max = 0.0;    // BR-set-change mass / state distance
  int n_samples = 0;
};

// Empirical estimates for the regularity assumptions behind the
// well-posedness results, over seeded random state pairs. Values are
// reported, not asserted.
AssumptionReport assumption_diagnostics(const GameSpec& game,
                                        const ProtocolAssignment& assignment,
                                        const TypeGrid& grid, int n_samples,
                                        std::uint64_t seed = 20240901,
                                        double tie_tol = 1e-9);

}  // namespace heterodyn
