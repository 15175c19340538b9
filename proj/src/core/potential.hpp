#pragma once

#include <optional>
#include <string>

#include "common.hpp"
#include "dynamics.hpp"
#include "games.hpp"
#include "typegrid.hpp"

namespace heterodyn {

// Scalar potential paired with a game, when one exists:
//   AsagStandard    f = f0(xbar) + sum_k w_k theta_k . x_k
//   AsagWelfare     the priced aggregative game's potential, which is the
//                   total (unpriced) payoff
//   RandomMatching  f = 0.5 sum_kl w_k w_l x_k . U0(theta_k, theta_l) x_l
//   Structured      f = 0.5 sum_kl w_k w_l (x_k . M x_l) g(theta_k, theta_l)
// Construction runs the symmetry preconditions (symmetric U0 / M, kernel
// symmetric on all node pairs) and throws when they fail.
class PotentialSpec {
 public:
  enum class Kind { AsagStandard, AsagWelfare, RandomMatching, Structured };

  static PotentialSpec from_game(const GameSpec& game, const TypeGrid& grid);
  // No-throw probe; fills reason with the first failed precondition.
  static bool available(const GameSpec& game, const TypeGrid& grid,
                        std::string* reason = nullptr);

  Kind kind() const { return kind_; }
  const GameSpec& game() const { return game_; }

 private:
  PotentialSpec(Kind kind, GameSpec game) : kind_(kind), game_(std::move(game)) {}
  Kind kind_;
  GameSpec game_;
};

double potential_value(const PotentialSpec& pspec, const Matrix& state,
                       const TypeGrid& grid);

// Central-difference check of the Frechet-gradient property
// f(x + h d) - f(x - h d) ~ 2h <pi, d>: returns the relative error
// |fd - inner| / max(1, |inner|). The direction must have zero row sums and
// both perturbed states must stay entrywise in [0, 1].
double gradient_check(const PotentialSpec& pspec, const GameSpec& game,
                      const Matrix& state, const Matrix& direction, double h,
                      const TypeGrid& grid);

struct LyapunovReport {
  std::vector<double> values;
  bool nondecreasing = true;  // within 1e-8 slack per step
  double max_drop = 0.0;      // largest decrease between consecutive samples
  double terminal_gap = std::numeric_limits<double>::quiet_NaN();
};

// Potential evaluated along a trajectory with a monotonicity verdict;
// terminal_gap is reference_max - f(end) when a reference is supplied.
LyapunovReport lyapunov_series(const PotentialSpec& pspec, const Trajectory& traj,
                               const TypeGrid& grid,
                               std::optional<double> reference_max = {});

// Total payoff of an aggregative game at a state, always from the unpriced
// payoffs: sum_k w_k (F0(xbar) + theta_k) . x_k.
double welfare(const GameSpec& game, const Matrix& state, const TypeGrid& grid);

}  // namespace heterodyn
