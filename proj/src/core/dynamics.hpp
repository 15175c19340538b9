#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "common.hpp"
#include "games.hpp"
#include "protocols.hpp"
#include "typegrid.hpp"

namespace heterodyn {

// One evaluation of the heterogeneous vector field: per-node velocities, the
// payoff profile they were computed from, and the largest switching rate seen.
struct FieldEval {
  Matrix v;        // K x S, rows sum to zero
  Matrix payoffs;  // K x S
  double realized_max_rate = 0.0;
};

struct IntegratorConfig {
  enum class Method { Rk4, Euler };
  Method method = Method::Rk4;
  double dt = 0.01;
  double t_end = 1.0;
  int sample_every = 10;
  double clamp_tol = 1e-9;
  double tie_tol = 1e-9;

  void validate() const;
};

struct SampleDiagnostics {
  double time = 0.0;
  std::optional<double> potential;
  double pc = 0.0;        // sum_k w_k pi_k . v_k
  double residual = 0.0;  // variational norm of the field
  double renorm = 0.0;    // cumulative renormalization magnitude up to this sample
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Matrix> states;
  std::vector<Matrix> velocities;
  std::vector<SampleDiagnostics> diagnostics;
  double renorm_total = 0.0;
  double realized_max_rate = 0.0;
  // Set when the cumulative renormalization magnitude exceeds 1e-3, which
  // means the step size was too coarse for the field.
  bool step_size_failure = false;
};

// Raised when the integrator encounters a non-finite state.
class NonFiniteStateError : public std::runtime_error {
 public:
  NonFiniteStateError(double time, const std::string& what)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

// Evaluate the mean dynamic of every type node at one state snapshot. The
// payoff profile is computed once; observation vectors are clipped at zero so
// integrator stage states a hair outside the simplex cannot produce negative
// rates.
FieldEval field(const GameSpec& game, const ProtocolAssignment& assignment,
                const Matrix& state, const TypeGrid& grid, double tie_tol = 1e-9);

// Fixed-step integration of the mean dynamic. Samples every sample_every
// steps (always including the initial and final states). Optional
// potential_fn is evaluated at each sample and stored in the diagnostics.
Trajectory integrate(const GameSpec& game, const ProtocolAssignment& assignment,
                     const Matrix& state0, const TypeGrid& grid,
                     const IntegratorConfig& cfg,
                     const std::function<double(const Matrix&)>& potential_fn = {});

struct AggregabilityReport {
  std::vector<Vector> aggregate_velocities;
  double spread = 0.0;  // max pairwise L1 distance between aggregate velocities
  int n_states = 0;
};

// Builds n_states distinct conditional states sharing the aggregate
// xbar_target (uniform disaggregation, two greedy extremal fillings, then
// seeded aggregate-preserving mass transfers), evaluates the field on each,
// and reports how far apart the induced aggregate velocities lie. A positive
// spread certifies that the aggregate dynamic is not closed. On a single-node
// grid every disaggregation coincides, so the spread is zero.
AggregabilityReport aggregability_probe(const GameSpec& game,
                                        const ProtocolAssignment& assignment,
                                        const TypeGrid& grid,
                                        const Vector& xbar_target, int n_states,
                                        std::uint64_t seed = 12345,
                                        double tie_tol = 1e-9);

}  // namespace heterodyn
