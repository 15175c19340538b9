#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "common.hpp"
#include "typegrid.hpp"

namespace heterodyn {

// Revision protocol: a rule turning a payoff vector (and, for observational
// protocols, the revising agent's own-type strategy distribution) into an
// S x S matrix of switching rates.
class ProtocolSpec {
 public:
  enum class Kind {
    Smith,
    PairwiseComparison,
    Logit,
    Bnn,
    ReplicatorPairwise,
    ReplicatorDissatisfaction,
    ReplicatorSuccess,
    StandardBrd,
    TemperedBrd,
  };
  enum class Gain { Pos, PosSq };
  enum class Temper { LinearCap, ExpCdf };

  static ProtocolSpec smith();
  static ProtocolSpec pairwise(Gain gain);
  static ProtocolSpec logit(double mu);
  static ProtocolSpec bnn();
  static ProtocolSpec replicator_pairwise();
  static ProtocolSpec replicator_dissatisfaction(double pi_bar);
  static ProtocolSpec replicator_success(double pi_low);
  static ProtocolSpec standard_brd();
  static ProtocolSpec tempered_brd(Temper temper, double scale);

  Kind kind() const { return kind_; }
  double mu() const { return mu_; }
  double pi_bar() const { return pi_bar_; }
  double pi_low() const { return pi_low_; }
  Gain gain() const { return gain_; }
  Temper temper() const { return temper_; }
  double temper_scale() const { return temper_scale_; }

  // True for exact-optimization protocols (rates depend on the argmax set).
  bool exact_optimization() const {
    return kind_ == Kind::StandardBrd || kind_ == Kind::TemperedBrd;
  }
  // True for protocols whose rates observe the own-type strategy shares.
  bool observational() const {
    return kind_ == Kind::Bnn || kind_ == Kind::ReplicatorPairwise ||
           kind_ == Kind::ReplicatorDissatisfaction ||
           kind_ == Kind::ReplicatorSuccess;
  }

  double temper_fn(double q) const;
  std::string describe() const;

  static ProtocolSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  ProtocolSpec() = default;
  Kind kind_ = Kind::Smith;
  double mu_ = 0.0;
  double pi_bar_ = 0.0;
  double pi_low_ = 0.0;
  Gain gain_ = Gain::Pos;
  Temper temper_ = Temper::LinearCap;
  double temper_scale_ = 1.0;
};

// Switching-rate matrix rho(pi, x_obs); entry (s, s') is the rate of
// switching from s to s'. The diagonal is set to zero and ignored by the
// mean dynamic.
Matrix switch_rates(const ProtocolSpec& protocol, const Vector& payoffs,
                    const Vector& x_obs, double tie_tol);

// Mean dynamic of one type node: v_s = sum_s' x_s' rho_s's - x_s sum_s' rho_ss'.
Vector mean_dynamic(const ProtocolSpec& protocol, const Vector& payoffs,
                    const Vector& x, double tie_tol);

// In-place variants used by the field assembly loop; scratch must be S x S.
// x and x_obs are separated so callers can sanitize the observation vector
// (e.g. clip tiny negative integrator drift) without touching occupancy.
// max_rate, when non-null, is updated with the largest off-diagonal rate.
void switch_rates_into(Matrix& rho, const ProtocolSpec& protocol,
                       const Vector& payoffs, const Vector& x_obs, double tie_tol);
void mean_dynamic_into(Vector& v, Matrix& scratch, const ProtocolSpec& protocol,
                       const Vector& payoffs, const Vector& x, const Vector& x_obs,
                       double tie_tol, double* max_rate);

// Which protocol from a shared list each type node follows.
struct ProtocolAssignment {
  std::vector<ProtocolSpec> protocols;
  std::vector<int> node_protocol;  // index into protocols, one per node

  const ProtocolSpec& at(int node) const {
    return protocols[static_cast<size_t>(node_protocol[static_cast<size_t>(node)])];
  }
};

// Deterministic assignment rule: the same protocol everywhere, an explicit
// per-node list, or a threshold on one type coordinate.
struct AssignmentRule {
  enum class Kind { Uniform, ByNode, Threshold };
  Kind kind = Kind::Uniform;
  int protocol = 0;             // Uniform
  std::vector<int> node_list;   // ByNode
  int coord = 0;                // Threshold
  double cutoff = 0.0;          // Threshold: coord value < cutoff -> below
  int below = 0;
  int otherwise = 0;

  static AssignmentRule from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

ProtocolAssignment assign_protocols(const TypeGrid& grid, const AssignmentRule& rule,
                                    std::vector<ProtocolSpec> protocols);

}  // namespace heterodyn
