#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <vector>

#include "common.hpp"
#include "typegrid.hpp"

namespace heterodyn {

// Symmetric scalar kernel on type pairs, used by the matching and structured
// interaction games.
struct Kernel {
  enum class Kind { One, Dot, Rbf };
  Kind kind = Kind::One;
  double length = 1.0;  // Rbf length scale

  double eval(const Vector& a, const Vector& b) const;
  static Kernel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Closed-form common payoff F0: R^S -> R^S acting on the aggregate state.
// Families:
//   Zero      F0 = 0
//   Linear    F0(x) = A x + b
//   Entry     S = 2 with strategies (in = 0, out = 1); F0_in(x) = P(x_in)
//             for a polynomial P, F0_out = 0
//   PerCoord  F0_s(x) = P_s(x_s), one polynomial per strategy
// All have analytic Jacobians. Linear admits a potential iff A is symmetric;
// the others always do.
class CommonPayoff {
 public:
  enum class Kind { Zero, Linear, Entry, PerCoord };

  static CommonPayoff zero(int n_strategies);
  static CommonPayoff linear(Matrix a, Vector b);
  static CommonPayoff entry(std::vector<double> coeffs);
  static CommonPayoff per_coord(std::vector<std::vector<double>> polys);

  Kind kind() const { return kind_; }
  int strategies() const { return n_strategies_; }

  Vector value(const Vector& xbar) const;
  Matrix jacobian(const Vector& xbar) const;
  bool has_potential() const;
  // Scalar potential f0 with grad f0 = F0; valid only when has_potential().
  double potential(const Vector& xbar) const;

  // Entry profile value F0_in(share), valid for Kind::Entry.
  double entry_profile(double share) const;

  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }
  const std::vector<std::vector<double>>& polys() const { return polys_; }

  static CommonPayoff from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  CommonPayoff() = default;
  Kind kind_ = Kind::Zero;
  int n_strategies_ = 0;
  Matrix a_;
  Vector b_;
  std::vector<std::vector<double>> polys_;  // ascending coefficients
};

// Maps a type node theta in R^d to its idiosyncratic payoff vector in R^S.
struct ThetaMap {
  enum class Kind { Identity, Columns, Linear };
  Kind kind = Kind::Identity;
  std::vector<int> strategies;  // Columns: target strategy per coordinate
  Matrix m;                     // Linear: S x d

  Vector apply(const Vector& theta, int n_strategies) const;
  static ThetaMap from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Population game evaluated on a type grid. Three classes:
//   Asag            pi_k = F0(xbar) + theta_k (idiosyncratic), optionally
//                   Pigouvian-priced
//   RandomMatching  pi_k = sum_l w_l U(theta_k, theta_l) x_l with
//                   U(t,t') = U_const + k(t,t') U_kern
//   Structured      pi_k = sum_l w_l g(theta_k, theta_l) M x_l
class GameSpec {
 public:
  enum class Kind { Asag, RandomMatching, Structured };

  static GameSpec asag(CommonPayoff f0, ThetaMap tmap, bool pricing = false);
  static GameSpec random_matching(Matrix u_const, Kernel kern, Matrix u_kern);
  // Random matching with a caller-supplied symmetric-part decomposition
  // U = U0 + passive remainder; enables the potential.
  static GameSpec random_matching_with_potential(Matrix u_const, Kernel kern,
                                                 Matrix u_kern, Matrix u0_const,
                                                 Matrix u0_kern);
  static GameSpec structured(Matrix m, Kernel kern);

  Kind kind() const { return kind_; }
  int strategies() const { return n_strategies_; }
  bool pricing() const { return pricing_; }
  // When true, Pigouvian prices use central finite differences with fd_step
  // instead of the analytic Jacobian.
  bool use_fd_prices() const { return use_fd_prices_; }
  double fd_step() const { return fd_step_; }
  void set_fd_prices(bool on, double step);
  void set_cache_cap(std::int64_t entries) { cache_cap_ = entries; }

  const CommonPayoff& common() const;
  const ThetaMap& theta_map() const { return theta_map_; }
  const Kernel& kernel() const { return kernel_; }
  const Matrix& u_const() const { return u_const_; }
  const Matrix& u_kern() const { return u_kern_; }
  const Matrix& u0_const() const { return u0_const_; }
  const Matrix& u0_kern() const { return u0_kern_; }
  bool has_u0() const { return has_u0_; }
  const Matrix& structured_matrix() const { return m_; }

  // Payoff profile: K x S matrix of per-node payoff vectors.
  Matrix payoff_profile(const Matrix& state, const TypeGrid& grid) const;

  // K x K kernel matrix on the grid (cached when within the memory cap).
  const Matrix& kernel_values(const TypeGrid& grid) const { return kernel_matrix(grid); }

  // Idiosyncratic payoff vectors theta_k mapped into R^S (Asag only).
  Matrix theta_payoffs(const TypeGrid& grid) const;

  static GameSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  friend GameSpec apply_pricing(const GameSpec& game, bool enabled);
  GameSpec() = default;
  const Matrix& kernel_matrix(const TypeGrid& grid) const;

  Kind kind_ = Kind::Asag;
  int n_strategies_ = 0;
  bool pricing_ = false;
  bool use_fd_prices_ = false;
  double fd_step_ = 1e-6;
  std::int64_t cache_cap_ = 1 << 24;

  CommonPayoff common_ = CommonPayoff::zero(1);
  ThetaMap theta_map_;
  Matrix u_const_, u_kern_, u0_const_, u0_kern_;
  bool has_u0_ = false;
  Kernel kernel_;
  Matrix m_;

  struct KernelCache {
    const double* grid_tag = nullptr;
    int size = 0;
    Matrix values;
  };
  mutable KernelCache cache_;
};

// Per-row best-response set: indices s with pi_s >= max(pi) - tie_tol.
std::vector<int> br_set(const Vector& payoffs, double tie_tol);

// Best-response sets for every node of a payoff profile.
std::vector<std::vector<int>> best_response_sets(const Matrix& payoffs, double tie_tol);

// Lowest index in the best-response set.
int br_designated(const Vector& payoffs, double tie_tol);

// Pigouvian price vector T_s[xbar] = -sum_s' xbar_s' dF0_s'/dxbar_s, from the
// analytic Jacobian or by central finite differences.
Vector pigou_prices(const CommonPayoff& f0, const Vector& xbar);
Vector pigou_prices_fd(const CommonPayoff& f0, const Vector& xbar, double fd_step);

// Copy of an aggregative game with Pigouvian pricing switched on or off.
GameSpec apply_pricing(const GameSpec& game, bool enabled);

}  // namespace heterodyn
