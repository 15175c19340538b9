#pragma once

#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "common.hpp"

namespace heterodyn {

// Description of a type distribution to be discretized into a quadrature
// grid. Uniform pieces use the midpoint rule, Gaussian uses Gauss-Hermite,
// discrete point lists are kept as-is, and multi-dimensional types are built
// as products of one-dimensional marginals.
struct DistSpec {
  enum class Kind { Uniform, Gaussian, Discrete, Product };

  struct Piece {
    double lo = 0.0;
    double hi = 1.0;
    double mass = 1.0;
  };

  Kind kind = Kind::Uniform;
  std::vector<Piece> pieces;          // Uniform
  double mean = 0.0, stdev = 1.0;     // Gaussian
  Matrix points;                      // Discrete, n x d
  Vector masses;                      // Discrete
  std::vector<DistSpec> marginals;    // Product (each one-dimensional)
  std::vector<int> marginal_nodes;    // Product: node count per marginal

  static DistSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Quadrature grid over the type space: nodes theta_k in R^d with positive
// weights w_k summing to one.
class TypeGrid {
 public:
  // Validates: at least one node, finite nodes, positive weights summing to
  // one within 1e-12 (weights are renormalized at build time, so this guards
  // against corrupt direct construction).
  TypeGrid(Matrix nodes, Vector weights);

  static TypeGrid build(const DistSpec& dist, int n_nodes);

  int size() const { return static_cast<int>(weights_.size()); }
  int dim() const { return static_cast<int>(nodes_.cols()); }
  const Matrix& nodes() const { return nodes_; }
  const Vector& weights() const { return weights_; }
  Vector node(int k) const { return nodes_.row(k).transpose(); }

 private:
  Matrix nodes_;    // K x d
  Vector weights_;  // K
};

// Weighted column sums of a conditional state: xbar_s = sum_k w_k x_ks.
Vector aggregate(const Matrix& state, const TypeGrid& grid);

// Variational norm of a (delta) state: sum_k w_k sum_s |m_ks|.
double variational_norm(const Matrix& delta, const TypeGrid& grid);

// True when every row is a probability vector within tol (entries >= -tol,
// row sums within tol of one).
bool rows_in_simplex(const Matrix& state, double tol);

// Largest per-row simplex violation: max over rows of
// max(|row_sum - 1|, -min_entry).
double simplex_violation(const Matrix& state);

}  // namespace heterodyn
