#include "typegrid.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace heterodyn {

namespace {

using nlohmann::json;

// Gauss-Hermite rule for integration against N(mean, stdev^2), computed by
// Golub-Welsch: eigen-decompose the symmetric tridiagonal Jacobi matrix with
// off-diagonal sqrt(i/2). Eigenvalues are the physicists' nodes; normalized
// weights are the squared first eigenvector components, which sum to one.
void gauss_hermite(double mean, double stdev, int n, Matrix& nodes, Vector& weights) {
  Matrix jac = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = std::sqrt(i / 2.0);
    jac(i, i - 1) = b;
    jac(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite: eigensolver failed");
  nodes.resize(n, 1);
  weights.resize(n);
  const Vector& t = es.eigenvalues();
  const Matrix& v = es.eigenvectors();
  for (int i = 0; i < n; ++i) {
    nodes(i, 0) = mean + std::sqrt(2.0) * stdev * t(i);
    weights(i) = v(0, i) * v(0, i);
  }
  weights /= weights.sum();
}

void midpoint_pieces(const std::vector<DistSpec::Piece>& pieces, int n_nodes,
                     Matrix& nodes, Vector& weights) {
  if (pieces.empty())
    throw std::invalid_argument("uniform dist: no pieces");
  double total_mass = 0.0;
  for (const auto& p : pieces) {
    if (!std::isfinite(p.lo) || !std::isfinite(p.hi))
      throw std::invalid_argument("uniform dist: unbounded support is not representable by the midpoint rule");
    if (p.hi <= p.lo)
      throw std::invalid_argument("uniform dist: piece needs hi > lo");
    if (p.mass <= 0.0)
      throw std::invalid_argument("uniform dist: piece mass must be positive");
    total_mass += p.mass;
  }
  // Allocate nodes to pieces proportionally to mass, largest remainder first,
  // at least one node per piece.
  int np = static_cast<int>(pieces.size());
  if (n_nodes < np)
    throw std::invalid_argument("uniform dist: need at least one node per piece");
  std::vector<int> alloc(np, 1);
  std::vector<double> frac(np);
  int assigned = np;
  for (int i = 0; i < np; ++i) {
    double ideal = n_nodes * pieces[i].mass / total_mass;
    int extra = std::max(0, static_cast<int>(std::floor(ideal)) - 1);
    alloc[i] += extra;
    assigned += extra;
    frac[i] = ideal - std::floor(ideal);
  }
  while (assigned < n_nodes) {
    int best = 0;
    for (int i = 1; i < np; ++i)
      if (frac[i] > frac[best]) best = i;
    alloc[best] += 1;
    frac[best] = -1.0;
    assigned += 1;
  }
  nodes.resize(n_nodes, 1);
  weights.resize(n_nodes);
  int at = 0;
  for (int i = 0; i < np; ++i) {
    const auto& p = pieces[i];
    double step = (p.hi - p.lo) / alloc[i];
    double w = (p.mass / total_mass) / alloc[i];
    for (int j = 0; j < alloc[i]; ++j, ++at) {
      nodes(at, 0) = p.lo + (j + 0.5) * step;
      weights(at) = w;
    }
  }
}

}  // namespace

TypeGrid::TypeGrid(Matrix nodes, Vector weights)
    : nodes_(std::move(nodes)), weights_(std::move(weights)) {
  if (weights_.size() == 0)
    throw std::invalid_argument("TypeGrid: empty grid");
  if (nodes_.rows() != weights_.size())
    throw std::invalid_argument("TypeGrid: nodes/weights size mismatch");
  if (!nodes_.allFinite())
    throw std::invalid_argument("TypeGrid: non-finite node coordinates");
  if ((weights_.array() <= 0.0).any())
    throw std::invalid_argument("TypeGrid: weights must be positive");
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("TypeGrid: weights must sum to one");
  for (int i = 0; i < nodes_.rows(); ++i)
    for (int j = i + 1; j < nodes_.rows(); ++j)
      if ((nodes_.row(i).array() == nodes_.row(j).array()).all())
        throw std::invalid_argument("TypeGrid: nodes must be pairwise distinct");
}

TypeGrid TypeGrid::build(const DistSpec& dist, int n_nodes) {
  Matrix nodes;
  Vector weights;
  switch (dist.kind) {
    case DistSpec::Kind::Uniform: {
      if (n_nodes <= 0)
        throw std::invalid_argument("build_grid: n_nodes must be positive");
      midpoint_pieces(dist.pieces, n_nodes, nodes, weights);
      break;
    }
    case DistSpec::Kind::Gaussian: {
      if (n_nodes <= 0)
        throw std::invalid_argument("build_grid: n_nodes must be positive");
      if (!(dist.stdev > 0.0) || !std::isfinite(dist.stdev) || !std::isfinite(dist.mean))
        throw std::invalid_argument("gaussian dist: stdev must be positive and parameters finite");
      gauss_hermite(dist.mean, dist.stdev, n_nodes, nodes, weights);
      break;
    }
    case DistSpec::Kind::Discrete: {
      if (dist.points.rows() == 0)
        throw std::invalid_argument("discrete dist: empty point list");
      if (dist.points.rows() != dist.masses.size())
        throw std::invalid_argument("discrete dist: points/masses size mismatch");
      if ((dist.masses.array() <= 0.0).any())
        throw std::invalid_argument("discrete dist: masses must be positive");
      nodes = dist.points;
      weights = dist.masses / dist.masses.sum();
      break;
    }
    case DistSpec::Kind::Product: {
      if (dist.marginals.empty())
        throw std::invalid_argument("product dist: no marginals");
      if (dist.marginals.size() != dist.marginal_nodes.size())
        throw std::invalid_argument("product dist: marginals/node counts mismatch");
      std::vector<TypeGrid> parts;
      parts.reserve(dist.marginals.size());
      for (size_t i = 0; i < dist.marginals.size(); ++i) {
        if (dist.marginals[i].kind == DistSpec::Kind::Product)
          throw std::invalid_argument("product dist: marginals must be one-dimensional (no nesting)");
        parts.push_back(TypeGrid::build(dist.marginals[i], dist.marginal_nodes[i]));
        if (parts.back().dim() != 1)
          throw std::invalid_argument("product dist: marginals must be one-dimensional");
      }
      int total = 1;
      for (const auto& g : parts) total *= g.size();
      int d = static_cast<int>(parts.size());
      nodes.resize(total, d);
      weights.resize(total);
      for (int idx = 0; idx < total; ++idx) {
        int rem = idx;
        double w = 1.0;
        for (int j = d - 1; j >= 0; --j) {
          int kj = rem % parts[j].size();
          rem /= parts[j].size();
          nodes(idx, j) = parts[j].nodes()(kj, 0);
          w *= parts[j].weights()(kj);
        }
        weights(idx) = w;
      }
      weights /= weights.sum();
      break;
    }
  }
  return TypeGrid(std::move(nodes), std::move(weights));
}

Vector aggregate(const Matrix& state, const TypeGrid& grid) {
  if (state.rows() != grid.size())
    throw std::invalid_argument("aggregate: state rows != grid size");
  return state.transpose() * grid.weights();
}

double variational_norm(const Matrix& delta, const TypeGrid& grid) {
  if (delta.rows() != grid.size())
    throw std::invalid_argument("variational_norm: delta rows != grid size");
  return grid.weights().dot(delta.cwiseAbs().rowwise().sum());
}

bool rows_in_simplex(const Matrix& state, double tol) {
  if ((state.array() < -tol).any()) return false;
  if (!state.allFinite()) return false;
  return ((state.rowwise().sum().array() - 1.0).abs() <= tol).all();
}

double simplex_violation(const Matrix& state) {
  if (!state.allFinite()) return std::numeric_limits<double>::infinity();
  double sum_dev = (state.rowwise().sum().array() - 1.0).abs().maxCoeff();
  double neg = std::max(0.0, -state.minCoeff());
  return std::max(sum_dev, neg);
}

DistSpec DistSpec::from_json(const json& j) {
  if (!j.is_object() || !j.contains("type"))
    throw std::invalid_argument("dist spec: expected an object with a \"type\" field");
  DistSpec d;
  std::string type = j.at("type").get<std::string>();
  if (type == "uniform") {
    d.kind = Kind::Uniform;
    if (j.contains("pieces")) {
      for (const auto& pj : j.at("pieces")) {
        Piece p;
        p.lo = pj.at("lo").get<double>();
        p.hi = pj.at("hi").get<double>();
        p.mass = pj.value("mass", 1.0);
        d.pieces.push_back(p);
      }
    } else {
      Piece p;
      p.lo = j.at("lo").get<double>();
      p.hi = j.at("hi").get<double>();
      d.pieces.push_back(p);
    }
  } else if (type == "gaussian") {
    d.kind = Kind::Gaussian;
    d.mean = j.at("mean").get<double>();
    d.stdev = j.at("stdev").get<double>();
  } else if (type == "discrete") {
    d.kind = Kind::Discrete;
    const auto& pts = j.at("points");
    if (!pts.is_array() || pts.empty())
      throw std::invalid_argument("dist spec: discrete points must be a non-empty array");
    int n = static_cast<int>(pts.size());
    int dim = pts[0].is_array() ? static_cast<int>(pts[0].size()) : 1;
    d.points.resize(n, dim);
    for (int i = 0; i < n; ++i) {
      if (pts[i].is_array()) {
        if (static_cast<int>(pts[i].size()) != dim)
          throw std::invalid_argument("dist spec: discrete points have inconsistent dimension");
        for (int c = 0; c < dim; ++c) d.points(i, c) = pts[i][c].get<double>();
      } else {
        if (dim != 1)
          throw std::invalid_argument("dist spec: discrete points have inconsistent dimension");
        d.points(i, 0) = pts[i].get<double>();
      }
    }
    const auto& ms = j.at("masses");
    if (static_cast<int>(ms.size()) != n)
      throw std::invalid_argument("dist spec: masses must match points");
    d.masses.resize(n);
    for (int i = 0; i < n; ++i) d.masses(i) = ms[i].get<double>();
  } else if (type == "product") {
    d.kind = Kind::Product;
    for (const auto& mj : j.at("marginals")) {
      d.marginals.push_back(DistSpec::from_json(mj));
      d.marginal_nodes.push_back(mj.at("n_nodes").get<int>());
    }
  } else {
    throw std::invalid_argument("dist spec: unknown type \"" + type + "\"");
  }
  return d;
}

nlohmann::json DistSpec::to_json() const {
  json j;
  switch (kind) {
    case Kind::Uniform:
      j["type"] = "uniform";
      if (pieces.size() == 1 && pieces[0].mass == 1.0) {
        j["lo"] = pieces[0].lo;
        j["hi"] = pieces[0].hi;
      } else {
        json arr = json::array();
        for (const auto& p : pieces)
          arr.push_back({{"lo", p.lo}, {"hi", p.hi}, {"mass", p.mass}});
        j["pieces"] = arr;
      }
      break;
    case Kind::Gaussian:
      j["type"] = "gaussian";
      j["mean"] = mean;
      j["stdev"] = stdev;
      break;
    case Kind::Discrete: {
      j["type"] = "discrete";
      json pts = json::array();
      for (int i = 0; i < points.rows(); ++i) {
        if (points.cols() == 1) {
          pts.push_back(points(i, 0));
        } else {
          json row = json::array();
          for (int c = 0; c < points.cols(); ++c) row.push_back(points(i, c));
          pts.push_back(row);
        }
      }
      j["points"] = pts;
      json ms = json::array();
      for (int i = 0; i < masses.size(); ++i) ms.push_back(masses(i));
      j["masses"] = ms;
      break;
    }
    case Kind::Product: {
      j["type"] = "product";
      json arr = json::array();
      for (size_t i = 0; i < marginals.size(); ++i) {
        json mj = marginals[i].to_json();
        mj["n_nodes"] = marginal_nodes[i];
        arr.push_back(mj);
      }
      j["marginals"] = arr;
      break;
    }
  }
  return j;
}

}  // namespace heterodyn
