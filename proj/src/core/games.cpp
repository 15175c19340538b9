#include "games.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace heterodyn {

namespace {

using nlohmann::json;

double poly_eval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

double poly_antideriv(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (int j = static_cast<int>(c.size()) - 1; j >= 0; --j)
    v = v * x + c[j] / (j + 1);
  return v * x;
}

double poly_deriv(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j) v = v * x + c[j] * j;
  return v;
}

Matrix parse_matrix(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::invalid_argument(std::string(what) + ": expected a 2d array");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols)
      throw std::invalid_argument(std::string(what) + ": ragged rows");
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

void require_square(const Matrix& m, int n, const char* what) {
  if (m.rows() != n || m.cols() != n)
    throw std::invalid_argument(std::string(what) + ": expected a square matrix of the strategy count");
  if (!m.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

bool rows_all_equal(const Matrix& m, double tol) {
  for (int r = 1; r < m.rows(); ++r)
    if (((m.row(r) - m.row(0)).cwiseAbs().array() > tol).any()) return false;
  return true;
}

}  // namespace

double Kernel::eval(const Vector& a, const Vector& b) const {
  switch (kind) {
    case Kind::One:
      return 1.0;
    case Kind::Dot:
      return a.dot(b);
    case Kind::Rbf:
      return std::exp(-(a - b).squaredNorm() / (length * length));
  }
  return 0.0;
}

Kernel Kernel::from_json(const json& j) {
  Kernel k;
  std::string type = j.at("type").get<std::string>();
  if (type == "one") {
    k.kind = Kind::One;
  } else if (type == "dot") {
    k.kind = Kind::Dot;
  } else if (type == "rbf") {
    k.kind = Kind::Rbf;
    k.length = j.at("length").get<double>();
    if (!(k.length > 0.0))
      throw std::invalid_argument("kernel: rbf length must be positive");
  } else {
    throw std::invalid_argument("kernel: unknown type \"" + type + "\"");
  }
  return k;
}

json Kernel::to_json() const {
  json j;
  switch (kind) {
    case Kind::One: j["type"] = "one"; break;
    case Kind::Dot: j["type"] = "dot"; break;
    case Kind::Rbf: j["type"] = "rbf"; j["length"] = length; break;
  }
  return j;
}

CommonPayoff CommonPayoff::zero(int n_strategies) {
  if (n_strategies <= 0)
    throw std::invalid_argument("CommonPayoff::zero: need at least one strategy");
  CommonPayoff f;
  f.kind_ = Kind::Zero;
  f.n_strategies_ = n_strategies;
  return f;
}

CommonPayoff CommonPayoff::linear(Matrix a, Vector b) {
  int n = static_cast<int>(b.size());
  require_square(a, n, "CommonPayoff::linear");
  if (!b.allFinite())
    throw std::invalid_argument("CommonPayoff::linear: non-finite offset");
  CommonPayoff f;
  f.kind_ = Kind::Linear;
  f.n_strategies_ = n;
  f.a_ = std::move(a);
  f.b_ = std::move(b);
  return f;
}

CommonPayoff CommonPayoff::entry(std::vector<double> coeffs) {
  if (coeffs.empty())
    throw std::invalid_argument("CommonPayoff::entry: empty profile coefficients");
  CommonPayoff f;
  f.kind_ = Kind::Entry;
  f.n_strategies_ = 2;
  f.polys_.push_back(std::move(coeffs));
  return f;
}

CommonPayoff CommonPayoff::per_coord(std::vector<std::vector<double>> polys) {
  if (polys.empty())
    throw std::invalid_argument("CommonPayoff::per_coord: need one polynomial per strategy");
  CommonPayoff f;
  f.kind_ = Kind::PerCoord;
  f.n_strategies_ = static_cast<int>(polys.size());
  f.polys_ = std::move(polys);
  return f;
}

Vector CommonPayoff::value(const Vector& xbar) const {
  if (xbar.size() != n_strategies_)
    throw std::invalid_argument("CommonPayoff::value: aggregate has wrong size");
  switch (kind_) {
    case Kind::Zero:
      return Vector::Zero(n_strategies_);
    case Kind::Linear:
      return a_ * xbar + b_;
    case Kind::Entry: {
      Vector v = Vector::Zero(2);
      v(0) = poly_eval(polys_[0], xbar(0));
      return v;
    }
    case Kind::PerCoord: {
      Vector v(n_strategies_);
      for (int s = 0; s < n_strategies_; ++s) v(s) = poly_eval(polys_[s], xbar(s));
      return v;
    }
  }
  return Vector();
}

Matrix CommonPayoff::jacobian(const Vector& xbar) const {
  if (xbar.size() != n_strategies_)
    throw std::invalid_argument("CommonPayoff::jacobian: aggregate has wrong size");
  switch (kind_) {
    case Kind::Zero:
      return Matrix::Zero(n_strategies_, n_strategies_);
    case Kind::Linear:
      return a_;
    case Kind::Entry: {
      Matrix jac = Matrix::Zero(2, 2);
      jac(0, 0) = poly_deriv(polys_[0], xbar(0));
      return jac;
    }
    case Kind::PerCoord: {
      Matrix jac = Matrix::Zero(n_strategies_, n_strategies_);
      for (int s = 0; s < n_strategies_; ++s) jac(s, s) = poly_deriv(polys_[s], xbar(s));
      return jac;
    }
  }
  return Matrix();
}

bool CommonPayoff::has_potential() const {
  if (kind_ != Kind::Linear) return true;
  return (a_ - a_.transpose()).cwiseAbs().maxCoeff() <= 1e-12;
}

double CommonPayoff::potential(const Vector& xbar) const {
  if (!has_potential())
    throw std::logic_error("CommonPayoff::potential: linear family needs a symmetric matrix");
  if (xbar.size() != n_strategies_)
    throw std::invalid_argument("CommonPayoff::potential: aggregate has wrong size");
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Linear:
      return 0.5 * xbar.dot(a_ * xbar) + b_.dot(xbar);
    case Kind::Entry:
      return poly_antideriv(polys_[0], xbar(0));
    case Kind::PerCoord: {
      double f = 0.0;
      for (int s = 0; s < n_strategies_; ++s) f += poly_antideriv(polys_[s], xbar(s));
      return f;
    }
  }
  return 0.0;
}

double CommonPayoff::entry_profile(double share) const {
  if (kind_ != Kind::Entry)
    throw std::logic_error("CommonPayoff::entry_profile: not an entry family");
  return poly_eval(polys_[0], share);
}

CommonPayoff CommonPayoff::from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "zero") return zero(j.at("S").get<int>());
  if (type == "linear") {
    Matrix a = parse_matrix(j.at("A"), "common.linear.A");
    const auto& bj = j.at("b");
    Vector b(bj.size());
    for (size_t i = 0; i < bj.size(); ++i) b(static_cast<int>(i)) = bj[i].get<double>();
    return linear(std::move(a), std::move(b));
  }
  if (type == "entry") return entry(j.at("coeffs").get<std::vector<double>>());
  if (type == "percoord")
    return per_coord(j.at("polys").get<std::vector<std::vector<double>>>());
  throw std::invalid_argument("common payoff: unknown type \"" + type + "\"");
}

json CommonPayoff::to_json() const {
  json j;
  switch (kind_) {
    case Kind::Zero:
      j["type"] = "zero";
      j["S"] = n_strategies_;
      break;
    case Kind::Linear: {
      j["type"] = "linear";
      j["A"] = matrix_json(a_);
      json b = json::array();
      for (int i = 0; i < b_.size(); ++i) b.push_back(b_(i));
      j["b"] = b;
      break;
    }
    case Kind::Entry:
      j["type"] = "entry";
      j["coeffs"] = polys_[0];
      break;
    case Kind::PerCoord:
      j["type"] = "percoord";
      j["polys"] = polys_;
      break;
  }
  return j;
}

Vector ThetaMap::apply(const Vector& theta, int n_strategies) const {
  switch (kind) {
    case Kind::Identity:
      if (theta.size() != n_strategies)
        throw std::invalid_argument("theta_map identity: type dimension must equal the strategy count");
      return theta;
    case Kind::Columns: {
      if (static_cast<int>(strategies.size()) != theta.size())
        throw std::invalid_argument("theta_map columns: need one target strategy per type coordinate");
      Vector v = Vector::Zero(n_strategies);
      for (int c = 0; c < theta.size(); ++c) {
        int s = strategies[static_cast<size_t>(c)];
        if (s < 0 || s >= n_strategies)
          throw std::invalid_argument("theta_map columns: strategy index out of range");
        v(s) += theta(c);
      }
      return v;
    }
    case Kind::Linear:
      if (m.rows() != n_strategies || m.cols() != theta.size())
        throw std::invalid_argument("theta_map linear: matrix must be S x d");
      return m * theta;
  }
  return Vector();
}

ThetaMap ThetaMap::from_json(const json& j) {
  ThetaMap t;
  std::string type = j.at("type").get<std::string>();
  if (type == "identity") {
    t.kind = Kind::Identity;
  } else if (type == "columns") {
    t.kind = Kind::Columns;
    t.strategies = j.at("strategies").get<std::vector<int>>();
  } else if (type == "matrix") {
    t.kind = Kind::Linear;
    t.m = parse_matrix(j.at("M"), "theta_map.M");
  } else {
    throw std::invalid_argument("theta_map: unknown type \"" + type + "\"");
  }
  return t;
}

json ThetaMap::to_json() const {
  json j;
  switch (kind) {
    case Kind::Identity: j["type"] = "identity"; break;
    case Kind::Columns: j["type"] = "columns"; j["strategies"] = strategies; break;
    case Kind::Linear: j["type"] = "matrix"; j["M"] = matrix_json(m); break;
  }
  return j;
}

GameSpec GameSpec::asag(CommonPayoff f0, ThetaMap tmap, bool pricing) {
  GameSpec g;
  g.kind_ = Kind::Asag;
  g.n_strategies_ = f0.strategies();
  g.common_ = std::move(f0);
  g.theta_map_ = std::move(tmap);
  g.pricing_ = pricing;
  return g;
}

GameSpec GameSpec::random_matching(Matrix u_const, Kernel kern, Matrix u_kern) {
  int n = static_cast<int>(u_const.rows());
  require_square(u_const, n, "random_matching.u_const");
  if (u_kern.size() == 0) u_kern = Matrix::Zero(n, n);
  require_square(u_kern, n, "random_matching.u_kernel");
  GameSpec g;
  g.kind_ = Kind::RandomMatching;
  g.n_strategies_ = n;
  g.u_const_ = std::move(u_const);
  g.u_kern_ = std::move(u_kern);
  g.kernel_ = kern;
  return g;
}

GameSpec GameSpec::random_matching_with_potential(Matrix u_const, Kernel kern,
                                                  Matrix u_kern, Matrix u0_const,
                                                  Matrix u0_kern) {
  GameSpec g = random_matching(std::move(u_const), kern, std::move(u_kern));
  int n = g.n_strategies_;
  if (u0_kern.size() == 0) u0_kern = Matrix::Zero(n, n);
  require_square(u0_const, n, "random_matching.u0_const");
  require_square(u0_kern, n, "random_matching.u0_kernel");
  const double tol = 1e-12;
  if ((u0_const - u0_const.transpose()).cwiseAbs().maxCoeff() > tol ||
      (u0_kern - u0_kern.transpose()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("random_matching: U0 parts must be symmetric matrices");
  if (!rows_all_equal(g.u_const_ - u0_const, tol) ||
      !rows_all_equal(g.u_kern_ - u0_kern, tol))
    throw std::invalid_argument(
        "random_matching: U - U0 must be passive (identical rows), so U0 is the symmetric part");
  g.u0_const_ = std::move(u0_const);
  g.u0_kern_ = std::move(u0_kern);
  g.has_u0_ = true;
  return g;
}

GameSpec GameSpec::structured(Matrix m, Kernel kern) {
  int n = static_cast<int>(m.rows());
  require_square(m, n, "structured.matrix");
  GameSpec g;
  g.kind_ = Kind::Structured;
  g.n_strategies_ = n;
  g.m_ = std::move(m);
  g.kernel_ = kern;
  return g;
}

void GameSpec::set_fd_prices(bool on, double step) {
  if (on && !(step > 0.0))
    throw std::invalid_argument("GameSpec: fd_step must be positive");
  use_fd_prices_ = on;
  if (on) fd_step_ = step;
}

const CommonPayoff& GameSpec::common() const {
  if (kind_ != Kind::Asag)
    throw std::logic_error("GameSpec::common: not an aggregative game");
  return common_;
}

Matrix GameSpec::theta_payoffs(const TypeGrid& grid) const {
  if (kind_ != Kind::Asag)
    throw std::logic_error("GameSpec::theta_payoffs: not an aggregative game");
  Matrix out(grid.size(), n_strategies_);
  for (int k = 0; k < grid.size(); ++k) {
    Vector v = theta_map_.apply(grid.node(k), n_strategies_);
    if (!v.allFinite())
      throw std::invalid_argument("theta_payoffs: non-finite idiosyncratic payoff at a node");
    out.row(k) = v.transpose();
  }
  return out;
}

const Matrix& GameSpec::kernel_matrix(const TypeGrid& grid) const {
  const double* tag = grid.nodes().data();
  if (cache_.grid_tag == tag && cache_.size == grid.size()) return cache_.values;
  int k = grid.size();
  std::int64_t tensor_entries =
      static_cast<std::int64_t>(k) * k * n_strategies_ * n_strategies_;
  Matrix values(k, k);
  for (int i = 0; i < k; ++i) {
    values(i, i) = kernel_.eval(grid.node(i), grid.node(i));
    for (int j = i + 1; j < k; ++j) {
      double v = kernel_.eval(grid.node(i), grid.node(j));
      values(i, j) = v;
      values(j, i) = v;
    }
  }
  if (tensor_entries <= cache_cap_) {
    cache_.grid_tag = tag;
    cache_.size = k;
    cache_.values = std::move(values);
    return cache_.values;
  }
  static thread_local Matrix uncached;
  uncached = std::move(values);
  return uncached;
}

Matrix GameSpec::payoff_profile(const Matrix& state, const TypeGrid& grid) const {
  if (state.rows() != grid.size() || state.cols() != n_strategies_)
    throw std::invalid_argument("payoff_profile: state must be K x S for this game and grid");
  if (!state.allFinite())
    throw std::invalid_argument("payoff_profile: non-finite state");
  int k = grid.size();
  switch (kind_) {
    case Kind::Asag: {
      Vector xbar = aggregate(state, grid);
      Vector f0 = common_.value(xbar);
      if (pricing_) {
        Vector t = use_fd_prices_ ? pigou_prices_fd(common_, xbar, fd_step_)
                                  : pigou_prices(common_, xbar);
        f0 -= t;
      }
      Matrix pi = theta_payoffs(grid);
      pi.rowwise() += f0.transpose();
      return pi;
    }
    case Kind::RandomMatching: {
      Vector xbar = aggregate(state, grid);
      Matrix pi = Matrix::Zero(k, n_strategies_);
      pi.rowwise() += (u_const_ * xbar).transpose();
      if ((u_kern_.array() != 0.0).any()) {
        const Matrix& km = kernel_matrix(grid);
        Matrix mixed = km * (grid.weights().asDiagonal() * state);  // K x S
        pi += mixed * u_kern_.transpose();
      }
      return pi;
    }
    case Kind::Structured: {
      const Matrix& km = kernel_matrix(grid);
      Matrix mixed = km * (grid.weights().asDiagonal() * state);
      return mixed * m_.transpose();
    }
  }
  return Matrix();
}

std::vector<int> br_set(const Vector& payoffs, double tie_tol) {
  if (!payoffs.allFinite())
    throw std::invalid_argument("br_set: non-finite payoffs");
  double top = payoffs.maxCoeff();
  std::vector<int> out;
  for (int s = 0; s < payoffs.size(); ++s)
    if (payoffs(s) >= top - tie_tol) out.push_back(s);
  return out;
}

std::vector<std::vector<int>> best_response_sets(const Matrix& payoffs, double tie_tol) {
  std::vector<std::vector<int>> out(static_cast<size_t>(payoffs.rows()));
  for (int r = 0; r < payoffs.rows(); ++r)
    out[static_cast<size_t>(r)] = br_set(payoffs.row(r).transpose(), tie_tol);
  return out;
}

int br_designated(const Vector& payoffs, double tie_tol) {
  double top = payoffs.maxCoeff();
  for (int s = 0; s < payoffs.size(); ++s)
    if (payoffs(s) >= top - tie_tol) return s;
  return 0;
}

Vector pigou_prices(const CommonPayoff& f0, const Vector& xbar) {
  return -(f0.jacobian(xbar).transpose() * xbar);
}

Vector pigou_prices_fd(const CommonPayoff& f0, const Vector& xbar, double fd_step) {
  if (!(fd_step > 0.0))
    throw std::invalid_argument("pigou_prices_fd: fd_step must be positive");
  int n = f0.strategies();
  Vector t = Vector::Zero(n);
  Vector lo = xbar, hi = xbar;
  for (int s = 0; s < n; ++s) {
    hi(s) = xbar(s) + fd_step;
    lo(s) = xbar(s) - fd_step;
    Vector column = (f0.value(hi) - f0.value(lo)) / (2.0 * fd_step);
    t(s) = -column.dot(xbar);
    hi(s) = xbar(s);
    lo(s) = xbar(s);
  }
  return t;
}

GameSpec apply_pricing(const GameSpec& game, bool enabled) {
  if (game.kind() != GameSpec::Kind::Asag)
    throw std::invalid_argument("apply_pricing: Pigouvian pricing is defined for aggregative games only");
  GameSpec priced = game;
  priced.pricing_ = enabled;
  return priced;
}

GameSpec GameSpec::from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "asag") {
    CommonPayoff f0 = CommonPayoff::from_json(j.at("common"));
    ThetaMap tmap;
    if (j.contains("theta_map")) tmap = ThetaMap::from_json(j.at("theta_map"));
    GameSpec g = asag(std::move(f0), std::move(tmap), j.value("pricing", false));
    if (j.contains("fd_step")) g.set_fd_prices(true, j.at("fd_step").get<double>());
    return g;
  }
  if (type == "random_matching") {
    Matrix u_const = parse_matrix(j.at("u_const"), "game.u_const");
    Kernel kern;
    if (j.contains("kernel")) kern = Kernel::from_json(j.at("kernel"));
    Matrix u_kern;
    if (j.contains("u_kernel")) u_kern = parse_matrix(j.at("u_kernel"), "game.u_kernel");
    if (j.contains("potential")) {
      const auto& pj = j.at("potential");
      Matrix u0_const = parse_matrix(pj.at("u0_const"), "game.potential.u0_const");
      Matrix u0_kern;
      if (pj.contains("u0_kernel"))
        u0_kern = parse_matrix(pj.at("u0_kernel"), "game.potential.u0_kernel");
      return random_matching_with_potential(std::move(u_const), kern, std::move(u_kern),
                                            std::move(u0_const), std::move(u0_kern));
    }
    return random_matching(std::move(u_const), kern, std::move(u_kern));
  }
  if (type == "structured") {
    Matrix m = parse_matrix(j.at("matrix"), "game.matrix");
    Kernel kern;
    if (j.contains("kernel")) kern = Kernel::from_json(j.at("kernel"));
    return structured(std::move(m), kern);
  }
  throw std::invalid_argument("game: unknown type \"" + type + "\"");
}

json GameSpec::to_json() const {
  json j;
  switch (kind_) {
    case Kind::Asag:
      j["type"] = "asag";
      j["common"] = common_.to_json();
      j["theta_map"] = theta_map_.to_json();
      j["pricing"] = pricing_;
      if (use_fd_prices_) j["fd_step"] = fd_step_;
      break;
    case Kind::RandomMatching:
      j["type"] = "random_matching";
      j["u_const"] = matrix_json(u_const_);
      j["kernel"] = kernel_.to_json();
      j["u_kernel"] = matrix_json(u_kern_);
      if (has_u0_) {
        j["potential"] = {{"u0_const", matrix_json(u0_const_)},
                          {"u0_kernel", matrix_json(u0_kern_)}};
      }
      break;
    case Kind::Structured:
      j["type"] = "structured";
      j["matrix"] = matrix_json(m_);
      j["kernel"] = kernel_.to_json();
      break;
  }
  return j;
}

}  // namespace heterodyn
